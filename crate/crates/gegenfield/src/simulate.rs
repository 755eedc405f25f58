//! Seeded Gaussian white noise and the truncated moving-average realization
//! of the Gegenbauer field on `{0,…,T}²`.
//!
//! The field is the separable filter
//!
//! ```text
//! Y_{t₁,t₂} = Σ_{n₁=0}^{N} Σ_{n₂=0}^{N} C_{n₁}^{(d₁)}(u₁) C_{n₂}^{(d₂)}(u₂) ε_{t₁−n₁, t₂−n₂}
//! ```
//!
//! with `ε` drawn on the extended grid `{−N,…,T}²` so every term of the
//! truncated sum is backed by a real noise value.
//!
//! # Seed-to-stream mapping
//!
//! The mapping from a 64-bit seed to the noise array is pinned by this crate
//! and safe to rely on across versions:
//!
//! 1. the seed is expanded to a 32-byte ChaCha12 key by four SplitMix64 steps;
//! 2. the keystream is consumed as `u64`s in row-major cell order, two per
//!    Gaussian pair;
//! 3. each pair maps through Box–Muller: `u = (x >> 11)·2⁻⁵³`,
//!    `z₀ = √(−2 ln(1−u₁)) cos(2π u₂)`, `z₁ = √(−2 ln(1−u₁)) sin(2π u₂)`.
//!
//! Replication seeds come from [`derive_seed`], a SplitMix64 counter scheme
//! over `(base_seed, T, replication)`: distinct counters give distinct keys,
//! and distinct ChaCha keys give non-overlapping streams by construction.

use crate::error::GegenError;
use crate::model::{gegenbauer_coeffs, ModelParams};
use crate::Result;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// Real-valued observations on the lattice `{0,…,T}²`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    size_t: usize,
    values: Vec<f64>,
}

impl GridField {
    /// `values` is row-major over `(t₁, t₂) ∈ {0,…,T}²` and must hold
    /// `(T+1)²` finite entries.
    pub fn new(size_t: usize, values: Vec<f64>) -> Result<Self> {
        let n = size_t + 1;
        if values.len() != n * n {
            return Err(GegenError::InvalidParam {
                name: "values",
                value: values.len() as f64,
                range: "(T+1)^2 entries",
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(GegenError::MalformedInput {
                position: format!("entry {bad}"),
                message: "non-finite field value".into(),
            });
        }
        Ok(Self { size_t, values })
    }

    pub fn size_t(&self) -> usize {
        self.size_t
    }

    /// Side length `T + 1`.
    pub fn side(&self) -> usize {
        self.size_t + 1
    }

    pub fn get(&self, t1: usize, t2: usize) -> f64 {
        self.values[t1 * self.side() + t2]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row-major CSV with header `t1,t2,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t1,t2,value")?;
        let n = self.side();
        for t1 in 0..n {
            for t2 in 0..n {
                writeln!(w, "{},{},{}", t1, t2, self.values[t1 * n + t2])?;
            }
        }
        Ok(())
    }

    /// Parse the CSV produced by [`GridField::write_csv`]. Reports the line
    /// of the first malformed or out-of-order record.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h.trim() == "t1,t2,value" => {}
            Some((_, Ok(h))) => {
                return Err(GegenError::MalformedInput {
                    position: "line 1".into(),
                    message: format!("expected header `t1,t2,value`, found `{h}`"),
                })
            }
            Some((_, Err(e))) => return Err(e.into()),
            None => {
                return Err(GegenError::MalformedInput {
                    position: "line 1".into(),
                    message: "empty file".into(),
                })
            }
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let mut parts = line.split(',');
            let bad = |message: String| GegenError::MalformedInput {
                position: format!("line {lineno}"),
                message,
            };
            let t1: usize = parts
                .next()
                .ok_or_else(|| bad("missing t1".into()))?
                .trim()
                .parse()
                .map_err(|e| bad(format!("bad t1: {e}")))?;
            let t2: usize = parts
                .next()
                .ok_or_else(|| bad("missing t2".into()))?
                .trim()
                .parse()
                .map_err(|e| bad(format!("bad t2: {e}")))?;
            let v: f64 = parts
                .next()
                .ok_or_else(|| bad("missing value".into()))?
                .trim()
                .parse()
                .map_err(|e| bad(format!("bad value: {e}")))?;
            if parts.next().is_some() {
                return Err(bad("too many fields".into()));
            }
            records.push((t1, t2, v, lineno));
        }
        if records.is_empty() {
            return Err(GegenError::MalformedInput {
                position: "line 2".into(),
                message: "no records".into(),
            });
        }
        let side = (records.len() as f64).sqrt().round() as usize;
        if side * side != records.len() || side == 0 {
            return Err(GegenError::MalformedInput {
                position: format!("line {}", records.last().unwrap().3),
                message: format!("{} records do not form a square grid", records.len()),
            });
        }
        let mut values = vec![0.0; side * side];
        for (k, &(t1, t2, v, lineno)) in records.iter().enumerate() {
            if t1 != k / side || t2 != k % side {
                return Err(GegenError::MalformedInput {
                    position: format!("line {lineno}"),
                    message: format!(
                        "expected record ({},{}), found ({t1},{t2})",
                        k / side,
                        k % side
                    ),
                });
            }
            values[k] = v;
        }
        GridField::new(side - 1, values)
    }
}

/// JSON metadata envelope accompanying a serialized [`GridField`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldMeta {
    pub size_t: usize,
    pub params: ModelParams,
    pub n_trunc: usize,
    pub seed: u64,
    pub library_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl FieldMeta {
    pub fn new(size_t: usize, cfg: &SimConfig) -> Self {
        Self {
            size_t,
            params: cfg.params,
            n_trunc: cfg.n_trunc,
            seed: cfg.seed,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: None,
        }
    }
}

/// Simulation configuration: model parameters, truncation order of the
/// moving-average sum, and the noise seed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub n_trunc: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(params: ModelParams, n_trunc: usize, seed: u64) -> Result<Self> {
        if n_trunc == 0 {
            return Err(GegenError::InvalidParam {
                name: "n_trunc",
                value: 0.0,
                range: ">= 1",
            });
        }
        Ok(Self { params, n_trunc, seed })
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Counter-based replication seed: SplitMix64 over `(base_seed, T, rep)`.
pub fn derive_seed(base_seed: u64, t_size: u64, rep: u64) -> u64 {
    let mixed = splitmix64(base_seed ^ t_size.wrapping_mul(0x9e3779b97f4a7c15));
    splitmix64(mixed ^ rep.wrapping_mul(0xbf58476d1ce4e5b9))
}

fn chacha_from_seed(seed: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    let mut s = seed;
    for chunk in key.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

fn u64_to_unit(x: u64) -> f64 {
    (x >> 11) as f64 / (1u64 << 53) as f64
}

/// Rectangular array of i.i.d. `N(0, σ²_ε)` draws, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseGrid {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl NoiseGrid {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// i.i.d. Gaussian noise with the documented seed-to-stream mapping.
pub fn white_noise_grid(rows: usize, cols: usize, sigma2_eps: f64, seed: u64) -> Result<NoiseGrid> {
    if rows == 0 || cols == 0 {
        return Err(GegenError::InvalidParam {
            name: "rows/cols",
            value: 0.0,
            range: ">= 1",
        });
    }
    if !(sigma2_eps > 0.0) {
        return Err(GegenError::InvalidParam {
            name: "sigma2_eps",
            value: sigma2_eps,
            range: "(0, inf)",
        });
    }
    let sigma = sigma2_eps.sqrt();
    let mut rng = chacha_from_seed(seed);
    let n = rows * cols;
    let mut values = Vec::with_capacity(n);
    while values.len() < n {
        let u1 = u64_to_unit(rng.next_u64());
        let u2 = u64_to_unit(rng.next_u64());
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let phi = 2.0 * PI * u2;
        values.push(sigma * r * phi.cos());
        if values.len() < n {
            values.push(sigma * r * phi.sin());
        }
    }
    Ok(NoiseGrid { rows, cols, values })
}

/// Separable moving-average filter of `noise` (on `{−N,…,T}²`) with per-axis
/// coefficient vectors `c1`, `c2` of length `N+1`; returns values on
/// `{0,…,T}²`. Row filter along axis 1 first, then along axis 2.
pub(crate) fn convolve_separable(
    t_size: usize,
    n_trunc: usize,
    noise: &NoiseGrid,
    c1: &[f64],
    c2: &[f64],
) -> Vec<f64> {
    let n = n_trunc;
    let side_out = t_size + 1;
    let side_ext = t_size + n + 1;
    debug_assert_eq!(noise.rows, side_ext);
    debug_assert_eq!(noise.cols, side_ext);
    // tmp[t1][s2]: axis-1 filter applied, axis-2 still on the extended range.
    let mut tmp = vec![0.0; side_out * side_ext];
    for t1 in 0..side_out {
        for s2 in 0..side_ext {
            let mut acc = 0.0;
            for (n1, &c) in c1.iter().enumerate() {
                // extended index: (t1 − n1) + N
                acc += c * noise.get(t1 + n - n1, s2);
            }
            tmp[t1 * side_ext + s2] = acc;
        }
    }
    let mut out = vec![0.0; side_out * side_out];
    for t1 in 0..side_out {
        for t2 in 0..side_out {
            let mut acc = 0.0;
            for (n2, &c) in c2.iter().enumerate() {
                acc += c * tmp[t1 * side_ext + (t2 + n - n2)];
            }
            out[t1 * side_out + t2] = acc;
        }
    }
    out
}

/// Simulate the Gegenbauer field on `{0,…,T}²` by the truncated
/// moving-average sum of order `cfg.n_trunc`.
pub fn simulate_field(t_size: usize, cfg: &SimConfig) -> Result<GridField> {
    if t_size == 0 {
        return Err(GegenError::InvalidParam {
            name: "T",
            value: 0.0,
            range: ">= 1",
        });
    }
    let p = &cfg.params;
    let c1 = gegenbauer_coeffs(cfg.n_trunc, p.d1, p.u1)?;
    let c2 = gegenbauer_coeffs(cfg.n_trunc, p.d2, p.u2)?;
    let side_ext = t_size + cfg.n_trunc + 1;
    let noise = white_noise_grid(side_ext, side_ext, p.sigma2_eps, cfg.seed)?;
    let values = convolve_separable(t_size, cfg.n_trunc, &noise, &c1, &c2);
    GridField::new(t_size, values)
}
