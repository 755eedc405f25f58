//! Frequency-domain summaries of a [`GridField`]: the periodogram `I_T`, the
//! unbiased lag covariance estimator, and the unbiased periodogram `I*_T`.
//!
//! ```text
//! I_T(λ)   = (2πT)⁻² |Σ_{t₁=0}^{T} Σ_{t₂=0}^{T} e^{−i(t₁λ₁+t₂λ₂)} Y_{t₁,t₂}|²
//! γ̂_T(t)   = ((T−|t₁|)(T−|t₂|))⁻¹ Σ_{k=0}^{T−|t₁|} Σ_{l=0}^{T−|t₂|} Y_{k,l} Y_{|t₁|+k,|t₂|+l}
//! I*_T(λ)  = (2π)⁻² Σ_{t₁=1−T}^{T−1} Σ_{t₂=1−T}^{T−1} e^{−i(λ₁t₁+λ₂t₂)} γ̂_T(t)
//! ```
//!
//! The observation grid has `(T+1)²` points while `I_T` is normalized by
//! `(2πT)²` and `γ̂_T` divides inclusive `(T−|t_i|+1)`-term sums by
//! `(T−|t_i|)`; both are kept exactly as written, an `O(1/T)` normalization
//! quirk of the estimator definitions.
//!
//! Evaluation on arbitrary rectangular frequency grids is
//! transform-accelerated by factorizing the complex exponential per axis;
//! this equals the direct double sum to rounding error.

use crate::error::GegenError;
use crate::model::Lag;
use crate::simulate::GridField;
use crate::Result;

use std::f64::consts::PI;
use std::io::Write;

/// Values of `I_T` or `I*_T` on a rectangular frequency grid, row-major with
/// the `freqs1` axis outer.
///
/// `I_T` and the clamped `I*_T` are nonnegative; the raw `I*_T` may dip
/// below zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodogramGrid {
    freqs1: Vec<f64>,
    freqs2: Vec<f64>,
    values: Vec<f64>,
}

impl PeriodogramGrid {
    /// Assemble a grid from premade values (row-major, `freqs1` outer).
    pub fn from_values(freqs1: Vec<f64>, freqs2: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_freqs(&freqs1)?;
        check_freqs(&freqs2)?;
        if values.len() != freqs1.len() * freqs2.len() {
            return Err(GegenError::InvalidParam {
                name: "values",
                value: values.len() as f64,
                range: "len(freqs1) * len(freqs2) entries",
            });
        }
        Ok(Self { freqs1, freqs2, values })
    }

    pub fn freqs1(&self) -> &[f64] {
        &self.freqs1
    }

    pub fn freqs2(&self) -> &[f64] {
        &self.freqs2
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, k1: usize, k2: usize) -> f64 {
        self.values[k1 * self.freqs2.len() + k2]
    }

    /// CSV with header `lambda1,lambda2,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lambda1,lambda2,value")?;
        for (k1, &l1) in self.freqs1.iter().enumerate() {
            for (k2, &l2) in self.freqs2.iter().enumerate() {
                writeln!(w, "{},{},{}", l1, l2, self.values[k1 * self.freqs2.len() + k2])?;
            }
        }
        Ok(())
    }
}

fn check_freqs(freqs: &[f64]) -> Result<()> {
    for &l in freqs {
        if !(-PI..=PI).contains(&l) {
            return Err(GegenError::InvalidParam {
                name: "frequency",
                value: l,
                range: "[-pi, pi]",
            });
        }
    }
    Ok(())
}

/// Complex accumulator matrices for the separable transform
/// `out[k][j] = Σ_t e^{−i λ_k c_t} x[t][j]` over a run of integer offsets.
fn axis_transform(
    freqs: &[f64],
    offsets: impl Iterator<Item = f64> + Clone,
    n_in: usize,
    n_cols: usize,
    x: &dyn Fn(usize, usize) -> (f64, f64),
) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); freqs.len() * n_cols];
    for (k, &lam) in freqs.iter().enumerate() {
        for (t, off) in offsets.clone().enumerate().take(n_in) {
            let (c, s) = ((lam * off).cos(), -(lam * off).sin());
            for j in 0..n_cols {
                let (xr, xi) = x(t, j);
                let o = &mut out[k * n_cols + j];
                o.0 += c * xr - s * xi;
                o.1 += c * xi + s * xr;
            }
        }
    }
    out
}

/// The periodogram `I_T` of the observations on the given frequency grid.
pub fn periodogram(field: &GridField, freqs1: &[f64], freqs2: &[f64]) -> Result<PeriodogramGrid> {
    check_freqs(freqs1)?;
    check_freqs(freqs2)?;
    let side = field.side();
    let t_size = field.size_t() as f64;
    // Stage 1: transform along t₁ → z[k1][t2] (complex).
    let z = axis_transform(freqs1, (0..side).map(|t| t as f64), side, side, &|t1, t2| {
        (field.get(t1, t2), 0.0)
    });
    // Stage 2: transform along t₂ → p[k1][k2].
    let n2 = freqs2.len();
    let norm = 1.0 / (2.0 * PI * t_size).powi(2);
    let mut values = vec![0.0; freqs1.len() * n2];
    for (k2, &lam) in freqs2.iter().enumerate() {
        let table: Vec<(f64, f64)> = (0..side)
            .map(|t| ((lam * t as f64).cos(), -(lam * t as f64).sin()))
            .collect();
        for k1 in 0..freqs1.len() {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t2, &(c, s)) in table.iter().enumerate() {
                let (zr, zi) = z[k1 * side + t2];
                re += c * zr - s * zi;
                im += c * zi + s * zr;
            }
            values[k1 * n2 + k2] = norm * (re * re + im * im);
        }
    }
    Ok(PeriodogramGrid { freqs1: freqs1.to_vec(), freqs2: freqs2.to_vec(), values })
}

/// Unbiased estimator of the covariance at one lag, `|j_i| ≤ T−1`.
pub fn sample_autocov(field: &GridField, lag: &Lag) -> Result<f64> {
    let t_size = field.size_t();
    let (a1, a2) = (lag.j1.unsigned_abs() as usize, lag.j2.unsigned_abs() as usize);
    if t_size < 1 || a1 > t_size - 1 || a2 > t_size - 1 {
        return Err(GegenError::LagOutOfRange { j1: lag.j1, j2: lag.j2, size_t: t_size });
    }
    let mut acc = 0.0;
    for k in 0..=(t_size - a1) {
        for l in 0..=(t_size - a2) {
            acc += field.get(k, l) * field.get(a1 + k, a2 + l);
        }
    }
    Ok(acc / (((t_size - a1) * (t_size - a2)) as f64))
}

/// All unbiased covariance estimates over lags `{1−T,…,T−1}²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagCovTable {
    size_t: usize,
    values: Vec<f64>,
}

impl LagCovTable {
    pub fn size_t(&self) -> usize {
        self.size_t
    }

    /// Number of lags per axis, `2T − 1`.
    pub fn side(&self) -> usize {
        2 * self.size_t - 1
    }

    pub fn get(&self, j1: i64, j2: i64) -> f64 {
        let side = self.side() as i64;
        let off = self.size_t as i64 - 1;
        self.values[((j1 + off) * side + (j2 + off)) as usize]
    }
}

/// Batched [`sample_autocov`] over the full lag range; `T ≥ 2`.
pub fn lag_cov_table(field: &GridField) -> Result<LagCovTable> {
    let t_size = field.size_t();
    if t_size < 2 {
        return Err(GegenError::InvalidParam {
            name: "T",
            value: t_size as f64,
            range: ">= 2",
        });
    }
    let side = 2 * t_size - 1;
    let mut values = vec![0.0; side * side];
    // The estimator depends on lags only through (|j₁|, |j₂|): fill the
    // nonnegative quadrant and mirror.
    for a1 in 0..t_size {
        for a2 in 0..t_size {
            let g = sample_autocov(field, &Lag::new(a1 as i64, a2 as i64))?;
            let off = t_size - 1;
            for (s1, s2) in [(1i64, 1i64), (1, -1), (-1, 1), (-1, -1)] {
                let j1 = (off as i64 + s1 * a1 as i64) as usize;
                let j2 = (off as i64 + s2 * a2 as i64) as usize;
                values[j1 * side + j2] = g;
            }
        }
    }
    Ok(LagCovTable { size_t: t_size, values })
}

/// Unbiased periodogram `I*_T` on the given frequency grid. Real-valued by
/// the sign symmetry of the lag table; with `clamp_at_zero` set, negative
/// values are replaced by 0.
pub fn unbiased_periodogram(
    field: &GridField,
    freqs1: &[f64],
    freqs2: &[f64],
    clamp_at_zero: bool,
) -> Result<PeriodogramGrid> {
    Ok(unbiased_periodogram_with_imag(field, freqs1, freqs2, clamp_at_zero)?.0)
}

/// Same as [`unbiased_periodogram`], also reporting the largest imaginary
/// magnitude discarded when taking the real value.
pub fn unbiased_periodogram_with_imag(
    field: &GridField,
    freqs1: &[f64],
    freqs2: &[f64],
    clamp_at_zero: bool,
) -> Result<(PeriodogramGrid, f64)> {
    check_freqs(freqs1)?;
    check_freqs(freqs2)?;
    let table = lag_cov_table(field)?;
    let side = table.side();
    let off = field.size_t() as i64 - 1;
    let offsets = (0..side).map(move |t| (t as i64 - off) as f64);
    let z = axis_transform(freqs1, offsets.clone(), side, side, &|t1, t2| {
        (table.get(t1 as i64 - off, t2 as i64 - off), 0.0)
    });
    let n2 = freqs2.len();
    let norm = 1.0 / (4.0 * PI * PI);
    let mut values = vec![0.0; freqs1.len() * n2];
    let mut max_imag: f64 = 0.0;
    for (k2, &lam) in freqs2.iter().enumerate() {
        let trig: Vec<(f64, f64)> = offsets
            .clone()
            .map(|t| ((lam * t).cos(), -(lam * t).sin()))
            .collect();
        for k1 in 0..freqs1.len() {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t2, &(c, s)) in trig.iter().enumerate() {
                let (zr, zi) = z[k1 * side + t2];
                re += c * zr - s * zi;
                im += c * zi + s * zr;
            }
            max_imag = max_imag.max((norm * im).abs());
            let mut v = norm * re;
            if clamp_at_zero && v < 0.0 {
                v = 0.0;
            }
            values[k1 * n2 + k2] = v;
        }
    }
    Ok((
        PeriodogramGrid { freqs1: freqs1.to_vec(), freqs2: freqs2.to_vec(), values },
        max_imag,
    ))
}
