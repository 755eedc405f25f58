//! Product quadrature grids over `[−π, π]²` and deterministic summation.
//!
//! Two constructions are provided: a uniform midpoint rule (the shared grid
//! backing all contrast integrals, so that discrete identities such as
//! `∫Ψw dλ = 1` hold exactly at the node level) and a pole-graded midpoint
//! rule that refines geometrically toward the spectral singularities at
//! `λ = ±ν_i` for autocovariance inversion.
//!
//! All reductions over nodes use pairwise summation in a fixed order, so
//! results do not depend on thread count or evaluation order elsewhere.

use crate::error::GegenError;
use crate::Result;

use std::f64::consts::PI;

/// Minimum distance kept between any axis node and a pole frequency.
const POLE_GAP: f64 = 1e-9;

/// Pairwise (cascade) summation of `f(0) + f(1) + … + f(n−1)`.
///
/// Deterministic for a given `n` and `f`; error grows like `O(log n)` in the
/// number of roundings instead of `O(n)` for naive accumulation.
pub fn pairwise_sum_by<F: FnMut(usize) -> f64>(n: usize, f: &mut F) -> f64 {
    fn rec<F: FnMut(usize) -> f64>(lo: usize, hi: usize, f: &mut F) -> f64 {
        if hi - lo <= 64 {
            let mut acc = 0.0;
            for k in lo..hi {
                acc += f(k);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, f) + rec(mid, hi, f)
        }
    }
    if n == 0 {
        0.0
    } else {
        rec(0, n, f)
    }
}

/// Pairwise sum of a slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_sum_by(xs.len(), &mut |k| xs[k])
}

/// Tensor-product quadrature over `[−π, π]²`: per-axis nodes and weights,
/// no node at a pole frequency, total weight `4π²`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    freqs1: Vec<f64>,
    w1: Vec<f64>,
    freqs2: Vec<f64>,
    w2: Vec<f64>,
}

impl QuadratureGrid {
    /// Midpoints of a uniform `m × m` partition of `[−π, π]²`, with any node
    /// within [`POLE_GAP`] of `±ν_i` shifted away by that amount.
    pub fn midpoint(m: usize, poles: (f64, f64)) -> Result<Self> {
        if m == 0 {
            return Err(GegenError::InvalidParam {
                name: "quad_nodes",
                value: 0.0,
                range: "positive",
            });
        }
        let (f1, w1) = axis_midpoint(m, poles.0);
        let (f2, w2) = axis_midpoint(m, poles.1);
        Ok(Self { freqs1: f1, w1, freqs2: f2, w2 })
    }

    /// Midpoint rule with geometric refinement toward `±ν_i` on each axis;
    /// `n` is the approximate node count per axis. Intended for integrands
    /// with integrable pole singularities (autocovariance inversion).
    ///
    /// Accuracy degrades as `d → 1/2`; pass a larger `n` there.
    pub fn graded(n: usize, poles: (f64, f64)) -> Result<Self> {
        if n < 64 {
            return Err(GegenError::InvalidParam {
                name: "quad_nodes",
                value: n as f64,
                range: ">= 64 per axis",
            });
        }
        let (f1, w1) = axis_graded(n, poles.0);
        let (f2, w2) = axis_graded(n, poles.1);
        Ok(Self { freqs1: f1, w1, freqs2: f2, w2 })
    }

    pub fn freqs1(&self) -> &[f64] {
        &self.freqs1
    }

    pub fn freqs2(&self) -> &[f64] {
        &self.freqs2
    }

    pub fn axis_weights1(&self) -> &[f64] {
        &self.w1
    }

    pub fn axis_weights2(&self) -> &[f64] {
        &self.w2
    }

    pub fn n1(&self) -> usize {
        self.freqs1.len()
    }

    pub fn n2(&self) -> usize {
        self.freqs2.len()
    }

    pub fn node_count(&self) -> usize {
        self.n1() * self.n2()
    }

    /// Nodes as `((λ₁, λ₂), weight)` in row-major axis-1-outer order.
    pub fn nodes(&self) -> impl Iterator<Item = ((f64, f64), f64)> + '_ {
        self.freqs1.iter().zip(&self.w1).flat_map(move |(&x1, &v1)| {
            self.freqs2
                .iter()
                .zip(&self.w2)
                .map(move |(&x2, &v2)| ((x1, x2), v1 * v2))
        })
    }

    /// `∫∫ f(λ₁, λ₂) dλ` via the tensor rule with pairwise reduction.
    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        let n2 = self.n2();
        pairwise_sum_by(self.node_count(), &mut |k| {
            let (i, j) = (k / n2, k % n2);
            self.w1[i] * self.w2[j] * f(self.freqs1[i], self.freqs2[j])
        })
    }

    pub fn weight_total(&self) -> f64 {
        pairwise_sum(&self.w1) * pairwise_sum(&self.w2)
    }

    /// Smallest distance of any axis node to the corresponding axis poles.
    pub fn min_pole_gap(&self, poles: (f64, f64)) -> f64 {
        let gap = |fs: &[f64], p: f64| {
            fs.iter()
                .map(|&x| (x - p).abs().min((x + p).abs()))
                .fold(f64::INFINITY, f64::min)
        };
        gap(&self.freqs1, poles.0).min(gap(&self.freqs2, poles.1))
    }

    /// Grids compare equal when their axis nodes are bitwise identical.
    pub fn same_freqs(&self, freqs1: &[f64], freqs2: &[f64]) -> bool {
        self.freqs1 == freqs1 && self.freqs2 == freqs2
    }
}

fn shift_off_pole(x: f64, pole: f64) -> f64 {
    for p in [-pole, pole] {
        if (x - p).abs() < POLE_GAP {
            return p + POLE_GAP;
        }
    }
    x
}

fn axis_midpoint(m: usize, pole: f64) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * PI / m as f64;
    let freqs = (0..m)
        .map(|k| shift_off_pole(-PI + (k as f64 + 0.5) * h, pole))
        .collect();
    (freqs, vec![h; m])
}

/// Graded axis rule: the positive half `[0, π]` is split at the pole `ν`;
/// each sub-panel gets a uniform bulk away from `ν` plus geometrically
/// shrinking midpoint cells toward it. The half is then mirrored so the rule
/// is exactly symmetric about 0.
fn axis_graded(n: usize, pole: f64) -> (Vec<f64>, Vec<f64>) {
    let half = n / 2;
    // Per half-axis: two panels ([0, ν] and [ν, π]), each singular at ν.
    // Half the panel budget goes to the geometric cells (accuracy there
    // scales like 1/m_geo² per cell), half to the uniform bulk.
    let per_panel = half / 2;
    let levels = (per_panel / 32).clamp(24, 64);
    let m_geo = (per_panel / (2 * levels)).max(4);
    let mut xs = Vec::with_capacity(n + 64);
    let mut ws = Vec::with_capacity(n + 64);

    let mut panel = |a: f64, b: f64, sing_high: bool| {
        // `sing_high`: singularity at `b`, else at `a`. Geometric cells take
        // the 20% of the panel nearest the singularity; the rest is uniform.
        let len = b - a;
        let geo_len = 0.2 * len;
        let n_uni = per_panel.saturating_sub(levels * m_geo).max(16);
        debug_assert!(n_uni >= 16);
        let (ulo, uhi) = if sing_high { (a, b - geo_len) } else { (a + geo_len, b) };
        let h = (uhi - ulo) / n_uni as f64;
        for k in 0..n_uni {
            xs.push(ulo + (k as f64 + 0.5) * h);
            ws.push(h);
        }
        // Geometric cells, innermost sliver included as a final midpoint cell.
        let s = if sing_high { b } else { a };
        let mut outer = geo_len;
        for lev in 0..levels {
            let inner = if lev + 1 == levels { 0.0 } else { outer * 0.5 };
            let width = outer - inner;
            let hc = width / m_geo as f64;
            for k in 0..m_geo {
                let off = inner + (k as f64 + 0.5) * hc;
                xs.push(if sing_high { s - off } else { s + off });
                ws.push(hc);
            }
            outer = inner;
        }
    };

    panel(0.0, pole, true);
    panel(pole, PI, false);

    // Mirror to the negative half.
    let mut freqs: Vec<f64> = xs.iter().map(|&x| -x).chain(xs.iter().copied()).collect();
    let weights: Vec<f64> = ws.iter().copied().chain(ws.iter().copied()).collect();
    for x in &mut freqs {
        *x = shift_off_pole(*x, pole);
    }
    (freqs, weights)
}
