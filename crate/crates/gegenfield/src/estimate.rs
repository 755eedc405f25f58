//! Minimum contrast estimation: minimize the empirical contrast over the
//! clipped box `[δ, 1/2 − δ]²` and report `θ̂_T` with `σ̂²_T`.
//!
//! The search is a coarse grid followed by a Nelder–Mead simplex whose
//! probes are clipped to the box. The box is closed (the parameter space is
//! open), so results landing near the clip margin carry `boundary_flag`
//! instead of being silently accepted as interior optima.

use crate::contrast::{empirical_contrast, sigma2_hat, ContrastContext};
use crate::error::GegenError;
use crate::model::LrdParams;
use crate::periodogram::{periodogram, unbiased_periodogram, PeriodogramGrid};
use crate::simulate::GridField;
use crate::Result;

use serde::{Deserialize, Serialize};

/// Search controls for [`minimize_contrast`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptimizerOptions {
    /// Points per axis of the initial grid over the clipped box.
    pub coarse_grid_n: usize,
    pub tol_x: f64,
    pub tol_f: f64,
    pub max_evals: usize,
    /// Clip margin δ; the search box is `[δ, 1/2 − δ]²`.
    pub clip_margin: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            coarse_grid_n: 21,
            tol_x: 1e-5,
            tol_f: 1e-8,
            max_evals: 2000,
            clip_margin: 1e-3,
        }
    }
}

impl OptimizerOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol_x > 0.0) || !(self.tol_f > 0.0) {
            return Err(GegenError::InvalidParam {
                name: "tol_x/tol_f",
                value: self.tol_x.min(self.tol_f),
                range: "(0, inf)",
            });
        }
        if !(self.clip_margin > 0.0 && self.clip_margin < 0.25) {
            return Err(GegenError::InvalidParam {
                name: "clip_margin",
                value: self.clip_margin,
                range: "(0, 1/4)",
            });
        }
        if self.coarse_grid_n < 2 {
            return Err(GegenError::InvalidParam {
                name: "coarse_grid_n",
                value: self.coarse_grid_n as f64,
                range: ">= 2",
            });
        }
        Ok(())
    }
}

/// Outcome of one estimation run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EstimationResult {
    pub theta_hat: LrdParams,
    /// `σ̂²` of the periodogram used; NaN when produced by the bare
    /// optimizer (no data attached).
    pub sigma2_hat: f64,
    pub objective_value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Set when `theta_hat` lies within `2δ` of the clipped box edge.
    pub boundary_flag: bool,
}

fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Minimize a real objective over the clipped box by coarse grid plus
/// Nelder–Mead refinement. Non-finite probes are discarded (counted, never
/// selected); an everywhere-non-finite objective is an error.
pub fn minimize_contrast<F: Fn(&LrdParams) -> f64>(
    objective: F,
    opts: &OptimizerOptions,
) -> Result<EstimationResult> {
    opts.validate()?;
    let lo = opts.clip_margin;
    let hi = 0.5 - opts.clip_margin;
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: [f64; 2]| -> f64 {
        evals.set(evals.get() + 1);
        let v = objective(&LrdParams { d1: x[0], d2: x[1] });
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    // Stage 1: coarse grid.
    let n = opts.coarse_grid_n;
    let mut best = ([lo, lo], f64::INFINITY);
    for i in 0..n {
        for j in 0..n {
            let x = [
                lo + (hi - lo) * i as f64 / (n - 1) as f64,
                lo + (hi - lo) * j as f64 / (n - 1) as f64,
            ];
            let v = eval(x);
            if v < best.1 {
                best = (x, v);
            }
        }
    }
    if !best.1.is_finite() {
        return Err(GegenError::ObjectiveNotFinite);
    }

    // Stage 2: Nelder–Mead from the best grid point, probes clipped.
    let step = ((hi - lo) / (n - 1) as f64).max(1e-3);
    let mk = |x: [f64; 2]| [clip(x[0], lo, hi), clip(x[1], lo, hi)];
    let mut simplex: Vec<([f64; 2], f64)> = vec![(best.0, best.1)];
    for dim in 0..2 {
        let mut x = best.0;
        // step away from the nearer box edge
        x[dim] = if x[dim] + step <= hi { x[dim] + step } else { x[dim] - step };
        let x = mk(x);
        let v = eval(x);
        simplex.push((x, v));
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while evals.get() < opts.max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let diam = simplex[1..]
            .iter()
            .map(|(x, _)| {
                ((x[0] - simplex[0].0[0]).powi(2) + (x[1] - simplex[0].0[1]).powi(2)).sqrt()
            })
            .fold(0.0f64, f64::max);
        let spread = simplex[2].1 - simplex[0].1;
        if diam < opts.tol_x && spread.abs() < opts.tol_f {
            converged = true;
            break;
        }
        let centroid = [
            0.5 * (simplex[0].0[0] + simplex[1].0[0]),
            0.5 * (simplex[0].0[1] + simplex[1].0[1]),
        ];
        let worst = simplex[2];
        let refl = mk([
            centroid[0] + alpha * (centroid[0] - worst.0[0]),
            centroid[1] + alpha * (centroid[1] - worst.0[1]),
        ]);
        let f_refl = eval(refl);
        if f_refl < simplex[0].1 {
            let exp = mk([
                centroid[0] + gamma * (refl[0] - centroid[0]),
                centroid[1] + gamma * (refl[1] - centroid[1]),
            ]);
            let f_exp = eval(exp);
            simplex[2] = if f_exp < f_refl { (exp, f_exp) } else { (refl, f_refl) };
        } else if f_refl < simplex[1].1 {
            simplex[2] = (refl, f_refl);
        } else {
            let contr = mk([
                centroid[0] + rho * (worst.0[0] - centroid[0]),
                centroid[1] + rho * (worst.0[1] - centroid[1]),
            ]);
            let f_contr = eval(contr);
            if f_contr < worst.1 {
                simplex[2] = (contr, f_contr);
            } else {
                for k in 1..3 {
                    let shrunk = mk([
                        simplex[0].0[0] + sigma * (simplex[k].0[0] - simplex[0].0[0]),
                        simplex[0].0[1] + sigma * (simplex[k].0[1] - simplex[0].0[1]),
                    ]);
                    let f_shrunk = eval(shrunk);
                    simplex[k] = (shrunk, f_shrunk);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let (x_best, f_best) = simplex[0];
    if !f_best.is_finite() {
        return Err(GegenError::ObjectiveNotFinite);
    }
    let margin = 2.0 * opts.clip_margin;
    let boundary = x_best
        .iter()
        .any(|&c| (c - lo).abs() < margin || (hi - c).abs() < margin);
    Ok(EstimationResult {
        theta_hat: LrdParams { d1: x_best[0], d2: x_best[1] },
        sigma2_hat: f64::NAN,
        objective_value: f_best,
        evaluations: evals.get(),
        converged,
        boundary_flag: boundary,
    })
}

fn estimate_from_pgram(
    pgram: &PeriodogramGrid,
    ctx: &ContrastContext,
    opts: &OptimizerOptions,
) -> Result<EstimationResult> {
    let s2 = sigma2_hat(pgram, ctx)?;
    if !(s2 > 0.0) {
        return Err(GegenError::DegenerateObjective(format!(
            "weighted periodogram mass is {s2}; the contrast carries no information about θ"
        )));
    }
    let mut result = minimize_contrast(
        |theta| empirical_contrast(theta, pgram, ctx).unwrap_or(f64::INFINITY),
        opts,
    )?;
    result.sigma2_hat = s2;
    Ok(result)
}

/// Minimum contrast estimator from the periodogram `I_T`.
pub fn mce(
    field: &GridField,
    ctx: &ContrastContext,
    opts: &OptimizerOptions,
) -> Result<EstimationResult> {
    if field.size_t() < 2 {
        return Err(GegenError::InvalidParam {
            name: "T",
            value: field.size_t() as f64,
            range: ">= 2",
        });
    }
    let pgram = periodogram(field, ctx.quad().freqs1(), ctx.quad().freqs2())?;
    estimate_from_pgram(&pgram, ctx, opts)
}

/// Adjusted minimum contrast estimator from the unbiased periodogram `I*_T`.
///
/// `I*_T` is pointwise noise-dominated at desk-scale `T` (the unbiased lag
/// estimates near the corner lags average only a handful of products), so
/// zero-clamping its negative values rectifies that noise into a large
/// white-noise floor and biases the estimator toward the box edges; the raw
/// `I*_T` enters the contrast integrals here, where the smooth weight kernel
/// averages the noise out. The clamped variant remains available through
/// [`mce_adjusted_with`].
pub fn mce_adjusted(
    field: &GridField,
    ctx: &ContrastContext,
    opts: &OptimizerOptions,
) -> Result<EstimationResult> {
    mce_adjusted_with(field, ctx, opts, false)
}

/// Adjusted estimator with explicit control of the `I*_T` zero-clamp.
pub fn mce_adjusted_with(
    field: &GridField,
    ctx: &ContrastContext,
    opts: &OptimizerOptions,
    clamp_at_zero: bool,
) -> Result<EstimationResult> {
    if field.size_t() < 2 {
        return Err(GegenError::InvalidParam {
            name: "T",
            value: field.size_t() as f64,
            range: ">= 2",
        });
    }
    let pgram =
        unbiased_periodogram(field, ctx.quad().freqs1(), ctx.quad().freqs2(), clamp_at_zero)?;
    estimate_from_pgram(&pgram, ctx, opts)
}
