//! The spectral-domain contrast machinery: the weight function `w`, the
//! factorization `f(λ,θ) = σ²(θ)Ψ(λ,θ)`, the theoretical contrast function
//! `K`, and the empirical functionals `Û_T`, `σ̂²_T`.
//!
//! ```text
//! w(λ)    = |λ₁² − ν₁²|^{a₁} |λ₂² − ν₂²|^{a₂} w₀(λ),   a_i > 1
//! σ²(θ)   = ∫ f(λ,θ) w(λ) dλ
//! Ψ(λ,θ)  = f(λ,θ) / σ²(θ),       ∫ Ψ w dλ = 1
//! K(θ₀,θ) = ∫ f(λ,θ₀) w(λ) log(Ψ(λ,θ₀)/Ψ(λ,θ)) dλ ≥ 0
//! Û_T(θ)  = −∫ I_T(λ) w(λ) log Ψ(λ,θ) dλ
//! σ̂²_T    = ∫ I_T(λ) w(λ) dλ
//! ```
//!
//! Every integral is evaluated on one shared [`QuadratureGrid`], so the
//! normalization `∫Ψw dλ = 1` and the vanishing of `∫∇Ψ w dλ` hold exactly
//! at the node level, not just in the limit. Integrand products are formed
//! as `(I·w·ω)` first and multiplied by `log Ψ` last, so weight zeros mask
//! the log divergence at the poles.

use crate::error::GegenError;
use crate::model::{log_pole_term, Frequency, LrdParams, ModelParams};
use crate::periodogram::PeriodogramGrid;
use crate::quad::{pairwise_sum_by, QuadratureGrid};
use crate::Result;

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

/// Registry of admissible base factors `w₀`: positive with continuous second
/// derivatives on `[−π,π]²`, kept closed so those requirements hold by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseWeight {
    /// `w₀ ≡ 1`.
    #[default]
    Constant,
    /// `w₀(λ) = (1 + cos(λ₁)/2)(1 + cos(λ₂)/2)`, positive and smooth.
    CosineBump,
}

impl BaseWeight {
    pub fn eval(&self, l1: f64, l2: f64) -> f64 {
        match self {
            BaseWeight::Constant => 1.0,
            BaseWeight::CosineBump => (1.0 + 0.5 * l1.cos()) * (1.0 + 0.5 * l2.cos()),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "constant" => Ok(BaseWeight::Constant),
            "cosine-bump" => Ok(BaseWeight::CosineBump),
            _ => Err(GegenError::InvalidParam {
                name: "w0",
                value: f64::NAN,
                range: "one of: constant, cosine-bump",
            }),
        }
    }
}

/// Exponents and base factor of the contrast weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub a1: f64,
    pub a2: f64,
    pub w0: BaseWeight,
}

impl WeightConfig {
    pub fn new(a1: f64, a2: f64, w0: BaseWeight) -> Result<Self> {
        for (name, a) in [("a1", a1), ("a2", a2)] {
            if !(a > 1.0) {
                return Err(GegenError::InvalidParam { name, value: a, range: "(1, inf)" });
            }
        }
        Ok(Self { a1, a2, w0 })
    }
}

/// Fixed nuisance quantities of one estimation problem: pole locations and
/// noise variance (through [`ModelParams`]), the weight, and the shared
/// quadrature grid, plus per-node precomputations.
///
/// The `d` components of `model` are carried along (e.g. as the generating
/// values of a study) but play no role in θ-parameterized evaluations.
#[derive(Debug)]
pub struct ContrastContext {
    model: ModelParams,
    weight: WeightConfig,
    quad: QuadratureGrid,
    /// `log|2cos λ − 2u_i|` per axis node.
    log1: Vec<f64>,
    log2: Vec<f64>,
    /// `w(λ_k)` per 2D node, row-major.
    w_vals: Vec<f64>,
    /// `w(λ_k)·ω_k` per 2D node.
    wq: Vec<f64>,
    /// σ²(θ) memo keyed on the bit patterns of (d₁, d₂).
    sigma2_cache: Mutex<HashMap<(u64, u64), f64>>,
}

impl ContrastContext {
    pub fn new(model: ModelParams, weight: WeightConfig, quad: QuadratureGrid) -> Self {
        let (nu1, nu2) = model.pole_freqs();
        let log1: Vec<f64> = quad.freqs1().iter().map(|&l| log_pole_term(l, model.u1)).collect();
        let log2: Vec<f64> = quad.freqs2().iter().map(|&l| log_pole_term(l, model.u2)).collect();
        let mut w_vals = Vec::with_capacity(quad.node_count());
        let mut wq = Vec::with_capacity(quad.node_count());
        for (i, &l1) in quad.freqs1().iter().enumerate() {
            let wa1 = (l1 * l1 - nu1 * nu1).abs().powf(weight.a1);
            for (j, &l2) in quad.freqs2().iter().enumerate() {
                let w = wa1
                    * (l2 * l2 - nu2 * nu2).abs().powf(weight.a2)
                    * weight.w0.eval(l1, l2);
                w_vals.push(w);
                wq.push(w * quad.axis_weights1()[i] * quad.axis_weights2()[j]);
            }
        }
        Self {
            model,
            weight,
            quad,
            log1,
            log2,
            w_vals,
            wq,
            sigma2_cache: Mutex::new(HashMap::new()),
        }
    }

    /// Default contrast grid: midpoints of a uniform `m × m` partition.
    pub fn with_midpoint_grid(model: ModelParams, weight: WeightConfig, m: usize) -> Result<Self> {
        let quad = QuadratureGrid::midpoint(m, model.pole_freqs())?;
        Ok(Self::new(model, weight, quad))
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn weight_config(&self) -> &WeightConfig {
        &self.weight
    }

    pub fn quad(&self) -> &QuadratureGrid {
        &self.quad
    }

    pub(crate) fn log1(&self) -> &[f64] {
        &self.log1
    }

    pub(crate) fn log2(&self) -> &[f64] {
        &self.log2
    }

    pub(crate) fn w_vals(&self) -> &[f64] {
        &self.w_vals
    }

    /// `log(σ²_ε / 4π²)`, the θ-free part of `log f`.
    pub(crate) fn log_density_const(&self) -> f64 {
        (self.model.sigma2_eps / (4.0 * PI * PI)).ln()
    }

    /// Per-axis spectral factors `exp(−2 d_i L_i)` at the grid nodes; the
    /// density at node `(i, j)` is `c · e1[i] · e2[j]`.
    pub(crate) fn axis_density_factors(&self, theta: &LrdParams) -> (Vec<f64>, Vec<f64>) {
        let e1 = self.log1.iter().map(|&l| (-2.0 * theta.d1 * l).exp()).collect();
        let e2 = self.log2.iter().map(|&l| (-2.0 * theta.d2 * l).exp()).collect();
        (e1, e2)
    }

    /// Σ over nodes of `w·ω·f(λ,θ)·g(i, j)` with `g` given per node index.
    pub(crate) fn weighted_density_sum<G: Fn(usize, usize) -> f64>(
        &self,
        theta: &LrdParams,
        g: G,
    ) -> f64 {
        let (e1, e2) = self.axis_density_factors(theta);
        let c = self.model.sigma2_eps / (4.0 * PI * PI);
        let n2 = self.quad.n2();
        pairwise_sum_by(self.wq.len(), &mut |k| {
            let (i, j) = (k / n2, k % n2);
            self.wq[k] * c * e1[i] * e2[j] * g(i, j)
        })
    }
}

/// The contrast weight `w(λ)`.
pub fn weight(lambda: &Frequency, ctx: &ContrastContext) -> f64 {
    let (nu1, nu2) = ctx.model.pole_freqs();
    (lambda.lambda1 * lambda.lambda1 - nu1 * nu1).abs().powf(ctx.weight.a1)
        * (lambda.lambda2 * lambda.lambda2 - nu2 * nu2).abs().powf(ctx.weight.a2)
        * ctx.weight.w0.eval(lambda.lambda1, lambda.lambda2)
}

/// `σ²(θ) = ∫ f(λ,θ) w(λ) dλ` on the shared grid, memoized per θ.
pub fn sigma2_of_theta(theta: &LrdParams, ctx: &ContrastContext) -> f64 {
    let key = (theta.d1.to_bits(), theta.d2.to_bits());
    if let Some(&v) = ctx.sigma2_cache.lock().unwrap().get(&key) {
        return v;
    }
    let v = ctx.weighted_density_sum(theta, |_, _| 1.0);
    ctx.sigma2_cache.lock().unwrap().insert(key, v);
    v
}

/// Gradient of `σ²(θ)`: `∂_i σ² = −2 ∫ L_i w f dλ`.
pub fn sigma2_grad(theta: &LrdParams, ctx: &ContrastContext) -> [f64; 2] {
    [
        -2.0 * ctx.weighted_density_sum(theta, |i, _| ctx.log1[i]),
        -2.0 * ctx.weighted_density_sum(theta, |_, j| ctx.log2[j]),
    ]
}

/// Hessian of `σ²(θ)`: `∂²_{ij} σ² = 4 ∫ L_i L_j w f dλ`.
pub fn sigma2_hess(theta: &LrdParams, ctx: &ContrastContext) -> [[f64; 2]; 2] {
    let h11 = 4.0 * ctx.weighted_density_sum(theta, |i, _| ctx.log1[i] * ctx.log1[i]);
    let h12 = 4.0 * ctx.weighted_density_sum(theta, |i, j| ctx.log1[i] * ctx.log2[j]);
    let h22 = 4.0 * ctx.weighted_density_sum(theta, |_, j| ctx.log2[j] * ctx.log2[j]);
    [[h11, h12], [h12, h22]]
}

/// `Ψ(λ, θ) = f(λ, θ)/σ²(θ)`.
pub fn psi(lambda: &Frequency, theta: &LrdParams, ctx: &ContrastContext) -> Result<f64> {
    let full = ctx.model.with_lrd(*theta);
    let f = crate::model::spectral_density(lambda, &full)?;
    Ok(f / sigma2_of_theta(theta, ctx))
}

/// Theoretical contrast `K(θ₀, θ) = ∫ f(λ,θ₀) w log(Ψ(λ,θ₀)/Ψ(λ,θ)) dλ`;
/// nonnegative with its unique zero at `θ = θ₀`.
pub fn contrast_k(theta0: &LrdParams, theta: &LrdParams, ctx: &ContrastContext) -> f64 {
    let s0 = sigma2_of_theta(theta0, ctx);
    let s = sigma2_of_theta(theta, ctx);
    let dd1 = theta0.d1 - theta.d1;
    let dd2 = theta0.d2 - theta.d2;
    // log(Ψ₀/Ψ) = −2Δd₁L₁ − 2Δd₂L₂ + log σ²(θ) − log σ²(θ₀)
    let log_ratio_const = s.ln() - s0.ln();
    ctx.weighted_density_sum(theta0, |i, j| {
        -2.0 * dd1 * ctx.log1[i] - 2.0 * dd2 * ctx.log2[j] + log_ratio_const
    })
}

fn check_grid(pgram: &PeriodogramGrid, ctx: &ContrastContext) -> Result<()> {
    if !ctx.quad.same_freqs(pgram.freqs1(), pgram.freqs2()) {
        return Err(GegenError::GridMismatch);
    }
    Ok(())
}

/// Empirical contrast `Û_T(θ) = −∫ I(λ) w(λ) log Ψ(λ,θ) dλ`, with `I` either
/// the periodogram or the unbiased periodogram on the context grid.
pub fn empirical_contrast(
    theta: &LrdParams,
    pgram: &PeriodogramGrid,
    ctx: &ContrastContext,
) -> Result<f64> {
    check_grid(pgram, ctx)?;
    let log_c = ctx.log_density_const();
    let log_s2 = sigma2_of_theta(theta, ctx).ln();
    let vals = pgram.values();
    let n2 = ctx.quad.n2();
    Ok(-pairwise_sum_by(vals.len(), &mut |k| {
        let iwq = vals[k] * ctx.wq[k];
        if iwq == 0.0 {
            0.0
        } else {
            let (i, j) = (k / n2, k % n2);
            iwq * (log_c - 2.0 * theta.d1 * ctx.log1[i] - 2.0 * theta.d2 * ctx.log2[j] - log_s2)
        }
    }))
}

/// Variance functional `σ̂² = ∫ I(λ) w(λ) dλ` on the context grid.
pub fn sigma2_hat(pgram: &PeriodogramGrid, ctx: &ContrastContext) -> Result<f64> {
    check_grid(pgram, ctx)?;
    let vals = pgram.values();
    Ok(pairwise_sum_by(vals.len(), &mut |k| vals[k] * ctx.wq[k]))
}
