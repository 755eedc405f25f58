//! Seeded replication studies: consistency of `θ̂_T` and `σ̂²_T` across grid
//! sizes, and asymptotic normality of `T(θ̂*_T − θ₀)`, plus a self-contained
//! multivariate normality test (Mardia's skewness and kurtosis).
//!
//! Replication `r` at grid size `T` simulates with
//! `derive_seed(base_seed, T, r)`, so a study is fully determined by its
//! configuration and independent of thread count. Failed replications are
//! recorded, never resampled.

use crate::asymptotics::{sandwich, SandwichCovariance};
use crate::contrast::{sigma2_of_theta, ContrastContext};
use crate::error::GegenError;
use crate::estimate::{mce, mce_adjusted, EstimationResult, OptimizerOptions};
use crate::model::LrdParams;
use crate::simulate::{derive_seed, simulate_field, SimConfig};
use crate::Result;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use std::io::Write;

/// Protocol of a replication study.
#[derive(Debug)]
pub struct StudyConfig {
    pub ctx: ContrastContext,
    pub theta0: LrdParams,
    pub t_values: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    /// Use the adjusted estimator (raw unbiased periodogram).
    pub adjusted: bool,
    /// ε grid for `P̂(|θ̂_T − θ₀| < ε)` (Euclidean distance).
    pub epsilons: Vec<f64>,
    /// ε grid for `P̂(|σ̂²_T − σ²(θ₀)| < ε)`; wider, matching the scale of σ².
    pub sigma_epsilons: Vec<f64>,
    pub n_trunc: usize,
    pub opts: OptimizerOptions,
}

impl StudyConfig {
    /// Study defaults: ε ∈ {0.025, 0.05, 0.1, 0.2} for θ, {5, 10, 20, 40}
    /// for σ̂², truncation order 40.
    pub fn new(
        ctx: ContrastContext,
        theta0: LrdParams,
        t_values: Vec<usize>,
        replications: usize,
        base_seed: u64,
        adjusted: bool,
    ) -> Result<Self> {
        if replications == 0 {
            return Err(GegenError::InvalidParam {
                name: "replications",
                value: 0.0,
                range: ">= 1",
            });
        }
        if t_values.is_empty() || t_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GegenError::InvalidParam {
                name: "t_values",
                value: f64::NAN,
                range: "nonempty, strictly ascending",
            });
        }
        Ok(Self {
            ctx,
            theta0,
            t_values,
            replications,
            base_seed,
            adjusted,
            epsilons: vec![0.025, 0.05, 0.1, 0.2],
            sigma_epsilons: vec![5.0, 10.0, 20.0, 40.0],
            n_trunc: 40,
            opts: OptimizerOptions::default(),
        })
    }
}

/// One replication's estimate, or the error that stopped it.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicationOutcome {
    pub rep: usize,
    pub seed: u64,
    pub result: Option<EstimationResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Quartiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

fn quartiles(mut xs: Vec<f64>) -> Quartiles {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| -> f64 {
        if xs.is_empty() {
            return f64::NAN;
        }
        let pos = p * (xs.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        xs[lo] + (xs[hi] - xs[lo]) * (pos - lo as f64)
    };
    Quartiles { q25: q(0.25), median: q(0.5), q75: q(0.75) }
}

/// Per-T slice of a consistency report.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyEntry {
    pub t_size: usize,
    pub outcomes: Vec<ReplicationOutcome>,
    /// Quartiles of the Euclidean error `|θ̂ − θ₀|`.
    pub theta_err: Quartiles,
    pub sigma2: Quartiles,
    /// `(ε, P̂(|θ̂_T − θ₀| < ε))` per configured ε.
    pub prob_theta: Vec<(f64, f64)>,
    /// `(ε, P̂(|σ̂²_T − σ²(θ₀)| < ε))` per configured ε.
    pub prob_sigma2: Vec<(f64, f64)>,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub theta0: LrdParams,
    /// σ²(θ₀) on the study grid, the reference for the σ̂² probabilities.
    pub sigma2_theta0: f64,
    pub adjusted: bool,
    pub entries: Vec<ConsistencyEntry>,
}

fn run_replication(cfg: &StudyConfig, t_size: usize, rep: usize) -> ReplicationOutcome {
    let seed = derive_seed(cfg.base_seed, t_size as u64, rep as u64);
    let model = cfg.ctx.model().with_lrd(cfg.theta0);
    let run = SimConfig { params: model, n_trunc: cfg.n_trunc, seed };
    let outcome = simulate_field(t_size, &run).and_then(|field| {
        if cfg.adjusted {
            mce_adjusted(&field, &cfg.ctx, &cfg.opts)
        } else {
            mce(&field, &cfg.ctx, &cfg.opts)
        }
    });
    match outcome {
        Ok(result) => ReplicationOutcome { rep, seed, result: Some(result), error: None },
        Err(e) => ReplicationOutcome { rep, seed, result: None, error: Some(e.to_string()) },
    }
}

fn summarize(cfg: &StudyConfig, t_size: usize, outcomes: Vec<ReplicationOutcome>) -> ConsistencyEntry {
    let sigma2_theta0 = sigma2_of_theta(&cfg.theta0, &cfg.ctx);
    let ok: Vec<&EstimationResult> = outcomes.iter().filter_map(|o| o.result.as_ref()).collect();
    let n = ok.len().max(1) as f64;
    let errs: Vec<f64> = ok.iter().map(|r| r.theta_hat.dist(&cfg.theta0)).collect();
    let sig: Vec<f64> = ok.iter().map(|r| r.sigma2_hat).collect();
    let prob_theta = cfg
        .epsilons
        .iter()
        .map(|&e| (e, errs.iter().filter(|&&x| x < e).count() as f64 / n))
        .collect();
    let prob_sigma2 = cfg
        .sigma_epsilons
        .iter()
        .map(|&e| {
            (e, sig.iter().filter(|&&x| (x - sigma2_theta0).abs() < e).count() as f64 / n)
        })
        .collect();
    ConsistencyEntry {
        t_size,
        failures: outcomes.len() - ok.len(),
        theta_err: quartiles(errs),
        sigma2: quartiles(sig),
        prob_theta,
        prob_sigma2,
        outcomes,
    }
}

/// Consistency study: estimates at every `(T, replication)` of the protocol.
pub fn run_consistency_study(cfg: &StudyConfig) -> Result<ConsistencyReport> {
    let entries = cfg
        .t_values
        .iter()
        .map(|&t_size| {
            let outcomes: Vec<ReplicationOutcome> = (0..cfg.replications)
                .into_par_iter()
                .map(|rep| run_replication(cfg, t_size, rep))
                .collect();
            summarize(cfg, t_size, outcomes)
        })
        .collect();
    Ok(ConsistencyReport {
        theta0: cfg.theta0,
        sigma2_theta0: sigma2_of_theta(&cfg.theta0, &cfg.ctx),
        adjusted: cfg.adjusted,
        entries,
    })
}

/// Mardia's multivariate skewness/kurtosis statistics and p-values.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MardiaTest {
    pub skewness_stat: f64,
    pub kurtosis_stat: f64,
    /// Upper-tail χ²₄ p-value of the skewness statistic.
    pub p_skew: f64,
    /// Two-sided normal p-value of the kurtosis statistic.
    pub p_kurt: f64,
}

/// Mardia's test for bivariate normality; needs at least 20 samples and a
/// nondegenerate sample covariance.
pub fn mardia_test(samples: &[[f64; 2]]) -> Result<MardiaTest> {
    let n = samples.len();
    if n < 20 {
        return Err(GegenError::InvalidSample(format!(
            "mardia test needs >= 20 samples, got {n}"
        )));
    }
    let nf = n as f64;
    let mut mean = [0.0; 2];
    for x in samples {
        mean[0] += x[0];
        mean[1] += x[1];
    }
    mean[0] /= nf;
    mean[1] /= nf;
    // MLE covariance (divisor n), as in the original statistics.
    let mut c = [[0.0; 2]; 2];
    for x in samples {
        let d = [x[0] - mean[0], x[1] - mean[1]];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] += d[i] * d[j] / nf;
            }
        }
    }
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let scale = c[0][0].abs().max(c[1][1].abs());
    if !(det.abs() > 1e-12 * scale * scale) {
        return Err(GegenError::InvalidSample(format!(
            "singular sample covariance (det = {det:e})"
        )));
    }
    let inv = [
        [c[1][1] / det, -c[0][1] / det],
        [-c[1][0] / det, c[0][0] / det],
    ];
    let maha = |x: &[f64; 2], y: &[f64; 2]| -> f64 {
        let dx = [x[0] - mean[0], x[1] - mean[1]];
        let dy = [y[0] - mean[0], y[1] - mean[1]];
        dx[0] * (inv[0][0] * dy[0] + inv[0][1] * dy[1])
            + dx[1] * (inv[1][0] * dy[0] + inv[1][1] * dy[1])
    };
    let mut b1 = 0.0;
    for x in samples {
        for y in samples {
            b1 += maha(x, y).powi(3);
        }
    }
    b1 /= nf * nf;
    let mut b2 = 0.0;
    for x in samples {
        b2 += maha(x, x).powi(2);
    }
    b2 /= nf;

    // dimension p = 2: skewness ~ χ² with p(p+1)(p+2)/6 = 4 dof,
    // kurtosis ~ N(p(p+2), 8p(p+2)/n) = N(8, 64/n).
    let skewness_stat = nf * b1 / 6.0;
    let kurtosis_stat = (b2 - 8.0) / (64.0 / nf).sqrt();
    let chi2 = ChiSquared::new(4.0).expect("valid dof");
    let p_skew = 1.0 - chi2.cdf(skewness_stat);
    let norm = Normal::new(0.0, 1.0).expect("valid normal");
    let p_kurt = 2.0 * norm.cdf(-kurtosis_stat.abs());
    Ok(MardiaTest { skewness_stat, kurtosis_stat, p_skew, p_kurt })
}

/// Blom plotting positions mapped through the normal quantile function.
fn normal_quantiles(n: usize) -> Vec<f64> {
    let norm = Normal::new(0.0, 1.0).expect("valid normal");
    (0..n)
        .map(|i| norm.inverse_cdf((i as f64 + 1.0 - 0.375) / (n as f64 + 0.25)))
        .collect()
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Normality study output: scaled deviations, Q-Q data per component, the
/// Mardia test, and the theoretical sandwich covariance at θ₀.
#[derive(Debug, Clone, Serialize)]
pub struct NormalityReport {
    pub t_size: usize,
    pub theta0: LrdParams,
    pub outcomes: Vec<ReplicationOutcome>,
    /// `T(θ̂* − θ₀)` per successful replication, in replication order.
    pub scaled: Vec<[f64; 2]>,
    /// Per component: `(normal_quantile, ordered_sample)` pairs.
    pub qq: [Vec<(f64, f64)>; 2],
    pub qq_corr: [f64; 2],
    pub mardia: MardiaTest,
    pub reference: SandwichCovariance,
    pub failures: usize,
}

/// Asymptotic-normality study at a single grid size; requires the adjusted
/// estimator.
pub fn run_normality_study(cfg: &StudyConfig) -> Result<NormalityReport> {
    if cfg.t_values.len() != 1 {
        return Err(GegenError::InvalidParam {
            name: "t_values",
            value: cfg.t_values.len() as f64,
            range: "exactly one T for a normality study",
        });
    }
    if !cfg.adjusted {
        return Err(GegenError::InvalidParam {
            name: "adjusted",
            value: 0.0,
            range: "normality study uses the adjusted estimator",
        });
    }
    let t_size = cfg.t_values[0];
    let outcomes: Vec<ReplicationOutcome> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(cfg, t_size, rep))
        .collect();
    let scaled: Vec<[f64; 2]> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref())
        .map(|r| {
            [
                t_size as f64 * (r.theta_hat.d1 - cfg.theta0.d1),
                t_size as f64 * (r.theta_hat.d2 - cfg.theta0.d2),
            ]
        })
        .collect();
    let mardia = mardia_test(&scaled)?;
    let mut qq: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
    let mut qq_corr = [0.0; 2];
    for comp in 0..2 {
        let mut xs: Vec<f64> = scaled.iter().map(|s| s[comp]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quants = normal_quantiles(xs.len());
        qq_corr[comp] = pearson(&quants, &xs);
        qq[comp] = quants.into_iter().zip(xs).collect();
    }
    let reference = sandwich(&cfg.theta0, &cfg.ctx)?;
    Ok(NormalityReport {
        t_size,
        theta0: cfg.theta0,
        failures: outcomes.len() - scaled.len(),
        outcomes,
        scaled,
        qq,
        qq_corr,
        mardia,
        reference,
    })
}

/// `estimates.csv`: `T,rep,d1_hat,d2_hat,sigma2_hat,converged` per outcome.
pub fn write_estimates_csv<W: Write>(report: &ConsistencyReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "T,rep,d1_hat,d2_hat,sigma2_hat,converged")?;
    for entry in &report.entries {
        for o in &entry.outcomes {
            match &o.result {
                Some(r) => writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    entry.t_size, o.rep, r.theta_hat.d1, r.theta_hat.d2, r.sigma2_hat, r.converged
                )?,
                None => writeln!(w, "{},{},,,,false", entry.t_size, o.rep)?,
            }
        }
    }
    Ok(())
}

/// `estimates.csv` for a normality study (single T).
pub fn write_normality_estimates_csv<W: Write>(
    report: &NormalityReport,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "T,rep,d1_hat,d2_hat,sigma2_hat,converged")?;
    for o in &report.outcomes {
        match &o.result {
            Some(r) => writeln!(
                w,
                "{},{},{},{},{},{}",
                report.t_size, o.rep, r.theta_hat.d1, r.theta_hat.d2, r.sigma2_hat, r.converged
            )?,
            None => writeln!(w, "{},{},,,,false", report.t_size, o.rep)?,
        }
    }
    Ok(())
}

/// `qq.csv`: `component,sample_quantile,normal_quantile` rows.
pub fn write_qq_csv<W: Write>(report: &NormalityReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "component,sample_quantile,normal_quantile")?;
    for (comp, data) in report.qq.iter().enumerate() {
        for (nq, sq) in data {
            writeln!(w, "{},{},{}", comp + 1, sq, nq)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contrast::{BaseWeight, WeightConfig};
    use crate::model::ModelParams;
    use approx::assert_relative_eq;

    fn study_ctx(m: usize) -> ContrastContext {
        ContrastContext::with_midpoint_grid(
            ModelParams::new(0.4, 0.3, 0.2, 0.3, 1.0).unwrap(),
            WeightConfig::new(2.0, 2.0, BaseWeight::Constant).unwrap(),
            m,
        )
        .unwrap()
    }

    fn theta0() -> LrdParams {
        LrdParams::new(0.2, 0.3).unwrap()
    }

    // Simple deterministic normal sampler for test fixtures.
    struct TestNormals(u64);
    impl TestNormals {
        fn next_unit(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
        fn next_pair(&mut self) -> [f64; 2] {
            let u1 = 1.0 - self.next_unit();
            let u2 = self.next_unit();
            let r = (-2.0 * u1.ln()).sqrt();
            [
                r * (2.0 * std::f64::consts::PI * u2).cos(),
                r * (2.0 * std::f64::consts::PI * u2).sin(),
            ]
        }
    }

    #[test]
    fn single_replication_matches_direct_call() {
        let cfg = StudyConfig::new(study_ctx(64), theta0(), vec![10], 1, 321, false).unwrap();
        let report = run_consistency_study(&cfg).unwrap();
        assert_eq!(report.entries.len(), 1);
        let outcome = &report.entries[0].outcomes[0];
        let direct = {
            let seed = derive_seed(321, 10, 0);
            let model = cfg.ctx.model().with_lrd(theta0());
            let field =
                simulate_field(10, &SimConfig { params: model, n_trunc: 40, seed }).unwrap();
            mce(&field, &cfg.ctx, &cfg.opts).unwrap()
        };
        let got = outcome.result.as_ref().unwrap();
        assert_eq!(got.theta_hat.d1.to_bits(), direct.theta_hat.d1.to_bits());
        assert_eq!(got.sigma2_hat.to_bits(), direct.sigma2_hat.to_bits());
    }

    #[test]
    fn study_is_deterministic() {
        let mk = || StudyConfig::new(study_ctx(64), theta0(), vec![8], 4, 77, false).unwrap();
        let a = serde_json::to_string(&run_consistency_study(&mk()).unwrap()).unwrap();
        let b = serde_json::to_string(&run_consistency_study(&mk()).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_rejects_bad_protocols() {
        assert!(StudyConfig::new(study_ctx(16), theta0(), vec![10], 0, 1, false).is_err());
        assert!(StudyConfig::new(study_ctx(16), theta0(), vec![], 5, 1, false).is_err());
        assert!(StudyConfig::new(study_ctx(16), theta0(), vec![20, 10], 5, 1, false).is_err());
    }

    #[test]
    fn normality_smoke_run() {
        let mut cfg = StudyConfig::new(study_ctx(64), theta0(), vec![10], 25, 5150, true).unwrap();
        cfg.n_trunc = 20;
        let report = run_normality_study(&cfg).unwrap();
        assert_eq!(report.scaled.len() + report.failures, 25);
        assert_eq!(report.qq[0].len(), report.scaled.len());
        assert!(report.qq_corr[0].is_finite());
        let mut csv = Vec::new();
        write_qq_csv(&report, &mut csv).unwrap();
        assert!(csv.starts_with(b"component,sample_quantile,normal_quantile"));
    }

    #[test]
    fn normality_requires_adjusted_and_single_t() {
        let cfg = StudyConfig::new(study_ctx(16), theta0(), vec![10], 25, 1, false).unwrap();
        assert!(run_normality_study(&cfg).is_err());
        let cfg = StudyConfig::new(study_ctx(16), theta0(), vec![10, 20], 25, 1, true).unwrap();
        assert!(run_normality_study(&cfg).is_err());
    }

    #[test]
    fn estimates_csv_has_expected_shape() {
        let cfg = StudyConfig::new(study_ctx(64), theta0(), vec![8], 3, 9, false).unwrap();
        let report = run_consistency_study(&cfg).unwrap();
        let mut csv = Vec::new();
        write_estimates_csv(&report, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 3);
        assert!(text.starts_with("T,rep,d1_hat,d2_hat,sigma2_hat,converged"));
    }

    #[test]
    fn mardia_rejects_small_or_degenerate_samples() {
        let few = vec![[0.0, 0.0]; 10];
        assert!(mardia_test(&few).is_err());
        let degenerate = vec![[1.0, 2.0]; 50];
        assert!(mardia_test(&degenerate).is_err());
    }

    #[test]
    fn mardia_calibration_on_normal_samples() {
        // 100 repeated trials of 5000 i.i.d. bivariate normals: both p-values
        // should exceed 0.01 in at least 95 trials.
        let mut pass = 0;
        for trial in 0..100u64 {
            let mut gen = TestNormals(0x853c49e6748fea9b ^ trial.wrapping_mul(0x9e3779b97f4a7c15));
            let samples: Vec<[f64; 2]> = (0..5000).map(|_| gen.next_pair()).collect();
            let t = mardia_test(&samples).unwrap();
            if t.p_skew > 0.01 && t.p_kurt > 0.01 {
                pass += 1;
            }
        }
        assert!(pass >= 95, "only {pass}/100 trials passed");
    }

    #[test]
    fn mardia_detects_skewed_samples() {
        // Componentwise exponential: heavily skewed.
        let mut gen = TestNormals(42);
        let samples: Vec<[f64; 2]> = (0..500)
            .map(|_| {
                [
                    -(1.0 - gen.next_unit()).ln(),
                    -(1.0 - gen.next_unit()).ln(),
                ]
            })
            .collect();
        let t = mardia_test(&samples).unwrap();
        assert!(t.p_skew < 0.01, "p_skew = {}", t.p_skew);
    }

    #[test]
    fn mardia_is_affine_invariant() {
        let mut gen = TestNormals(7);
        let samples: Vec<[f64; 2]> = (0..400).map(|_| gen.next_pair()).collect();
        let transformed: Vec<[f64; 2]> = samples
            .iter()
            .map(|x| [2.0 * x[0] + 1.0 * x[1] + 5.0, 0.5 * x[0] + 3.0 * x[1] - 2.0])
            .collect();
        let a = mardia_test(&samples).unwrap();
        let b = mardia_test(&transformed).unwrap();
        assert_relative_eq!(a.skewness_stat, b.skewness_stat, max_relative = 1e-9);
        assert_relative_eq!(a.kurtosis_stat, b.kurtosis_stat, max_relative = 1e-9);
    }

    #[test]
    fn mardia_chi2_pvalue_matches_closed_form() {
        // For 4 dof the upper tail is e^{−x/2}(1 + x/2).
        let mut gen = TestNormals(11);
        let samples: Vec<[f64; 2]> = (0..300).map(|_| gen.next_pair()).collect();
        let t = mardia_test(&samples).unwrap();
        let x = t.skewness_stat;
        let closed = (-x / 2.0).exp() * (1.0 + x / 2.0);
        assert_relative_eq!(t.p_skew, closed, max_relative = 1e-8);
    }

    #[test]
    fn aggregates_recomputable_from_outcomes() {
        let cfg = StudyConfig::new(study_ctx(64), theta0(), vec![10], 6, 12, false).unwrap();
        let report = run_consistency_study(&cfg).unwrap();
        let entry = &report.entries[0];
        let eps = cfg.epsilons[2];
        let recomputed = entry
            .outcomes
            .iter()
            .filter_map(|o| o.result.as_ref())
            .filter(|r| r.theta_hat.dist(&theta0()) < eps)
            .count() as f64
            / entry.outcomes.iter().filter(|o| o.result.is_some()).count() as f64;
        let reported = entry.prob_theta.iter().find(|(e, _)| *e == eps).unwrap().1;
        assert_eq!(recomputed, reported);
    }
}
