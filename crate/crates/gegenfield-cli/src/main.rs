//! Command-line interface: simulate Gegenbauer fields, compute spectra,
//! estimate long-memory parameters, evaluate asymptotic covariances, and run
//! replication studies, all driven by one TOML config per run.
//!
//! Exit codes: 0 success, 1 input error, 2 statistical warning (estimate did
//! not converge / boundary hit / failed replications; results still written).

mod config;

use clap::{Parser, Subcommand};
use config::RunConfig;
use gegenfield::contrast::ContrastContext;
use gegenfield::estimate::{mce, mce_adjusted_with, EstimationResult};
use gegenfield::model::LrdParams;
use gegenfield::montecarlo::{
    run_consistency_study, run_normality_study, write_estimates_csv,
    write_normality_estimates_csv, write_qq_csv, StudyConfig,
};
use gegenfield::periodogram::{periodogram, unbiased_periodogram};
use gegenfield::simulate::{simulate_field, FieldMeta, GridField, SimConfig};
use serde::Serialize;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gegenfield", version, about = "Gegenbauer random fields: simulation and minimum contrast estimation", disable_help_subcommand = true)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cap the worker thread count for studies (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a field; writes field.csv and field.meta.json.
    Simulate {
        #[arg(long)]
        out_dir: PathBuf,
        /// Override [simulation].t.
        #[arg(long)]
        t: Option<usize>,
        /// Override [simulation].seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Periodogram of a stored field on the contrast grid.
    Spectrum {
        #[arg(long)]
        field: PathBuf,
        /// Use the unbiased periodogram.
        #[arg(long)]
        adjusted: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimum contrast estimate from a stored field.
    Estimate {
        #[arg(long)]
        field: PathBuf,
        /// Use the adjusted estimator (unbiased periodogram).
        #[arg(long)]
        adjusted: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// S, A, and the sandwich covariance at θ (defaults to the model block's d).
    Asymptotics {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        d1: Option<f64>,
        #[arg(long)]
        d2: Option<f64>,
    },
    /// Consistency study over [study].t_values.
    McConsistency {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        base_seed: Option<u64>,
    },
    /// Asymptotic-normality study at a single T (adjusted estimator).
    McNormality {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        base_seed: Option<u64>,
        /// Grid size T (default: last of [study].t_values).
        #[arg(long)]
        t: Option<usize>,
    },
}

/// Input-side failure: exit 1 with a diagnostic.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

#[derive(Serialize)]
struct Enveloped<T: Serialize> {
    version: &'static str,
    config_hash: String,
    #[serde(flatten)]
    payload: T,
}

fn envelope<T: Serialize>(config_hash: &str, payload: T) -> Enveloped<T> {
    Enveloped { version: env!("CARGO_PKG_VERSION"), config_hash: config_hash.to_string(), payload }
}

fn fnv1a64(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap help/version go to stdout with success; usage errors are
            // input errors under this tool's exit contract.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, InputError> {
    let config_path = cli.config.ok_or("missing --config <FILE>")?;
    let raw = fs::read_to_string(&config_path)
        .map_err(|e| format!("cannot read {}: {e}", config_path.display()))?;
    let cfg = RunConfig::parse(&raw).map_err(|e| format!("{}: {e}", config_path.display()))?;
    let config_hash = fnv1a64(raw.as_bytes());

    if let Some(n) = cli.threads {
        // Only the first call can set the global pool; later calls in the
        // same process are a no-op, which is fine for a CLI run.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    match cli.cmd {
        Cmd::Simulate { out_dir, t, seed } => cmd_simulate(&cfg, &config_hash, &out_dir, t, seed),
        Cmd::Spectrum { field, adjusted, out } => {
            cmd_spectrum(&cfg, &config_hash, &field, adjusted, &out)
        }
        Cmd::Estimate { field, adjusted, out } => {
            cmd_estimate(&cfg, &config_hash, &field, adjusted, &out)
        }
        Cmd::Asymptotics { out, d1, d2 } => cmd_asymptotics(&cfg, &config_hash, &out, d1, d2),
        Cmd::McConsistency { out_dir, replications, base_seed } => {
            cmd_mc_consistency(&cfg, &config_hash, &out_dir, replications, base_seed)
        }
        Cmd::McNormality { out_dir, replications, base_seed, t } => {
            cmd_mc_normality(&cfg, &config_hash, &out_dir, replications, base_seed, t)
        }
    }
}

fn build_ctx(cfg: &RunConfig) -> Result<ContrastContext, InputError> {
    Ok(ContrastContext::with_midpoint_grid(
        cfg.model_params()?,
        cfg.weight_config()?,
        cfg.contrast.quad_nodes,
    )?)
}

fn meta_path(field: &Path) -> PathBuf {
    field.with_extension("meta.json")
}

fn load_field(path: &Path) -> Result<(GridField, FieldMeta), InputError> {
    let file = fs::File::open(path).map_err(|e| format!("cannot open {}: {e}", path.display()))?;
    let field = GridField::read_csv(BufReader::new(file))
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let mpath = meta_path(path);
    let meta: FieldMeta = serde_json::from_str(
        &fs::read_to_string(&mpath)
            .map_err(|e| format!("cannot read {}: {e}", mpath.display()))?,
    )
    .map_err(|e| format!("{}: {e}", mpath.display()))?;
    if meta.size_t != field.size_t() {
        return Err(InputError(format!(
            "{}: metadata T = {} does not match the {} data rows ((T+1)² with T = {})",
            mpath.display(),
            meta.size_t,
            field.values().len(),
            field.size_t()
        )));
    }
    Ok((field, meta))
}

fn cmd_simulate(
    cfg: &RunConfig,
    config_hash: &str,
    out_dir: &Path,
    t_override: Option<usize>,
    seed_override: Option<u64>,
) -> Result<ExitCode, InputError> {
    let t_size = t_override.unwrap_or(cfg.simulation.t);
    let sim = SimConfig::new(
        cfg.model_params()?,
        cfg.simulation.n_trunc,
        seed_override.unwrap_or(cfg.simulation.seed),
    )?;
    let field = simulate_field(t_size, &sim)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    let csv_path = out_dir.join("field.csv");
    let mut csv = Vec::new();
    field.write_csv(&mut csv)?;
    fs::write(&csv_path, csv).map_err(|e| format!("cannot write {}: {e}", csv_path.display()))?;
    let mut meta = FieldMeta::new(t_size, &sim);
    meta.config_hash = Some(config_hash.to_string());
    let meta_file = out_dir.join("field.meta.json");
    fs::write(&meta_file, serde_json::to_vec_pretty(&meta).expect("serializable"))
        .map_err(|e| format!("cannot write {}: {e}", meta_file.display()))?;
    println!("wrote {} and {}", csv_path.display(), meta_file.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_spectrum(
    cfg: &RunConfig,
    config_hash: &str,
    field_path: &Path,
    adjusted: bool,
    out: &Path,
) -> Result<ExitCode, InputError> {
    let (field, _) = load_field(field_path)?;
    let ctx = build_ctx(cfg)?;
    let pg = if adjusted {
        unbiased_periodogram(
            &field,
            ctx.quad().freqs1(),
            ctx.quad().freqs2(),
            cfg.contrast.clamp_i_star,
        )?
    } else {
        periodogram(&field, ctx.quad().freqs1(), ctx.quad().freqs2())?
    };
    let mut csv = Vec::new();
    pg.write_csv(&mut csv)?;
    fs::write(out, csv).map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    #[derive(Serialize)]
    struct SpectrumMeta {
        adjusted: bool,
        t: usize,
        quad_nodes: usize,
    }
    let meta = envelope(
        config_hash,
        SpectrumMeta { adjusted, t: field.size_t(), quad_nodes: cfg.contrast.quad_nodes },
    );
    fs::write(meta_path(out), serde_json::to_vec_pretty(&meta).expect("serializable"))
        .map_err(|e| e.to_string())?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_estimate(
    cfg: &RunConfig,
    config_hash: &str,
    field_path: &Path,
    adjusted: bool,
    out: &Path,
) -> Result<ExitCode, InputError> {
    let (field, _) = load_field(field_path)?;
    let ctx = build_ctx(cfg)?;
    let opts = cfg.optimizer_options();
    let result: EstimationResult = if adjusted {
        mce_adjusted_with(&field, &ctx, &opts, cfg.contrast.clamp_i_star)?
    } else {
        mce(&field, &ctx, &opts)?
    };
    #[derive(Serialize)]
    struct EstimateOut {
        adjusted: bool,
        #[serde(flatten)]
        result: EstimationResult,
    }
    let doc = envelope(config_hash, EstimateOut { adjusted, result });
    fs::write(out, serde_json::to_vec_pretty(&doc).expect("serializable"))
        .map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    println!(
        "theta_hat = ({:.5}, {:.5}), sigma2_hat = {:.4}, converged = {}, boundary = {}",
        result.theta_hat.d1,
        result.theta_hat.d2,
        result.sigma2_hat,
        result.converged,
        result.boundary_flag
    );
    if !result.converged || result.boundary_flag {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_asymptotics(
    cfg: &RunConfig,
    config_hash: &str,
    out: &Path,
    d1: Option<f64>,
    d2: Option<f64>,
) -> Result<ExitCode, InputError> {
    let theta = LrdParams::new(d1.unwrap_or(cfg.model.d1), d2.unwrap_or(cfg.model.d2))?;
    let ctx = build_ctx(cfg)?;
    let sw = gegenfield::asymptotics::sandwich(&theta, &ctx)?;
    #[derive(Serialize)]
    struct AsymptoticsOut {
        theta: LrdParams,
        #[serde(flatten)]
        sandwich: gegenfield::asymptotics::SandwichCovariance,
    }
    let warned = !sw.warnings.is_empty();
    for w in &sw.warnings {
        eprintln!("warning: {w}");
    }
    let doc = envelope(config_hash, AsymptoticsOut { theta, sandwich: sw });
    fs::write(out, serde_json::to_vec_pretty(&doc).expect("serializable"))
        .map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(if warned { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn study_config(
    cfg: &RunConfig,
    replications: Option<usize>,
    base_seed: Option<u64>,
    t_values: Vec<usize>,
    adjusted: bool,
) -> Result<StudyConfig, InputError> {
    let ctx = build_ctx(cfg)?;
    let mut study = StudyConfig::new(
        ctx,
        cfg.theta0()?,
        t_values,
        replications.unwrap_or(cfg.study.replications),
        base_seed.unwrap_or(cfg.study.base_seed),
        adjusted,
    )?;
    study.epsilons = cfg.study.epsilons.clone();
    study.sigma_epsilons = cfg.study.sigma_epsilons.clone();
    study.n_trunc = cfg.simulation.n_trunc;
    study.opts = cfg.optimizer_options();
    Ok(study)
}

fn cmd_mc_consistency(
    cfg: &RunConfig,
    config_hash: &str,
    out_dir: &Path,
    replications: Option<usize>,
    base_seed: Option<u64>,
) -> Result<ExitCode, InputError> {
    let study = study_config(
        cfg,
        replications,
        base_seed,
        cfg.study.t_values.clone(),
        cfg.study.adjusted,
    )?;
    let report = run_consistency_study(&study)?;
    fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;
    let doc = envelope(config_hash, &report);
    fs::write(out_dir.join("report.json"), serde_json::to_vec_pretty(&doc).expect("serializable"))
        .map_err(|e| e.to_string())?;
    let mut csv = Vec::new();
    write_estimates_csv(&report, &mut csv)?;
    fs::write(out_dir.join("estimates.csv"), csv).map_err(|e| e.to_string())?;
    let failures: usize = report.entries.iter().map(|e| e.failures).sum();
    for entry in &report.entries {
        println!(
            "T = {:>3}: median |theta_hat - theta0| = {:.4}, median sigma2_hat = {:.3}, failures = {}",
            entry.t_size, entry.theta_err.median, entry.sigma2.median, entry.failures
        );
    }
    println!("wrote {}", out_dir.join("report.json").display());
    Ok(if failures > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn cmd_mc_normality(
    cfg: &RunConfig,
    config_hash: &str,
    out_dir: &Path,
    replications: Option<usize>,
    base_seed: Option<u64>,
    t: Option<usize>,
) -> Result<ExitCode, InputError> {
    let t_size = t
        .or_else(|| cfg.study.t_values.last().copied())
        .ok_or("study.t_values is empty and no --t given")?;
    let study = study_config(cfg, replications, base_seed, vec![t_size], true)?;
    let report = run_normality_study(&study)?;
    fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;
    let doc = envelope(config_hash, &report);
    fs::write(out_dir.join("report.json"), serde_json::to_vec_pretty(&doc).expect("serializable"))
        .map_err(|e| e.to_string())?;
    let mut qq = Vec::new();
    write_qq_csv(&report, &mut qq)?;
    fs::write(out_dir.join("qq.csv"), qq).map_err(|e| e.to_string())?;
    let mut est = Vec::new();
    write_normality_estimates_csv(&report, &mut est)?;
    fs::write(out_dir.join("estimates.csv"), est).map_err(|e| e.to_string())?;
    println!(
        "T = {}: mardia p_skew = {:.4}, p_kurt = {:.4}, qq corr = ({:.4}, {:.4}), failures = {}",
        report.t_size,
        report.mardia.p_skew,
        report.mardia.p_kurt,
        report.qq_corr[0],
        report.qq_corr[1],
        report.failures
    );
    println!("wrote {}", out_dir.join("report.json").display());
    Ok(if report.failures > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}
