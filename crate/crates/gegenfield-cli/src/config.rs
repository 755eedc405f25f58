//! Run configuration: one TOML file per run, blocks mirroring the library's
//! constructor arguments. Syntax errors surface with the parser's line/column
//! positions; range violations name the field and its admissible range.

use gegenfield::contrast::{BaseWeight, WeightConfig};
use gegenfield::estimate::OptimizerOptions;
use gegenfield::model::{LrdParams, ModelParams};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub simulation: SimulationBlock,
    #[serde(default)]
    pub contrast: ContrastBlock,
    #[serde(default)]
    pub optimizer: OptimizerBlock,
    #[serde(default)]
    pub study: StudyBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub u1: f64,
    pub u2: f64,
    pub d1: f64,
    pub d2: f64,
    pub sigma2_eps: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationBlock {
    pub t: usize,
    pub n_trunc: usize,
    pub seed: u64,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        Self { t: 50, n_trunc: 40, seed: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContrastBlock {
    pub a1: f64,
    pub a2: f64,
    /// One of `constant`, `cosine-bump`.
    pub w0: String,
    pub quad_nodes: usize,
    /// Zero-clamp `I*` before integration in adjusted estimation.
    pub clamp_i_star: bool,
}

impl Default for ContrastBlock {
    fn default() -> Self {
        Self {
            a1: 2.0,
            a2: 2.0,
            w0: "constant".into(),
            quad_nodes: 256,
            clamp_i_star: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerBlock {
    pub coarse_grid_n: usize,
    pub tol_x: f64,
    pub tol_f: f64,
    pub max_evals: usize,
    pub clip_margin: f64,
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        let o = OptimizerOptions::default();
        Self {
            coarse_grid_n: o.coarse_grid_n,
            tol_x: o.tol_x,
            tol_f: o.tol_f,
            max_evals: o.max_evals,
            clip_margin: o.clip_margin,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyBlock {
    pub t_values: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    pub adjusted: bool,
    pub epsilons: Vec<f64>,
    pub sigma_epsilons: Vec<f64>,
}

impl Default for StudyBlock {
    fn default() -> Self {
        Self {
            t_values: vec![10, 20, 30, 40, 50],
            replications: 100,
            base_seed: 1,
            adjusted: false,
            epsilons: vec![0.025, 0.05, 0.1, 0.2],
            sigma_epsilons: vec![5.0, 10.0, 20.0, 40.0],
        }
    }
}

impl RunConfig {
    /// Parse and range-check a config file's contents.
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        self.model_params().map_err(|e| e.to_string())?;
        self.weight_config().map_err(|e| e.to_string())?;
        self.optimizer_options().validate_cli()?;
        if self.simulation.t == 0 {
            return Err("invalid parameter `simulation.t`: must be >= 1".into());
        }
        if self.simulation.n_trunc == 0 {
            return Err("invalid parameter `simulation.n_trunc`: must be >= 1".into());
        }
        if self.contrast.quad_nodes < 8 {
            return Err("invalid parameter `contrast.quad_nodes`: must be >= 8".into());
        }
        BaseWeight::parse(&self.contrast.w0)
            .map_err(|_| format!("invalid parameter `contrast.w0`: `{}` not one of: constant, cosine-bump", self.contrast.w0))?;
        Ok(())
    }

    pub fn model_params(&self) -> gegenfield::Result<ModelParams> {
        ModelParams::new(
            self.model.u1,
            self.model.u2,
            self.model.d1,
            self.model.d2,
            self.model.sigma2_eps,
        )
    }

    pub fn theta0(&self) -> gegenfield::Result<LrdParams> {
        LrdParams::new(self.model.d1, self.model.d2)
    }

    pub fn weight_config(&self) -> gegenfield::Result<WeightConfig> {
        WeightConfig::new(self.contrast.a1, self.contrast.a2, BaseWeight::parse(&self.contrast.w0)?)
    }

    pub fn optimizer_options(&self) -> OptimizerOptions {
        OptimizerOptions {
            coarse_grid_n: self.optimizer.coarse_grid_n,
            tol_x: self.optimizer.tol_x,
            tol_f: self.optimizer.tol_f,
            max_evals: self.optimizer.max_evals,
            clip_margin: self.optimizer.clip_margin,
        }
    }
}

trait ValidateCli {
    fn validate_cli(&self) -> Result<(), String>;
}

impl ValidateCli for OptimizerOptions {
    fn validate_cli(&self) -> Result<(), String> {
        if self.coarse_grid_n < 2 {
            return Err("invalid parameter `optimizer.coarse_grid_n`: must be >= 2".into());
        }
        if !(self.tol_x > 0.0 && self.tol_f > 0.0) {
            return Err("invalid parameter `optimizer.tol_x`/`tol_f`: must be > 0".into());
        }
        if !(self.clip_margin > 0.0 && self.clip_margin < 0.25) {
            return Err("invalid parameter `optimizer.clip_margin`: must be in (0, 1/4)".into());
        }
        Ok(())
    }
}
