//! Experiment configuration: JSON schema, defaults, and validation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Which simulation protocol a run reproduces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    NoLatentVaryN,
    NoLatentVaryP,
    LatentBase,
    LatentKnobSweep,
    LatentHighdim,
    DataDrivenTuning,
    CaseStudy,
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Design::NoLatentVaryN => "no_latent_vary_n",
            Design::NoLatentVaryP => "no_latent_vary_p",
            Design::LatentBase => "latent_base",
            Design::LatentKnobSweep => "latent_knob_sweep",
            Design::LatentHighdim => "latent_highdim",
            Design::DataDrivenTuning => "data_driven_tuning",
            Design::CaseStudy => "case_study",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    SmallWorld,
    Chain,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphConfig {
    pub kind: GraphKind,
    pub p_o: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_k() -> usize {
    2
}
fn default_beta() -> f64 {
    0.1
}
fn default_weight() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LatentConfig {
    pub p_h: usize,
    pub oh_magnitude: f64,
    pub h_diag: f64,
    pub oh_sparsity: f64,
    pub h_sparsity: f64,
    pub h_offdiag_magnitude: f64,
}

impl Default for LatentConfig {
    fn default() -> Self {
        Self {
            p_h: 0,
            oh_magnitude: 0.0,
            h_diag: 1.0,
            oh_sparsity: 0.0,
            h_sparsity: 0.0,
            h_offdiag_magnitude: 0.0,
        }
    }
}

/// Knobs a sweep may vary, one value per setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knob {
    PO,
    PH,
    OhMagnitude,
    HDiag,
    OhSparsity,
    HSparsity,
}

impl fmt::Display for Knob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Knob::PO => "p_o",
            Knob::PH => "p_h",
            Knob::OhMagnitude => "oh_magnitude",
            Knob::HDiag => "h_diag",
            Knob::OhSparsity => "oh_sparsity",
            Knob::HSparsity => "h_sparsity",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub knob: Knob,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Glasso,
    Tglasso,
    Nbsel,
    Tnbsel,
    Clime,
    Tclime,
    Lvglasso,
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MethodName::Glasso => "glasso",
            MethodName::Tglasso => "tglasso",
            MethodName::Nbsel => "nbsel",
            MethodName::Tnbsel => "tnbsel",
            MethodName::Clime => "clime",
            MethodName::Tclime => "tclime",
            MethodName::Lvglasso => "lvglasso",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningMode {
    OracleCount,
    Ebic,
    Cv,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// Points on the descending log lambda grid.
    pub lambda_count: usize,
    /// Smallest grid lambda as a fraction of the largest.
    pub lambda_min_ratio: f64,
    /// Trade-off grid for the sparse-plus-low-rank method.
    pub gamma: Vec<f64>,
    /// Cap on threshold candidates scored by EBIC.
    pub tau_count: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lambda_count: 30,
            lambda_min_ratio: 1e-3,
            gamma: vec![0.5, 1.0, 2.0, 4.0],
            tau_count: 100,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningConfig {
    pub mode: TuningMode,
    pub lambda0_c: f64,
    pub grids: GridConfig,
    pub gamma_ebic: f64,
    #[serde(rename = "K")]
    pub k: usize,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            mode: TuningMode::OracleCount,
            lambda0_c: 0.5,
            grids: GridConfig::default(),
            gamma_ebic: 0.5,
            k: 5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// File paths for a case-study run driven through a config file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseStudyPaths {
    pub data: String,
    #[serde(default)]
    pub labels: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design: Design,
    pub graph: GraphConfig,
    #[serde(default)]
    pub latent: LatentConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub sample_sizes: Vec<usize>,
    pub methods: Vec<MethodName>,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub case_study: Option<CaseStudyPaths>,
}

fn default_replicates() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| CliError::Config(format!("bad config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.replicates == 0 {
            return Err(CliError::Config("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Config("methods must be nonempty".into()));
        }
        if self.graph.p_o < 2 {
            return Err(CliError::Config("graph.p_o must be at least 2".into()));
        }
        let needs_sample_sizes = !matches!(self.design, Design::CaseStudy);
        if needs_sample_sizes && self.sample_sizes.is_empty() {
            return Err(CliError::Config("sample_sizes must be nonempty".into()));
        }
        match self.design {
            Design::NoLatentVaryP | Design::LatentKnobSweep | Design::LatentHighdim => {
                let sweep = self.sweep.as_ref().ok_or_else(|| {
                    CliError::Config(format!("design {} requires a sweep", self.design))
                })?;
                if sweep.values.is_empty() {
                    return Err(CliError::Config("sweep.values must be nonempty".into()));
                }
                match self.design {
                    Design::NoLatentVaryP | Design::LatentHighdim => {
                        if sweep.knob != Knob::PO {
                            return Err(CliError::Config(format!(
                                "design {} sweeps p_o, not {}",
                                self.design, sweep.knob
                            )));
                        }
                    }
                    Design::LatentKnobSweep => {
                        if sweep.knob == Knob::PO {
                            return Err(CliError::Config(
                                "latent_knob_sweep varies a latent knob, not p_o".into(),
                            ));
                        }
                    }
                    _ => unreachable!(),
                }
                let integral = matches!(sweep.knob, Knob::PO | Knob::PH);
                if integral && sweep.values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
                    return Err(CliError::Config(format!(
                        "sweep over {} needs non-negative integers",
                        sweep.knob
                    )));
                }
            }
            Design::CaseStudy => {
                if self.case_study.is_none() {
                    return Err(CliError::Config(
                        "design case_study requires the case_study paths block".into(),
                    ));
                }
            }
            _ => {}
        }
        match self.tuning.mode {
            TuningMode::Ebic => {
                let ok = [MethodName::Glasso, MethodName::Tglasso, MethodName::Lvglasso];
                if let Some(m) = self.methods.iter().find(|m| !ok.contains(m)) {
                    return Err(CliError::Config(format!(
                        "EBIC tuning is defined for glasso, tglasso, and lvglasso; got {m}"
                    )));
                }
            }
            TuningMode::Cv => {
                let ok = [MethodName::Glasso, MethodName::Lvglasso];
                if let Some(m) = self.methods.iter().find(|m| !ok.contains(m)) {
                    return Err(CliError::Config(format!(
                        "cross-validation tuning is defined for glasso and lvglasso; got {m}"
                    )));
                }
                if self.tuning.k < 2 {
                    return Err(CliError::Config("tuning.K must be at least 2".into()));
                }
            }
            TuningMode::OracleCount => {}
        }
        if !(0.0..=1.0).contains(&self.tuning.gamma_ebic) {
            return Err(CliError::Config("tuning.gamma_ebic must lie in [0,1]".into()));
        }
        if self.tuning.lambda0_c <= 0.0 {
            return Err(CliError::Config("tuning.lambda0_c must be positive".into()));
        }
        if self.tuning.grids.lambda_count < 2 || !(0.0..1.0).contains(&self.tuning.grids.lambda_min_ratio)
        {
            return Err(CliError::Config("tuning.grids lambda grid is malformed".into()));
        }
        if self.tuning.grids.gamma.is_empty() || self.tuning.grids.gamma.iter().any(|&g| g <= 0.0) {
            return Err(CliError::Config("tuning.grids.gamma must be positive values".into()));
        }
        Ok(())
    }
}
