//! Experiment configuration: TOML schema, `--set` overrides, validation.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::solver::{BlockSchedule, SolverConfig, StepRule, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    SnrSweep,
    OutlierSweep,
    SampleComplexitySweep,
    PSweep,
    Fourier2dPipeline,
    CrbTable,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::SnrSweep => "snr_sweep",
            Scenario::OutlierSweep => "outlier_sweep",
            Scenario::SampleComplexitySweep => "sample_complexity_sweep",
            Scenario::PSweep => "p_sweep",
            Scenario::Fourier2dPipeline => "fourier2d_pipeline",
            Scenario::CrbTable => "crb_table",
        }
    }
}

fn default_trials() -> usize {
    100
}

fn default_success_threshold() -> f64 {
    crate::metrics::DEFAULT_SUCCESS_THRESHOLD
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Monte-Carlo trials per grid point. The desk-scale default is 100;
    /// raise towards 500-1000 for paper-scale statistics.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_success_threshold")]
    pub success_threshold: f64,
    pub signal: SignalSpec,
    pub operator: OperatorSpec,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solvers: Vec<SolverSpec>,
    #[serde(default)]
    pub hio: Option<HioSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    /// `exponential` | `gaussian_complex` | `gaussian_grid`
    pub kind: String,
    #[serde(default)]
    pub n: Option<usize>,
    /// Phase rate of the exponential signal: `x_t = exp(j rate pi t)`.
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub rows: Option<usize>,
    #[serde(default)]
    pub cols: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    /// `masked_dft` | `dense_gaussian` | `fourier2d`
    pub kind: String,
    /// Mask count K for `masked_dft` (M = K N).
    #[serde(default)]
    pub masks: Option<usize>,
    /// Measurement count for `dense_gaussian`.
    #[serde(default)]
    pub m: Option<usize>,
    /// Integer oversampling for `fourier2d`.
    #[serde(default)]
    pub oversampling: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// `none` | `laplacian` | `alpha_stable` | `gmm` | `sparse_outliers`
    pub kind: String,
    /// Target SNR after scaling; ignored for `none`, supplied by the grid in
    /// an SNR sweep.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    /// GMM outlier probability (second component).
    #[serde(default)]
    pub c2: Option<f64>,
    #[serde(default)]
    pub sigma1_sq: Option<f64>,
    #[serde(default)]
    pub sigma2_sq: Option<f64>,
    /// Sparse-outlier parameters.
    #[serde(default)]
    pub fraction: Option<f64>,
    #[serde(default)]
    pub variance: Option<f64>,
}

impl NoiseSpec {
    /// Instantiates the model; `c2_override` replaces the GMM outlier
    /// probability during outlier sweeps.
    pub fn model(&self, c2_override: Option<f64>) -> Result<Option<NoiseModel>> {
        let model = match self.kind.as_str() {
            "none" => None,
            "laplacian" => Some(NoiseModel::Laplacian {
                sigma: self.sigma.unwrap_or(1.0),
            }),
            "alpha_stable" => Some(NoiseModel::AlphaStable {
                alpha: self.alpha.unwrap_or(0.8),
                beta: self.beta.unwrap_or(0.0),
                gamma: self.gamma.unwrap_or(2.0),
                mu: self.mu.unwrap_or(0.0),
            }),
            "gmm" => {
                let c2 = c2_override.or(self.c2).unwrap_or(0.1);
                Some(NoiseModel::Gmm {
                    probabilities: [1.0 - c2, c2],
                    variances: [self.sigma1_sq.unwrap_or(0.0), self.sigma2_sq.unwrap_or(100.0)],
                })
            }
            "sparse_outliers" => None, // handled separately; not an i.i.d. model
            other => {
                return Err(Error::Config(format!("unknown noise kind `{other}`")));
            }
        };
        if let Some(m) = &model {
            m.validate()
                .map_err(|e| Error::Config(format!("noise: {e}")))?;
        }
        Ok(model)
    }

    pub fn is_sparse_outliers(&self) -> bool {
        self.kind == "sparse_outliers"
    }

    pub fn is_none(&self) -> bool {
        self.kind == "none"
    }
}

/// Exactly one of these arrays must be populated, matching the scenario.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub snr_db: Option<Vec<f64>>,
    #[serde(default)]
    pub outlier_fraction: Option<Vec<f64>>,
    #[serde(default)]
    pub masks: Option<Vec<usize>>,
    #[serde(default)]
    pub p: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub name: Option<String>,
    /// `irls` | `gd` | `gd_accel` | `gd_block` | `gs`
    pub variant: String,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    /// `trace` | `leading_eigenvalue`
    #[serde(default)]
    pub step_rule: Option<String>,
    #[serde(default)]
    pub block_size: Option<usize>,
    /// `cyclic` | `random`
    #[serde(default)]
    pub schedule: Option<String>,
    #[serde(default)]
    pub schedule_seed: Option<u64>,
    #[serde(default)]
    pub restart: Option<bool>,
    /// Force the staged warm start on or off; the default stages whenever
    /// `p < 1`.
    #[serde(default)]
    pub staged_init: Option<bool>,
}

/// A solver entry resolved against a grid point.
#[derive(Debug, Clone)]
pub struct ResolvedSolver {
    pub name: String,
    pub config: SolverConfig,
    pub staged: bool,
    pub is_gs: bool,
}

impl SolverSpec {
    pub fn resolve(&self, p_override: Option<f64>) -> Result<ResolvedSolver> {
        let is_gs = self.variant == "gs";
        let p = if is_gs {
            2.0
        } else {
            p_override.or(self.p).unwrap_or(1.3)
        };
        let step_rule = match self.step_rule.as_deref() {
            None | Some("trace") => StepRule::TraceHeuristic,
            Some("leading_eigenvalue") => StepRule::LeadingEigenvalue,
            Some(other) => {
                return Err(Error::Config(format!("unknown step rule `{other}`")));
            }
        };
        let variant = match self.variant.as_str() {
            "gs" | "irls" => Variant::Irls,
            "gd" => Variant::Gd,
            "gd_accel" => Variant::GdAccel {
                restart: self.restart.unwrap_or(true),
            },
            "gd_block" => {
                let block_size = self.block_size.ok_or_else(|| {
                    Error::Config("gd_block requires `block_size`".to_string())
                })?;
                let schedule = match self.schedule.as_deref() {
                    None | Some("cyclic") => BlockSchedule::Cyclic,
                    Some("random") => BlockSchedule::Random {
                        seed: self.schedule_seed.unwrap_or(0),
                    },
                    Some(other) => {
                        return Err(Error::Config(format!("unknown schedule `{other}`")));
                    }
                };
                Variant::GdBlock {
                    block_size,
                    schedule,
                }
            }
            other => {
                return Err(Error::Config(format!("unknown solver variant `{other}`")));
            }
        };
        let config = SolverConfig {
            p,
            epsilon: if is_gs {
                0.0
            } else {
                self.epsilon.unwrap_or(1e-6)
            },
            max_iters: self.max_iters.unwrap_or(1000),
            rel_tol: self.rel_tol.unwrap_or(1e-7),
            variant,
            step_rule,
        };
        config
            .validate()
            .map_err(|e| Error::Config(format!("solver `{}`: {e}", self.variant)))?;
        let staged = if is_gs {
            false
        } else {
            self.staged_init.unwrap_or(p < 1.0)
        };
        let name = match &self.name {
            Some(n) => n.clone(),
            None if is_gs => "gs".to_string(),
            None => format!("{}_p{}", self.variant, p),
        };
        if name.contains(',') || name.contains('\n') {
            return Err(Error::Config(format!("solver name `{name}` must not contain commas or newlines")));
        }
        Ok(ResolvedSolver {
            name,
            config,
            staged,
            is_gs,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HioSpec {
    #[serde(default = "default_hio_init")]
    pub init_iters: usize,
    #[serde(default = "default_hio_baseline")]
    pub baseline_iters: usize,
    #[serde(default = "default_hio_beta")]
    pub beta: f64,
    #[serde(default = "default_true")]
    pub real_signal: bool,
    #[serde(default)]
    pub nonnegative: bool,
}

fn default_hio_init() -> usize {
    5000
}
fn default_hio_baseline() -> usize {
    10000
}
fn default_hio_beta() -> f64 {
    0.9
}
fn default_true() -> bool {
    true
}

impl Default for HioSpec {
    fn default() -> Self {
        Self {
            init_iters: default_hio_init(),
            baseline_iters: default_hio_baseline(),
            beta: default_hio_beta(),
            real_signal: true,
            nonnegative: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_str_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    /// The grid key/value pairs this run sweeps over.
    pub fn grid_points(&self) -> Result<(&'static str, Vec<f64>)> {
        let reject_extra = |allowed: &str| -> Result<()> {
            let extras = [
                ("snr_db", self.grid.snr_db.is_some()),
                ("outlier_fraction", self.grid.outlier_fraction.is_some()),
                ("masks", self.grid.masks.is_some()),
                ("p", self.grid.p.is_some()),
            ];
            for (name, present) in extras {
                if present && name != allowed {
                    return Err(Error::Config(format!(
                        "grid key `{name}` does not apply to scenario `{}`",
                        self.scenario.as_str()
                    )));
                }
            }
            Ok(())
        };
        match self.scenario {
            Scenario::SnrSweep | Scenario::CrbTable => {
                reject_extra("snr_db")?;
                let values = self
                    .grid
                    .snr_db
                    .clone()
                    .ok_or_else(|| Error::Config("grid.snr_db is required".to_string()))?;
                Ok(("snr_db", values))
            }
            Scenario::OutlierSweep => {
                reject_extra("outlier_fraction")?;
                let values = self.grid.outlier_fraction.clone().ok_or_else(|| {
                    Error::Config("grid.outlier_fraction is required".to_string())
                })?;
                Ok(("outlier_fraction", values))
            }
            Scenario::SampleComplexitySweep => {
                reject_extra("masks")?;
                let values = self
                    .grid
                    .masks
                    .clone()
                    .ok_or_else(|| Error::Config("grid.masks is required".to_string()))?;
                Ok(("m_over_n", values.iter().map(|&k| k as f64).collect()))
            }
            Scenario::PSweep => {
                reject_extra("p")?;
                let values = self
                    .grid
                    .p
                    .clone()
                    .ok_or_else(|| Error::Config("grid.p is required".to_string()))?;
                Ok(("p", values))
            }
            Scenario::Fourier2dPipeline => {
                // The pipeline runs at the single SNR given in [noise].
                reject_extra("")?;
                let snr = self
                    .noise
                    .as_ref()
                    .and_then(|n| n.snr_db)
                    .ok_or_else(|| Error::Config("noise.snr_db is required".to_string()))?;
                Ok(("snr_db", vec![snr]))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".to_string()));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::Config("success_threshold must be positive".to_string()));
        }
        let (_, grid_values) = self.grid_points()?;
        if grid_values.is_empty() {
            return Err(Error::Config("sweep grid must be nonempty".to_string()));
        }
        if grid_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep grid must be finite".to_string()));
        }

        match self.signal.kind.as_str() {
            "exponential" | "gaussian_complex" => {
                if self.signal.n.unwrap_or(16) == 0 {
                    return Err(Error::Config("signal.n must be at least 1".to_string()));
                }
            }
            "gaussian_grid" => {
                if self.signal.rows.unwrap_or(0) == 0 || self.signal.cols.unwrap_or(0) == 0 {
                    return Err(Error::Config(
                        "gaussian_grid requires positive signal.rows and signal.cols".to_string(),
                    ));
                }
            }
            other => {
                return Err(Error::Config(format!("unknown signal kind `{other}`")));
            }
        }

        match self.operator.kind.as_str() {
            "masked_dft" => {
                if self.scenario != Scenario::SampleComplexitySweep
                    && self.operator.masks.unwrap_or(8) == 0
                {
                    return Err(Error::Config("operator.masks must be at least 1".to_string()));
                }
            }
            "dense_gaussian" => {
                if self.operator.m.unwrap_or(0) == 0 {
                    return Err(Error::Config(
                        "dense_gaussian requires a positive operator.m".to_string(),
                    ));
                }
            }
            "fourier2d" => {
                if self.operator.oversampling.unwrap_or(2) == 0 {
                    return Err(Error::Config("operator.oversampling must be at least 1".to_string()));
                }
            }
            other => {
                return Err(Error::Config(format!("unknown operator kind `{other}`")));
            }
        }

        match self.scenario {
            Scenario::Fourier2dPipeline => {
                if self.signal.kind != "gaussian_grid" || self.operator.kind != "fourier2d" {
                    return Err(Error::Config(
                        "fourier2d_pipeline requires signal.kind = gaussian_grid and operator.kind = fourier2d"
                            .to_string(),
                    ));
                }
                let hio = self.hio.clone().unwrap_or_default();
                if !(hio.beta > 0.0 && hio.beta < 1.0) {
                    return Err(Error::Config("hio.beta must lie in (0, 1)".to_string()));
                }
                if hio.init_iters == 0 || hio.baseline_iters == 0 {
                    return Err(Error::Config("hio iteration counts must be positive".to_string()));
                }
            }
            Scenario::SampleComplexitySweep => {
                if self.operator.kind != "masked_dft" {
                    return Err(Error::Config(
                        "sample_complexity_sweep requires operator.kind = masked_dft".to_string(),
                    ));
                }
            }
            Scenario::OutlierSweep => {
                let kind = self.noise.as_ref().map(|n| n.kind.as_str());
                if kind != Some("gmm") {
                    return Err(Error::Config(
                        "outlier_sweep varies the GMM outlier probability; set noise.kind = gmm"
                            .to_string(),
                    ));
                }
                if grid_values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::Config(
                        "outlier fractions must lie in [0, 1]".to_string(),
                    ));
                }
            }
            Scenario::PSweep => {
                if grid_values.iter().any(|&v| !(v > 0.0 && v <= 2.0)) {
                    return Err(Error::Config("p grid values must lie in (0, 2]".to_string()));
                }
            }
            _ => {}
        }

        if self.scenario != Scenario::CrbTable {
            if self.solvers.is_empty() {
                return Err(Error::Config("at least one solver entry is required".to_string()));
            }
            let noise = self
                .noise
                .as_ref()
                .ok_or_else(|| Error::Config("a [noise] section is required".to_string()))?;
            noise.model(None)?;
            if noise.is_sparse_outliers() {
                if !(0.0..=1.0).contains(&noise.fraction.unwrap_or(0.1)) {
                    return Err(Error::Config("noise.fraction must lie in [0, 1]".to_string()));
                }
            }
            // Every scenario except the SNR sweep needs a scalar target SNR
            // unless the noise is disabled.
            if self.scenario != Scenario::SnrSweep && !noise.is_none() && noise.snr_db.is_none() {
                return Err(Error::Config("noise.snr_db is required".to_string()));
            }
            let mut names = std::collections::HashSet::new();
            for spec in &self.solvers {
                let resolved = spec.resolve(None)?;
                if !names.insert(resolved.name.clone()) {
                    return Err(Error::Config(format!(
                        "duplicate solver name `{}`",
                        resolved.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Applies one `--set key=value` override onto the parsed TOML tree; the key
/// uses dotted paths (`noise.c2`, `grid.snr_db`, `trials`). Values parse as
/// TOML (so arrays and strings work) falling back to a bare string.
pub fn apply_override(root: &mut toml::Value, key: &str, raw: &str) -> Result<()> {
    let parsed: toml::Value = match raw.parse::<i64>() {
        Ok(v) => toml::Value::Integer(v),
        Err(_) => match raw.parse::<f64>() {
            Ok(v) => toml::Value::Float(v),
            Err(_) => match raw {
                "true" => toml::Value::Boolean(true),
                "false" => toml::Value::Boolean(false),
                _ => toml::from_str::<toml::Value>(&format!("v = {raw}"))
                    .ok()
                    .and_then(|t| t.get("v").cloned())
                    .unwrap_or_else(|| toml::Value::String(raw.to_string())),
            },
        },
    };
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not a table")))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    unreachable!("split always yields at least one part")
}
