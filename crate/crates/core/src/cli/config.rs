use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::amplitude::{Budget, GridSpec, Kernel};
use crate::detection::{ConditioningPoint, Metric};
use crate::error::{Error, Result};
use crate::model::AtomParams;
use crate::report::{KRoute, MeasureOptions};

/// Atomic parameters as written in a config file. Rates default to the
/// symmetric emitter; `delta` is shorthand for `omega_12 / gamma_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default = "one")]
    pub gamma_a: f64,
    #[serde(default = "one")]
    pub gamma_b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_12: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default)]
    pub coherence_r: f64,
    #[serde(default = "pi")]
    pub coherence_theta: f64,
    pub eta: f64,
}

fn one() -> f64 {
    1.0
}

fn pi() -> f64 {
    PI
}

impl ParamsConfig {
    pub fn from_params(p: &AtomParams) -> Self {
        ParamsConfig {
            gamma_a: p.gamma_a,
            gamma_b: p.gamma_b,
            omega_12: Some(p.omega_12),
            delta: None,
            epsilon: p.epsilon,
            coherence_r: p.coherence_r,
            coherence_theta: p.coherence_theta,
            eta: p.eta,
        }
    }

    pub fn resolve(&self) -> Result<AtomParams> {
        let omega_12 = match (self.omega_12, self.delta) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either omega_12 or delta, not both".into()));
            }
            (Some(w), None) => w,
            (None, Some(d)) => d * self.gamma_a,
            (None, None) => return Err(Error::Config("missing omega_12 (or delta)".into())),
        };
        let p = AtomParams {
            gamma_a: self.gamma_a,
            gamma_b: self.gamma_b,
            omega_12,
            epsilon: self.epsilon,
            coherence_r: self.coherence_r,
            coherence_theta: self.coherence_theta,
            eta: self.eta,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Built-in test kernels that replace the emission amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FixtureConfig {
    SeparableGaussian { eta: f64, photon_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schmidt: Option<GridSpec>,
    /// Which grid the `amplitude` verb samples.
    #[serde(default)]
    pub export: ExportGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_grid_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_decomposition_entries: Option<usize>,
    /// Route for `K` in `scan`; recipes always use `auto`.
    #[serde(default)]
    pub k_route: KRoute,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            scale: 1.0,
            detection: None,
            schmidt: None,
            export: ExportGrid::Detection,
            max_grid_nodes: None,
            max_decomposition_entries: None,
            k_route: KRoute::Decomposition,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportGrid {
    #[default]
    Detection,
    Schmidt,
}

/// Either explicit values or `n` evenly spaced points over `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisConfig {
    Values(Vec<f64>),
    Range { min: f64, max: f64, n: usize },
}

impl AxisConfig {
    pub fn points(&self) -> Result<Vec<f64>> {
        match self {
            AxisConfig::Values(v) => Ok(v.clone()),
            &AxisConfig::Range { min, max, n } => {
                if n == 0 {
                    return Ok(Vec::new());
                }
                if n == 1 {
                    return Ok(vec![min]);
                }
                if !(min < max) {
                    return Err(Error::Config(format!("axis range [{min}, {max}] is empty")));
                }
                Ok((0..n).map(|i| min + (max - min) * i as f64 / (n - 1) as f64).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub r: AxisConfig,
    pub theta: AxisConfig,
    #[serde(default = "default_metric")]
    pub metric: Metric,
}

fn default_metric() -> Metric {
    Metric::R
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesConfig {
    #[serde(default = "three")]
    pub n_modes: usize,
    #[serde(default = "mode_tol")]
    pub tol: f64,
}

fn three() -> usize {
    3
}

fn mode_tol() -> f64 {
    1e-6
}

impl Default for ModesConfig {
    fn default() -> Self {
        ModesConfig { n_modes: 3, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Empty means every format.
    #[serde(default)]
    pub formats: Vec<Format>,
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.is_empty() || self.formats.contains(&f)
    }
}

/// Everything a run needs; the config carries no randomness.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<FixtureConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dk0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub modes: ModesConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Also measure at twice the grid density.
    #[serde(default)]
    pub convergence: bool,
}

impl RunConfig {
    pub fn from_params(p: &AtomParams) -> Self {
        RunConfig {
            params: Some(ParamsConfig::from_params(p)),
            fixture: None,
            grid: GridConfig::default(),
            dk0: None,
            scan: None,
            modes: ModesConfig::default(),
            output: OutputConfig::default(),
            convergence: false,
        }
    }

    pub fn parse_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn kernel(&self) -> Result<Kernel> {
        match (&self.params, &self.fixture) {
            (Some(_), Some(_)) => Err(Error::Config("give either [params] or [fixture], not both".into())),
            (Some(p), None) => Ok(Kernel::Emission { params: p.resolve()? }),
            (None, Some(FixtureConfig::SeparableGaussian { eta, photon_width })) => Ok(Kernel::SeparableGaussian {
                eta: *eta,
                photon_width: *photon_width,
            }),
            (None, None) => Err(Error::Config("missing [params] section".into())),
        }
    }

    pub fn params(&self) -> Result<AtomParams> {
        match self.kernel()? {
            Kernel::Emission { params } => Ok(params),
            _ => Err(Error::Config("this verb needs [params], not a fixture".into())),
        }
    }

    pub fn budget(&self) -> Budget {
        let d = Budget::default();
        Budget {
            max_grid_nodes: self.grid.max_grid_nodes.unwrap_or(d.max_grid_nodes),
            max_decomposition_entries: self
                .grid
                .max_decomposition_entries
                .unwrap_or(d.max_decomposition_entries),
        }
    }

    pub fn measure_options(&self) -> MeasureOptions {
        MeasureOptions {
            grid_scale: self.grid.scale,
            budget: self.budget(),
            conditioning: match self.dk0 {
                Some(k) => ConditioningPoint::Explicit(k),
                None => ConditioningPoint::PeakOfPhotonMarginal,
            },
            detection_grid: self.grid.detection,
            schmidt_grid: self.grid.schmidt,
            k_route: self.grid.k_route,
        }
    }
}
