use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use stochwave::hit_analysis::{BoundCase, SpaceTimeWindow};
use stochwave::noise_field::GridSpec;
use stochwave::potential_theory::TargetSet;
use stochwave::spde_sim::{CoefficientSource, Coefficients, ModelSpec, NoiseHypothesis};
use stochwave::wave_kernel::WaveParams;
use stochwave::Error;

/// Parse or validation failure of the run configuration.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn invalid(field: &str, e: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{field}: {e}"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    pub model: ModelBlock,
    #[serde(default)]
    pub grid: Option<GridBlock>,
    #[serde(default)]
    pub simulate: Option<SimulateBlock>,
    #[serde(default)]
    pub moments: Option<MomentsBlock>,
    #[serde(default)]
    pub capacity: Option<CapacityBlock>,
    #[serde(default)]
    pub hausdorff: Option<HausdorffBlock>,
    #[serde(default)]
    pub hitprob: Option<HitprobBlock>,
    #[serde(default)]
    pub exponents: Option<ExponentsBlock>,
    #[serde(default)]
    pub report: Option<ReportBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub k: usize,
    pub d: usize,
    pub beta: f64,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub coefficients: Option<CoefficientSource>,
    #[serde(default = "default_hypothesis")]
    pub noise_hypothesis: NoiseHypothesis,
    #[serde(default)]
    pub drift_stepping: bool,
}

fn default_hypothesis() -> NoiseHypothesis {
    NoiseHypothesis::C1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(rename = "L")]
    pub extent: f64,
    pub n_space: usize,
    /// Defaults to dx.
    #[serde(default)]
    pub dt: Option<f64>,
    pub n_time: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    #[serde(default = "one")]
    pub n_paths: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsBlock {
    pub n_paths: usize,
    #[serde(default = "four")]
    pub q: u32,
    #[serde(default = "four_usize")]
    pub scales: usize,
    #[serde(default = "one")]
    pub stride: usize,
}

fn four() -> u32 {
    4
}

fn four_usize() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityBlock {
    pub target: TargetSet,
    pub gamma: f64,
    #[serde(default)]
    pub log_constant: Option<f64>,
    #[serde(default = "default_n_grid")]
    pub n_grid: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_n_grid() -> usize {
    2000
}

fn default_tol() -> f64 {
    1e-4
}

fn default_max_iter() -> usize {
    50_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HausdorffBlock {
    pub target: TargetSet,
    pub gamma: f64,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
}

fn default_depth() -> usize {
    16
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HitprobBlock {
    pub window: SpaceTimeWindow,
    pub targets: Vec<TargetSet>,
    pub n_paths: usize,
    #[serde(default)]
    pub eps_snap: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsBlock {
    #[serde(default = "small")]
    pub zeta: f64,
    #[serde(default = "small")]
    pub delta: f64,
    #[serde(default)]
    pub rho: Option<f64>,
    /// Defaults to additive noise under the Riesz covariance of the model.
    #[serde(default)]
    pub case: Option<BoundCase>,
}

fn small() -> f64 {
    0.01
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportBlock {
    pub window: SpaceTimeWindow,
    pub targets: Vec<TargetSet>,
    pub n_paths: usize,
    #[serde(default = "report_n_grid")]
    pub n_grid: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "report_depth")]
    pub max_depth: usize,
    #[serde(default)]
    pub eps_snap: Option<f64>,
}

fn report_n_grid() -> usize {
    400
}

fn report_depth() -> usize {
    12
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        if cfg.workers == Some(0) {
            return Err(invalid("workers", "must be at least 1"));
        }
        Ok(cfg)
    }

    pub fn params(&self) -> Result<WaveParams, ConfigError> {
        WaveParams::new(self.model.k, self.model.beta).map_err(|e| invalid("model", e))
    }

    pub fn model_spec(&self) -> Result<ModelSpec, ConfigError> {
        let m = &self.model;
        let params = self.params()?;
        let coeffs = match (&m.preset, &m.coefficients) {
            (Some(_), Some(_)) => {
                return Err(invalid("model", "give either preset or coefficients, not both"))
            }
            (Some(name), None) => Coefficients::preset(name, m.d).map_err(|e| invalid("model.preset", e))?,
            (None, Some(src)) => Coefficients::from_source(src).map_err(|e| invalid("model.coefficients", e))?,
            (None, None) => Coefficients::identity(m.d),
        };
        if coeffs.d() != m.d {
            return Err(invalid("model.d", format!("{} differs from the coefficient dimension {}", m.d, coeffs.d())));
        }
        let mut spec = ModelSpec::new(params, coeffs).map_err(|e| invalid("model", e))?;
        spec.noise_hypothesis = m.noise_hypothesis;
        spec.drift_stepping = m.drift_stepping;
        Ok(spec)
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        let g = self.grid.as_ref().ok_or_else(|| invalid("grid", "section is required"))?;
        let dx = 2.0 * g.extent / g.n_space as f64;
        GridSpec::new(self.model.k, g.extent, g.n_space, g.dt.unwrap_or(dx), g.n_time)
            .map_err(|e| invalid("grid", e))
    }
}

pub fn section<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T, ConfigError> {
    block.as_ref().ok_or_else(|| invalid(name, "section is required for this subcommand"))
}

/// Validation-class failure of a library call, tagged with the section.
pub fn check<T>(r: stochwave::Result<T>, field: &str) -> anyhow::Result<T> {
    r.map_err(|e| match e {
        Error::Domain(_) | Error::Config(_) | Error::Index(_) => invalid(field, e).into(),
        other => other.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 7
[model]
k = 1
d = 2
beta = 0.5
preset = "diag-trig"
[grid]
L = 2.0
n_space = 64
n_time = 32
"#;

    #[test]
    fn parses_and_builds() {
        let c = RunConfig::parse(BASE).unwrap();
        let m = c.model_spec().unwrap();
        assert_eq!(m.d, 2);
        let g = c.grid_spec().unwrap();
        assert_eq!(g.dt, g.dx());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASE.replace("n_time = 32", "n_time = 32\nn_tim = 3");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn range_errors_name_the_field() {
        let text = BASE.replace("beta = 0.5", "beta = 2.5");
        let e = RunConfig::parse(&text).unwrap().model_spec().unwrap_err();
        assert!(e.0.starts_with("model") && e.0.contains("(C1)"), "{e}");
    }
}
