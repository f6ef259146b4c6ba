use std::path::{Path, PathBuf};

use nodal_core::crossings::{regime_of, Regime};
use nodal_core::curve::{build_unit_speed, CurveSpec, UnitSpeedCurve, DEFAULT_NODES};
use nodal_core::lattice::is_representable;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeChoice {
    #[default]
    Auto,
    Generic,
    Static,
}

/// Limit law used for the static-regime KS check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitRoute {
    #[default]
    Reconciled,
    Literal,
    I,
    Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    #[serde(default = "default_mean_sigmas")]
    pub mean_sigmas: f64,
    #[serde(default = "default_flag_rate")]
    pub flag_rate: f64,
    #[serde(default)]
    pub variance_ratio: Option<[f64; 2]>,
    #[serde(default)]
    pub ks_max: Option<f64>,
    /// Relative agreement between Kac–Rice and Monte Carlo variance.
    #[serde(default)]
    pub kacrice_rel: Option<f64>,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            mean_sigmas: default_mean_sigmas(),
            flag_rate: default_flag_rate(),
            variance_ratio: None,
            ks_max: None,
            kacrice_rel: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default)]
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            csv: true,
            svg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub levels: Vec<u64>,
    pub curve: CurveSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_spw")]
    pub samples_per_wavelength: f64,
    #[serde(default)]
    pub regime: RegimeChoice,
    #[serde(default)]
    pub limit_route: LimitRoute,
    #[serde(default = "default_draws")]
    pub limit_draws: usize,
    #[serde(default)]
    pub kacrice: bool,
    #[serde(default)]
    pub chaos: bool,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_mean_sigmas() -> f64 {
    3.0
}
fn default_flag_rate() -> f64 {
    1e-3
}
fn default_dir() -> PathBuf {
    PathBuf::from("nodal-out")
}
fn yes() -> bool {
    true
}
fn default_trials() -> usize {
    1000
}
fn default_spw() -> f64 {
    nodal_core::field::DEFAULT_SAMPLES_PER_WAVELENGTH
}
fn default_draws() -> usize {
    200_000
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::ConfigInvalid(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks every field and builds the curve.
    pub fn validate(&self) -> Result<(UnitSpeedCurve, Regime), CliError> {
        if self.levels.is_empty() {
            return Err(invalid("no levels given"));
        }
        if let Some(&n) = self.levels.iter().find(|&&n| !is_representable(n)) {
            return Err(invalid(format!("level {n} is not a sum of two squares")));
        }
        if self.trials < 2 {
            return Err(invalid("at least two trials are needed"));
        }
        if !(self.samples_per_wavelength > 0.0) {
            return Err(invalid("samples_per_wavelength must be positive"));
        }
        if self.checks.ks_max.is_some() && self.trials < 100 {
            return Err(invalid("the KS check needs at least 100 trials"));
        }
        if let Some([lo, hi]) = self.checks.variance_ratio {
            if !(lo < hi) {
                return Err(invalid("variance_ratio must be an increasing pair"));
            }
        }
        let curve = build_unit_speed(&self.curve, DEFAULT_NODES).map_err(|e| invalid(format!("curve: {e}")))?;
        let detected = regime_of(&curve);
        let regime = match (self.regime, detected) {
            (RegimeChoice::Auto, r) => r,
            (RegimeChoice::Generic, Regime::Generic) => Regime::Generic,
            (RegimeChoice::Static, Regime::Static) => Regime::Static,
            (RegimeChoice::Generic, Regime::Static) => {
                return Err(invalid("regime \"generic\" requested for a static curve"))
            }
            (RegimeChoice::Static, Regime::Generic) => {
                return Err(invalid("regime \"static\" requested for a non-static curve"))
            }
        };
        if self.limit_route == LimitRoute::Circle && !matches!(self.curve, CurveSpec::Circle { .. }) {
            return Err(invalid("limit_route \"circle\" only applies to circles"));
        }
        Ok((curve, regime))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(canonical.as_bytes()))
    }
}
