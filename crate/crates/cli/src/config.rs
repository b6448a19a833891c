//! Run configuration files.

use std::path::{Path, PathBuf};

use homsim::sources::DEFAULT_GRID_POINTS;
use homsim::{DurationRule, ExperimentConfig};
use serde::{Deserialize, Serialize};

use crate::{CliError, Format};

/// The reference two-source setup, as shipped in `configs/reference.json`.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/reference.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    /// Points per frequency axis for the heralded states.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub rule: DurationRule,
    /// Default output file; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

impl RunConfig {
    pub fn reference() -> Self {
        parse(DEFAULT_CONFIG, "built-in configuration").expect("built-in configuration is valid")
    }

    pub fn validate(&self) -> homsim::Result<()> {
        self.experiment.validate()?;
        if !self.grid_points.is_power_of_two()
            || self.grid_points < homsim::spectral::MIN_GRID_POINTS
        {
            return Err(homsim::Error::InvalidInput(format!(
                "grid_points must be a power of two >= {}, got {}",
                homsim::spectral::MIN_GRID_POINTS,
                self.grid_points
            )));
        }
        Ok(())
    }
}

/// Parses and validates a configuration; `origin` names it in messages.
pub fn parse(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let at = if path == "." {
            String::new()
        } else {
            format!(" at `{path}`")
        };
        CliError::Config(format!("{origin}{at}: {inner}"))
    })?;
    config
        .validate()
        .map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    Ok(config)
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

/// Accepts `200` or `200pm`.
pub fn parse_bandwidth_pm(text: &str) -> Result<f64, String> {
    let number = text.trim().strip_suffix("pm").unwrap_or(text.trim()).trim();
    let value: f64 = number
        .parse()
        .map_err(|_| format!("expected a bandwidth in pm such as 200 or 200pm, got '{text}'"))?;
    if !(value.is_finite() && value > 0.0) {
        return Err(format!("bandwidth must be > 0 pm, got {value}"));
    }
    Ok(value)
}
