use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localproj::{LpConfig, LpSpec};
use crate::paneldata::{Transform, VariableSpec};
use crate::pbvar::BvarConfig;

/// Contents of `--config file.toml`. Every section is optional; missing keys
/// fall back to the built-in defaults, and command-line flags win over both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub data: DataConfig,
    pub decompose: DecomposeConfig,
    pub bvar: BvarConfig,
    pub meangroup: MeanGroupConfig,
    pub rotations: RotationsConfig,
    pub localproj: LocalProjConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub variables: Option<Vec<VariableSpec>>,
    pub countries: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeConfig {
    pub w: f64,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self { w: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanGroupConfig {
    pub lags: usize,
}

impl Default for MeanGroupConfig {
    fn default() -> Self {
        Self { lags: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotationsConfig {
    pub grid: usize,
    /// 0 pools every retained draw.
    pub pool_draws: usize,
}

impl Default for RotationsConfig {
    fn default() -> Self {
        Self {
            grid: 99,
            pool_draws: 10_000,
        }
    }
}

/// `[localproj]`: the estimator settings plus the band multiples of the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalProjConfig {
    pub horizons: usize,
    pub j_y: usize,
    pub j_x: usize,
    pub j_i: usize,
    pub spec: LpSpec,
    pub sbic_max_lag: Option<usize>,
    pub bands: Vec<f64>,
}

impl LocalProjConfig {
    pub fn lp(&self) -> LpConfig {
        LpConfig {
            horizons: self.horizons,
            j_y: self.j_y,
            j_x: self.j_x,
            j_i: self.j_i,
            spec: self.spec,
            sbic_max_lag: self.sbic_max_lag,
        }
    }
}

impl Default for LocalProjConfig {
    fn default() -> Self {
        let lp = LpConfig::default();
        Self {
            horizons: lp.horizons,
            j_y: lp.j_y,
            j_x: lp.j_x,
            j_i: lp.j_i,
            spec: lp.spec,
            sbic_max_lag: lp.sbic_max_lag,
            bands: vec![1.0, 1.65],
        }
    }
}

pub const DEFAULT_SEED: u64 = 42;

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| {
            let msg = e.message().to_string();
            Error::schema(path, format!("invalid config: {msg}"))
        })
    }
}

/// The panel variables used when neither flag nor config names them.
pub fn default_variables() -> Vec<VariableSpec> {
    vec![
        VariableSpec::endogenous("ner", Transform::Log100),
        VariableSpec::endogenous("ip", Transform::Log100),
        VariableSpec::endogenous("cpi", Transform::Log100),
        VariableSpec::endogenous("lending_rate", Transform::Level),
        VariableSpec::endogenous("equity", Transform::Log100),
    ]
}

/// Parses `name:transform` items, e.g. `ner:log100,lending_rate:level`.
pub fn parse_variables(list: &str) -> Result<Vec<VariableSpec>> {
    list.split(',')
        .map(|item| {
            let (name, t) = item.trim().split_once(':').ok_or_else(|| {
                Error::InvalidInput(format!("--variables item {item:?} is not name:transform"))
            })?;
            let transform = match t {
                "log100" => Transform::Log100,
                "level" => Transform::Level,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "--variables: unknown transform {other:?} (expected log100 or level)"
                    )))
                }
            };
            Ok(VariableSpec::endogenous(name, transform))
        })
        .collect()
}

pub fn parse_f64_list(flag: &str, list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("{flag}: {v:?} is not a number")))
        })
        .collect()
}
