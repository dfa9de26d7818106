//! TOML run configuration and the embedded presets.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use steamnet::lumped::ReferenceQuantities;
use steamnet::pde_oracle::OracleConfig;
use steamnet::simulate::ModelKind;
use steamnet::{BoilerParams, Network, PipeParams, SaturationCurve, Scenario, SystemParams};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    pub id: String,
    pub boiler: BoilerParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipeConfig {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub params: PipeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub sites: Vec<SiteConfig>,
    pub pipes: Vec<PipeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_true")]
    pub plots: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            plots: true,
        }
    }
}

/// Manifold tracing settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    /// Input times (s) at which to freeze the schedules; one trace each.
    pub inputs_at_s: Vec<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    21
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "ReferenceQuantities::table_default")]
    pub reference: ReferenceQuantities,
    pub network: NetworkConfig,
    #[serde(default)]
    pub model: ModelKind,
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ManifoldConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown preset `{0}` (known: step, periodic, oracle)")]
    UnknownPreset(String),
    #[error("pipe `{pipe}` refers to unknown site `{site}`")]
    UnknownSite { pipe: String, site: String },
    #[error(transparent)]
    Model(#[from] steamnet::lumped::ModelError),
    #[error(transparent)]
    Scenario(#[from] steamnet::simulate::ScenarioError),
    #[error("{0}")]
    Invalid(String),
}

const STEP: &str = include_str!("../presets/step.toml");
const PERIODIC: &str = include_str!("../presets/periodic.toml");
const ORACLE: &str = include_str!("../presets/oracle.toml");

/// Preset TOML by name. The dotted names are accepted as aliases.
pub fn preset_text(name: &str) -> Result<&'static str, ConfigError> {
    match name {
        "step" | "step-5.1" => Ok(STEP),
        "periodic" | "periodic-5.2" => Ok(PERIODIC),
        "oracle" | "oracle-5.3" => Ok(ORACLE),
        other => Err(ConfigError::UnknownPreset(other.to_string())),
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.build()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        Self::from_toml(preset_text(name)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    pub fn network(&self) -> Result<Network, ConfigError> {
        let mut net = Network::new();
        for s in &self.network.sites {
            net.add_site(s.id.clone(), s.boiler);
        }
        for p in &self.network.pipes {
            for end in [&p.tail, &p.head] {
                if net.site_index(end).is_none() {
                    return Err(ConfigError::UnknownSite {
                        pipe: p.id.clone(),
                        site: end.clone(),
                    });
                }
            }
            net.add_pipe(p.id.clone(), &p.tail, &p.head, p.params);
        }
        Ok(net)
    }

    /// Validated model parameters and scenario.
    pub fn build(&self) -> Result<(SystemParams, Scenario), ConfigError> {
        let params = SystemParams::new(
            self.network()?,
            Arc::new(SaturationCurve::standard()),
            self.reference,
            self.scenario.heat.clone(),
            self.scenario.loads.clone(),
        )?;
        self.scenario.validate()?;
        self.scenario.initial.resolve(&params)?;
        if let Some(m) = &self.manifold {
            if m.points < 2 || m.inputs_at_s.is_empty() {
                return Err(ConfigError::Invalid(
                    "manifold needs at least 2 points and one input time".into(),
                ));
            }
        }
        Ok((params, self.scenario.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for name in ["step", "periodic", "oracle", "step-5.1"] {
            let cfg = Config::preset(name).unwrap();
            let (params, sc) = cfg.build().unwrap();
            assert_eq!(params.network.n_sites(), 2);
            assert_eq!(sc.heat.len(), 2);
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_location() {
        let text = STEP.replace("[output]", "[output]\ncolour = \"red\"");
        let err = Config::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn dangling_pipe_end_is_reported() {
        let text = STEP.replace("head = \"site2\"", "head = \"site9\"");
        assert!(matches!(
            Config::from_toml(&text),
            Err(ConfigError::UnknownSite { .. })
        ));
    }
}
