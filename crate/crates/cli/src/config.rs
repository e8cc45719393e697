//! Suite configuration: one TOML file with a section per planner.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use strider_core::fixture;
use strider_core::footsteps::{BaselinePolicy, StepParams, DEFAULT_STEP_CAP};
use strider_core::kick::{default_templates, FieldModel, KickTemplate, StrategyParams};
use strider_core::kinematics::{Configuration, RobotModel};
use strider_core::walk::{WalkConfig, WalkParams};
use strider_core::wbik::IkParams;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// URDF file, relative to the config file. The bundled biped when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robot_model: Option<PathBuf>,
    /// Directory of saved playbook scenarios, relative to the config file.
    pub playbook_dir: PathBuf,
    pub step_cap: usize,
    pub steps: StepParams,
    pub policy: BaselinePolicy,
    pub walk: WalkParams,
    pub ik: IkParams,
    pub field: FieldModel,
    pub strategy: StrategyParams,
    pub templates: Vec<KickTemplate>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            robot_model: None,
            playbook_dir: PathBuf::from("playbook"),
            step_cap: DEFAULT_STEP_CAP,
            steps: StepParams::default(),
            policy: BaselinePolicy::default(),
            walk: WalkParams::default(),
            ik: IkParams::default(),
            field: FieldModel::default(),
            strategy: StrategyParams::default(),
            templates: default_templates(),
        }
    }
}

impl SuiteConfig {
    /// Parses a config file; unknown keys at any depth are errors.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let mut unknown = Vec::new();
        let de = toml::Deserializer::new(text);
        let config: Self = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| CliError::input("bad_config", e.to_string()))?;
        if !unknown.is_empty() {
            return Err(CliError::input("bad_config", format!("unknown keys: {}", unknown.join(", "))));
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |e: String| CliError::input("bad_config", e);
        self.steps.validate().map_err(bad)?;
        self.walk.validate().map_err(|e| bad(e.to_string()))?;
        self.ik.validate().map_err(|e| bad(e.to_string()))?;
        self.field.validate().map_err(|e| bad(e.to_string()))?;
        self.strategy.validate().map_err(|e| bad(e.to_string()))?;
        if self.templates.is_empty() {
            return Err(bad("at least one kick template is required".into()));
        }
        for t in &self.templates {
            t.validate().map_err(|e| bad(e.to_string()))?;
        }
        Ok(())
    }

    pub fn strategy_config(&self) -> StrategyConfig {
        StrategyConfig {
            field: self.field,
            strategy: self.strategy.clone(),
            templates: self.templates.clone(),
        }
    }

    pub fn with_strategy(&self, s: StrategyConfig) -> Self {
        Self {
            field: s.field,
            strategy: s.strategy,
            templates: s.templates,
            ..self.clone()
        }
    }

    pub fn walk_config(&self) -> WalkConfig {
        WalkConfig {
            steps: self.steps,
            policy: self.policy,
            walk: self.walk.clone(),
            ik: self.ik.clone(),
            step_cap: self.step_cap,
        }
    }
}

/// The part of the configuration that the HTTP API can read and change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub field: FieldModel,
    pub strategy: StrategyParams,
    pub templates: Vec<KickTemplate>,
}

impl StrategyConfig {
    /// Parses a JSON document; unknown keys at any depth are errors.
    pub fn from_json(value: serde_json::Value) -> Result<Self, CliError> {
        let mut unknown = Vec::new();
        let config: Self = serde_ignored::deserialize(value, |path| unknown.push(path.to_string()))
            .map_err(|e| CliError::input("bad_config", e.to_string()))?;
        if !unknown.is_empty() {
            return Err(CliError::input("bad_config", format!("unknown keys: {}", unknown.join(", "))));
        }
        Ok(config)
    }
}

/// A validated configuration with its robot model loaded and paths resolved.
#[derive(Debug, Clone)]
pub struct Suite {
    pub config: SuiteConfig,
    pub model: RobotModel,
    pub standing: Configuration,
    pub playbook_dir: PathBuf,
}

impl Suite {
    /// Loads `path`, or the defaults when `None`. Relative paths inside the
    /// file resolve against its directory.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let (config, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    if e.kind() == std::io::ErrorKind::NotFound {
                        CliError::input("config_not_found", format!("{}: {e}", p.display()))
                    } else {
                        CliError::io(p, e)
                    }
                })?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (SuiteConfig::from_toml(&text)?, base)
            }
            None => (SuiteConfig::default(), PathBuf::from(".")),
        };
        Self::from_config(config, &base)
    }

    pub fn from_config(config: SuiteConfig, base: &Path) -> Result<Self, CliError> {
        config.validate()?;
        let model = match &config.robot_model {
            None => fixture::biped(),
            Some(rel) => {
                let path = base.join(rel);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    CliError::input("model_not_found", format!("{}: {e}", path.display()))
                })?;
                RobotModel::from_urdf_str(&text)
                    .map_err(|e| CliError::input("bad_model", format!("{}: {e}", path.display())))?
            }
        };
        for frame in [&config.ik.frames.trunk, &config.ik.frames.left_sole, &config.ik.frames.right_sole] {
            if model.frame_id(frame).is_err() {
                return Err(CliError::input("bad_model", format!("robot model has no frame `{frame}`")));
            }
        }
        let standing = fixture::standing_configuration(&model);
        let playbook_dir = base.join(&config.playbook_dir);
        Ok(Self {
            config,
            model,
            standing,
            playbook_dir,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = SuiteConfig::default();
        let back = SuiteConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = SuiteConfig::from_toml("[strategy]\nt_k = 4.0\n").unwrap();
        assert_eq!(c.strategy.t_k, 4.0);
        assert_eq!(c.field, FieldModel::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = SuiteConfig::from_toml("[strategy]\ntk = 4.0\n").unwrap_err();
        assert_eq!(err.code, "bad_config");
    }
}
