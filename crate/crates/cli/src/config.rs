//! The single JSON configuration document.

use std::path::Path;

use climbloc::eval::default_thresholds;
use climbloc::fcnn::FcnnConfig;
use climbloc::fusion::{FusionConfig, UkfConfig};
use climbloc::runner::RunnerConfig;
use climbloc::sim::ScenarioConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSeeds {
    /// Scenario used to fit the sensor models.
    pub sensor_scenario: u64,
    /// Scenario used to fit the fusion stage.
    pub fusion_scenario: u64,
}

impl Default for TrainingSeeds {
    fn default() -> Self {
        Self {
            sensor_scenario: 101,
            fusion_scenario: 202,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSection {
    #[serde(flatten)]
    pub scenario: ScenarioConfig,
    pub training_seeds: TrainingSeeds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NnetSection {
    /// Initialization and shuffling seed for the three networks.
    pub seed: u64,
}

impl Default for NnetSection {
    fn default() -> Self {
        Self { seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionSection {
    #[serde(flatten)]
    pub model: FusionConfig,
    /// Epoch clock, EKF and classical-solver settings shared by all algorithms.
    pub runner: RunnerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub cdf_max: f64,
    pub cdf_step: f64,
    pub composite_k1: f64,
    pub composite_k2: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            cdf_max: 5.0,
            cdf_step: 0.05,
            composite_k1: 1.0,
            composite_k2: 0.0,
        }
    }
}

impl EvalSection {
    pub fn thresholds(&self) -> Vec<f64> {
        default_thresholds(self.cdf_max, self.cdf_step)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub sim: SimSection,
    pub nnet: NnetSection,
    pub fcnn: FcnnConfig,
    pub fusion: FusionSection,
    pub ukf: UkfConfig,
    pub eval: EvalSection,
}

impl AppConfig {
    pub fn validate(&self) -> CliResult<()> {
        self.sim.scenario.validate()?;
        self.fcnn.validate()?;
        self.fusion.model.validate()?;
        self.fusion.runner.validate()?;
        self.ukf.validate()?;
        if !(self.eval.cdf_step > 0.0 && self.eval.cdf_max > 0.0) {
            return Err(CliError::Config(
                "eval.cdf_step and eval.cdf_max must be positive".into(),
            ));
        }
        if self.eval.composite_k1 < 0.0 || self.eval.composite_k2 < 0.0 {
            return Err(CliError::Config(
                "eval composite weights must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: AppConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            CliError::Config(format!(
                "line {} column {}, field `{}`: {inner}",
                inner.line(),
                inner.column(),
                e.path()
            ))
        })?;
        // Flattened sections bypass `deny_unknown_fields`, so compare against
        // the canonical serialization instead.
        let given: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let canonical = serde_json::to_value(&cfg).expect("config serializes");
        if let Some(path) = unknown_key(&given, &canonical, String::new()) {
            return Err(CliError::Config(format!("unknown field `{path}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => Self::parse(&std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact canonical serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

fn unknown_key(
    given: &serde_json::Value,
    canonical: &serde_json::Value,
    path: String,
) -> Option<String> {
    use serde_json::Value;
    let join = |k: &str| {
        if path.is_empty() {
            k.to_string()
        } else {
            format!("{path}.{k}")
        }
    };
    match (given, canonical) {
        (Value::Object(g), Value::Object(c)) => g.iter().find_map(|(k, v)| match c.get(k) {
            None => Some(join(k)),
            Some(cv) => unknown_key(v, cv, join(k)),
        }),
        (Value::Array(g), Value::Array(c)) => g
            .iter()
            .zip(c)
            .enumerate()
            .find_map(|(i, (v, cv))| unknown_key(v, cv, format!("{path}[{i}]"))),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_nested_keys_are_rejected() {
        for doc in [
            r#"{"sim": {"durashun": 3}}"#,
            r#"{"fusion": {"runner": {"rate": 5}}}"#,
            r#"{"sim": {"gps": {"occlusions": [{"window": {"start": 1, "end": 2}, "bias": [0,0,0], "hdop_inflation": 1, "dropout_probability": 0, "x": 1}]}}}"#,
        ] {
            let err = AppConfig::parse(doc).unwrap_err();
            assert!(matches!(err, CliError::Config(_)), "{doc}");
        }
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = AppConfig::default();
        let back = AppConfig::parse(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn partial_document_fills_defaults() {
        let cfg = AppConfig::parse(r#"{"sim": {"duration": 30.0, "seed": 9}}"#).unwrap();
        assert_eq!(cfg.sim.scenario.duration, 30.0);
        assert_eq!(cfg.sim.scenario.seed, 9);
        assert_eq!(cfg.fcnn, FcnnConfig::default());
    }

    #[test]
    fn bad_dt_is_a_config_error() {
        let err = AppConfig::parse(r#"{"sim": {"dt": 0.0}}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn type_errors_name_the_field() {
        let err = AppConfig::parse("{\n \"ukf\": {\"alpha\": \"x\"}\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ukf.alpha") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn unknown_section_is_rejected() {
        assert!(AppConfig::parse(r#"{"simulation": {}}"#).is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let mut cfg = AppConfig::default();
        let h = cfg.hash();
        cfg.fusion.model.lambda = 0.5;
        assert_ne!(cfg.hash(), h);
    }
}
