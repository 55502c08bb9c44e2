//! Run configuration: one JSON document, strict keys, validated ranges.
//!
//! Everything a run needs flows from here — scenario, horizon, seeds,
//! population source, dynamics parameters, candidate blending, decision
//! rules, backend choice, and output paths. A parsed config serializes
//! back to an equivalent document.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::PostCaps;
use crate::content::SourceMix;
use crate::decision::DecisionRules;
use crate::recommender::{AffinityWeights, ScenarioKind};

/// Configuration problem, pointing at the offending key.
#[derive(Debug, Error)]
#[error("{key}: {reason}")]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

/// Where the population comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum PopulationSource {
    /// The bundled 22-profile fixture.
    Fixture,
    /// `n` seeded random agents.
    Generated { n: usize, seed: u64 },
}

impl Default for PopulationSource {
    fn default() -> Self {
        PopulationSource::Fixture
    }
}

/// Which decision backend drives interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendChoice {
    Deterministic,
    /// Live chat-completions endpoint; completions are recorded into
    /// `record_dir` when set.
    Llm {
        endpoint: String,
        model: String,
        #[serde(default = "default_max_in_flight")]
        max_in_flight: usize,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default)]
        record_dir: Option<String>,
    },
    /// Replay from a cassette directory; no network, loud cache misses.
    Replay {
        cassette_dir: String,
        #[serde(default = "default_model")]
        model: String,
    },
}

impl Default for BackendChoice {
    fn default() -> Self {
        BackendChoice::Deterministic
    }
}

fn default_max_in_flight() -> usize {
    4
}

fn default_timeout_secs() -> u64 {
    60
}

fn default_model() -> String {
    "default".to_string()
}

/// Output locations. With no directory set, small runs keep the
/// transcript in memory; disabling `write_transcript` keeps only counts,
/// which is what full-scale performance runs want.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputOptions {
    pub dir: Option<String>,
    pub write_transcript: bool,
    pub write_series: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions {
            dir: None,
            write_transcript: true,
            write_series: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    #[serde(default = "default_days")]
    pub days: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub population: PopulationSource,
    #[serde(default = "default_memory")]
    pub alpha: f64,
    #[serde(default = "default_memory")]
    pub beta: f64,
    #[serde(default = "default_drift_rate")]
    pub drift_rate: f64,
    #[serde(default)]
    pub posts_per_day: PostCaps,
    #[serde(default = "default_oversample")]
    pub oversample_factor: usize,
    #[serde(default)]
    pub source_mix: SourceMix,
    #[serde(default = "default_balance_ratio")]
    pub balance_ratio: f64,
    /// Weight of the political-distance term in affinity; the interest
    /// overlap term gets the complement.
    #[serde(default = "default_stance_weight")]
    pub stance_weight: f64,
    #[serde(default = "default_trending_threshold")]
    pub trending_threshold: f64,
    #[serde(default)]
    pub initial_polarization: f64,
    #[serde(default)]
    pub initial_engagement: f64,
    #[serde(default)]
    pub backend: BackendChoice,
    #[serde(default)]
    pub decision_rules: DecisionRules,
    #[serde(default)]
    pub output: OutputOptions,
}

fn default_days() -> u32 {
    365
}

fn default_seed() -> u64 {
    71
}

fn default_memory() -> f64 {
    0.9
}

fn default_drift_rate() -> f64 {
    0.05
}

fn default_oversample() -> usize {
    3
}

fn default_balance_ratio() -> f64 {
    0.5
}

fn default_stance_weight() -> f64 {
    0.6
}

fn default_trending_threshold() -> f64 {
    6.0
}

impl RunConfig {
    /// A fully defaulted config for the given scenario.
    pub fn for_scenario(scenario: ScenarioKind) -> Self {
        serde_json::from_value(serde_json::json!({ "scenario": scenario }))
            .expect("default config must deserialize")
    }

    pub fn affinity_weights(&self) -> AffinityWeights {
        AffinityWeights::from_stance_weight(self.stance_weight)
    }

    pub fn dynamics(&self) -> crate::dynamics::DynamicsParams {
        crate::dynamics::DynamicsParams {
            alpha: self.alpha,
            beta: self.beta,
            drift_rate: self.drift_rate,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |key: &str, v: f64| -> Result<(), ConfigError> {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::new(key, format!("out of range [0, 1]: {v}")))
            }
        };
        if self.days < 1 {
            return Err(ConfigError::new("days", "must be at least 1"));
        }
        unit("alpha", self.alpha)?;
        unit("beta", self.beta)?;
        unit("drift_rate", self.drift_rate)?;
        unit("balance_ratio", self.balance_ratio)?;
        unit("stance_weight", self.stance_weight)?;
        if self.posts_per_day.min < 1 || self.posts_per_day.min > self.posts_per_day.max {
            return Err(ConfigError::new(
                "posts_per_day",
                format!(
                    "must satisfy 1 <= min <= max, got {}..{}",
                    self.posts_per_day.min, self.posts_per_day.max
                ),
            ));
        }
        if self.oversample_factor < 1 {
            return Err(ConfigError::new("oversample_factor", "must be at least 1"));
        }
        self.source_mix
            .validate()
            .map_err(|reason| ConfigError::new("source_mix", reason))?;
        if !self.trending_threshold.is_finite()
            || !(1.0..=7.0).contains(&self.trending_threshold)
        {
            return Err(ConfigError::new(
                "trending_threshold",
                format!("out of range [1, 7]: {}", self.trending_threshold),
            ));
        }
        for (key, v) in [
            ("initial_polarization", self.initial_polarization),
            ("initial_engagement", self.initial_engagement),
        ] {
            if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                return Err(ConfigError::new(key, format!("out of range [-1, 1]: {v}")));
            }
        }
        if let PopulationSource::Generated { n, .. } = &self.population {
            if *n < 1 {
                return Err(ConfigError::new("population.n", "must be at least 1"));
            }
        }
        self.decision_rules
            .validate()
            .map_err(|reason| ConfigError::new("decision_rules", reason))?;
        self.affinity_weights()
            .validate()
            .map_err(|reason| ConfigError::new("stance_weight", reason))?;
        Ok(())
    }
}

fn map_serde_error(err: serde_json::Error) -> ConfigError {
    let msg = err.to_string();
    if let Some(rest) = msg.strip_prefix("missing field `") {
        if let Some(key) = rest.split('`').next() {
            return ConfigError::new(key, "required");
        }
    }
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        if let Some(key) = rest.split('`').next() {
            return ConfigError::new(key, "unknown key");
        }
    }
    ConfigError::new("config", msg)
}

/// Parse and validate a config document.
pub fn parse_config_str(json: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = serde_json::from_str(json).map_err(map_serde_error)?;
    config.validate()?;
    Ok(config)
}

/// Parse and validate a config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
    parse_config_str(&raw)
}
