//! Engine configuration: defaults, a flat TOML file, then command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::GeneratorConfig;
use crate::hammer::HammerFallbackConfig;
use crate::search::SearchConfig;
use crate::step::Tactic;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    InProcess,
    /// `host:port` or `exec:<program> [args]`.
    Remote(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorChoice {
    Mock,
    Http,
    /// Memorized pairs from a dataset file.
    Dataset(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub search: SearchConfig,
    pub generator: GeneratorConfig,
    pub fallback: HammerFallbackConfig,
    pub backend: BackendChoice,
    pub generator_kind: GeneratorChoice,
    /// Theorem-level worker threads.
    pub jobs: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            search: SearchConfig::default(),
            generator: GeneratorConfig::default(),
            fallback: HammerFallbackConfig::default(),
            backend: BackendChoice::InProcess,
            generator_kind: GeneratorChoice::Mock,
            jobs: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad config: {0}")]
    Parse(String),
    #[error("bad value for `{key}`: {message}")]
    Value { key: String, message: String },
}

/// Every key the config file accepts. Names mirror the config fields;
/// unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatConfig {
    pub alpha: Option<f64>,
    pub top_k: Option<usize>,
    pub candidates_per_state: Option<usize>,
    pub max_iterations: Option<usize>,
    pub node_budget: Option<usize>,
    pub time_limit_ms: Option<u64>,
    pub step_timeout_ms: Option<u64>,
    pub revision_enabled: Option<bool>,
    pub filtering_enabled: Option<bool>,
    pub equivalence_dedup: Option<bool>,
    pub atom_limit: Option<usize>,

    pub tactic_set: Option<Vec<String>>,
    pub premise_pool_size: Option<usize>,
    pub top_matches: Option<usize>,
    pub max_edit_distance: Option<usize>,
    pub revision_budget: Option<usize>,

    pub n_candidates: Option<usize>,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub max_tokens: Option<usize>,
    pub seed: Option<u64>,
    pub endpoint: Option<String>,
    pub perturb: Option<bool>,
    pub max_in_flight: Option<usize>,
    pub request_timeout_ms: Option<u64>,

    pub fallback_enabled: Option<bool>,
    pub m_states: Option<usize>,
    pub premise_limit: Option<usize>,
    pub per_state_timeout_ms: Option<u64>,
    pub mesh_weight: Option<f64>,
    pub hammer_max_depth: Option<usize>,

    /// `in_process` or `remote`.
    pub backend: Option<String>,
    pub backend_endpoint: Option<String>,
    /// `mock`, `http`, or `dataset`.
    pub generator: Option<String>,
    pub dataset: Option<String>,
    pub jobs: Option<usize>,
}

macro_rules! set {
    ($target:expr, $value:expr) => {
        if let Some(v) = $value.clone() {
            $target = v;
        }
    };
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Writes every set key onto `config`; unset keys leave it untouched.
    pub fn apply(&self, config: &mut EngineConfig) -> Result<(), ConfigError> {
        let s = &mut config.search;
        set!(s.alpha, self.alpha);
        set!(s.top_k, self.top_k);
        set!(s.candidates_per_state, self.candidates_per_state);
        set!(s.max_iterations, self.max_iterations);
        set!(s.node_budget, self.node_budget);
        set!(s.time_limit_ms, self.time_limit_ms);
        set!(s.step_timeout_ms, self.step_timeout_ms);
        set!(s.revision_enabled, self.revision_enabled);
        set!(s.filtering_enabled, self.filtering_enabled);
        set!(s.equivalence_dedup, self.equivalence_dedup);
        set!(s.atom_limit, self.atom_limit);

        let r = &mut s.revision;
        if let Some(names) = &self.tactic_set {
            r.tactic_set = names
                .iter()
                .map(|n| {
                    Tactic::from_name(n).ok_or_else(|| ConfigError::Value {
                        key: "tactic_set".into(),
                        message: format!("unknown tactic `{n}`"),
                    })
                })
                .collect::<Result<_, _>>()?;
        }
        set!(r.premise_pool_size, self.premise_pool_size);
        set!(r.top_matches, self.top_matches);
        set!(r.max_edit_distance, self.max_edit_distance);
        set!(r.budget, self.revision_budget);

        let g = &mut config.generator;
        set!(g.n_candidates, self.n_candidates);
        set!(g.temperature, self.temperature);
        set!(g.top_p, self.top_p);
        set!(g.max_tokens, self.max_tokens);
        set!(g.seed, self.seed);
        if self.endpoint.is_some() {
            g.endpoint = self.endpoint.clone();
        }
        set!(g.perturb, self.perturb);
        set!(g.max_in_flight, self.max_in_flight);
        set!(g.request_timeout_ms, self.request_timeout_ms);

        let f = &mut config.fallback;
        set!(f.enabled, self.fallback_enabled);
        set!(f.m_states, self.m_states);
        set!(f.premise_limit, self.premise_limit);
        set!(f.per_state_timeout_ms, self.per_state_timeout_ms);
        set!(f.mesh_weight, self.mesh_weight);
        set!(f.max_depth, self.hammer_max_depth);

        if let Some(kind) = &self.backend {
            config.backend = match kind.as_str() {
                "in_process" => BackendChoice::InProcess,
                "remote" => {
                    let endpoint = self.backend_endpoint.clone().ok_or_else(|| ConfigError::Value {
                        key: "backend".into(),
                        message: "remote backend needs backend_endpoint".into(),
                    })?;
                    BackendChoice::Remote(endpoint)
                }
                other => {
                    return Err(ConfigError::Value {
                        key: "backend".into(),
                        message: format!("expected in_process or remote, got `{other}`"),
                    })
                }
            };
        } else if let Some(endpoint) = &self.backend_endpoint {
            config.backend = BackendChoice::Remote(endpoint.clone());
        }
        if let Some(kind) = &self.generator {
            config.generator_kind = match kind.as_str() {
                "mock" => GeneratorChoice::Mock,
                "http" => GeneratorChoice::Http,
                "dataset" => GeneratorChoice::Dataset(self.dataset.clone().ok_or_else(|| ConfigError::Value {
                    key: "generator".into(),
                    message: "dataset generator needs `dataset`".into(),
                })?),
                other => {
                    return Err(ConfigError::Value {
                        key: "generator".into(),
                        message: format!("expected mock, http, or dataset, got `{other}`"),
                    })
                }
            };
        }
        set!(config.jobs, self.jobs);
        Ok(())
    }

    /// Keys set in `over` win; everything else comes from `self`.
    pub fn overlay(&self, over: &FlatConfig) -> FlatConfig {
        let mut base = serde_json::to_value(self).expect("serializes");
        let top = serde_json::to_value(over).expect("serializes");
        if let (Some(b), Some(t)) = (base.as_object_mut(), top.as_object()) {
            for (k, v) in t {
                if !v.is_null() {
                    b.insert(k.clone(), v.clone());
                }
            }
        }
        serde_json::from_value(base).expect("round trip")
    }
}

/// Defaults, then the file, then the flags.
pub fn resolve(file: Option<&FlatConfig>, flags: &FlatConfig) -> Result<EngineConfig, ConfigError> {
    let merged = match file {
        Some(f) => f.overlay(flags),
        None => flags.clone(),
    };
    let mut config = EngineConfig::default();
    merged.apply(&mut config)?;
    Ok(config)
}
