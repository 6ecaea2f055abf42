//! Run configuration: a flat `key = value` text format covering every
//! model and training knob. Unknown keys are rejected so typos fail
//! loudly instead of silently running defaults.

use std::path::Path;

use thiserror::Error;

use crate::eval::FeatureMode;
use crate::model::{DecayKind, HyperParams};
use crate::train::{OptimizerKind, Task, TrainConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Everything a run needs: model structure, training knobs, and the
/// evaluation/IO settings shared by the commands.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub hyper: HyperParams,
    pub train: TrainConfig,
    pub feature_mode: FeatureMode,
    /// Raw timestamps are integer seconds; engine time is days.
    pub seconds_per_time_unit: f64,
    /// Drop the query node from its own candidate list when ranking.
    pub exclude_self: bool,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            hyper: HyperParams::default(),
            train: TrainConfig::default(),
            feature_mode: FeatureMode::Projected,
            seconds_per_time_unit: 86_400.0,
            exclude_self: false,
        }
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, got {v:?}")),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str, what: &str) -> Result<T, String> {
    v.parse()
        .map_err(|_| format!("expected {what}, got {v:?}"))
}

impl RunConfig {
    /// Parse the `key = value` format. Blank lines and lines starting
    /// with `#` are skipped; every key must be known; duplicate keys
    /// are rejected.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let at = |msg: String| ConfigError::Line { line, msg };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got {trimmed:?}")))?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(at(format!("duplicate key {key:?}")));
            }
            let what = |msg: String| ConfigError::Line { line, msg };
            match key {
                "dim" => cfg.hyper.dim = parse_num(value, "a positive integer").map_err(what)?,
                "tau" => cfg.hyper.tau = parse_num(value, "a number of days").map_err(what)?,
                "decay" => {
                    cfg.hyper.decay = match value {
                        "reciprocal_log" => DecayKind::ReciprocalLog,
                        "exponential" => DecayKind::Exponential,
                        _ => {
                            return Err(what(format!(
                                "decay must be reciprocal_log or exponential, got {value:?}"
                            )))
                        }
                    }
                }
                "act" => {
                    // The activation is structural: only tanh is implemented.
                    if value != "tanh" {
                        return Err(what(format!(
                            "act only supports tanh, got {value:?}"
                        )));
                    }
                }
                "propagation_enabled" => {
                    cfg.hyper.propagation_enabled = parse_bool(value).map_err(what)?
                }
                "time_intervals_enabled" => {
                    cfg.hyper.time_intervals_enabled = parse_bool(value).map_err(what)?
                }
                "attention_enabled" => {
                    cfg.hyper.attention_enabled = parse_bool(value).map_err(what)?
                }
                "batch_size" => {
                    cfg.train.batch_size = parse_num(value, "a positive integer").map_err(what)?
                }
                "negative_samples" => {
                    cfg.train.negative_samples =
                        parse_num(value, "a non-negative integer").map_err(what)?
                }
                "lr" => cfg.train.lr = parse_num(value, "a learning rate").map_err(what)?,
                "epochs" => {
                    cfg.train.epochs = parse_num(value, "a non-negative integer").map_err(what)?
                }
                "optimizer" => {
                    cfg.train.optimizer = match value {
                        "adam" => OptimizerKind::Adam,
                        "sgd" => OptimizerKind::Sgd,
                        _ => {
                            return Err(what(format!(
                                "optimizer must be adam or sgd, got {value:?}"
                            )))
                        }
                    }
                }
                "seed" => cfg.train.seed = parse_num(value, "an unsigned integer").map_err(what)?,
                "task" => {
                    cfg.train.task = match value {
                        "link_prediction" => Task::LinkPrediction,
                        "node_classification" => Task::NodeClassification,
                        _ => {
                            return Err(what(format!(
                                "task must be link_prediction or node_classification, got {value:?}"
                            )))
                        }
                    }
                }
                "labeled_fraction" => {
                    cfg.train.labeled_fraction =
                        parse_num(value, "a percentage").map_err(what)?
                }
                "literal_negative_form" => {
                    cfg.train.literal_negative_form = parse_bool(value).map_err(what)?
                }
                "feature_mode" => {
                    cfg.feature_mode = match value {
                        "projected" => FeatureMode::Projected,
                        "original" => FeatureMode::Original,
                        _ => {
                            return Err(what(format!(
                                "feature_mode must be projected or original, got {value:?}"
                            )))
                        }
                    }
                }
                "seconds_per_time_unit" => {
                    cfg.seconds_per_time_unit =
                        parse_num(value, "a positive number").map_err(what)?
                }
                "exclude_self" => cfg.exclude_self = parse_bool(value).map_err(what)?,
                _ => return Err(what(format!("unknown key {key:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.hyper.dim == 0 {
            return Err(ConfigError::Invalid("dim must be at least 1".into()));
        }
        if !(self.hyper.tau >= 0.0) {
            return Err(ConfigError::Invalid(format!(
                "tau must be a non-negative number of days, got {}",
                self.hyper.tau
            )));
        }
        if !(self.seconds_per_time_unit > 0.0 && self.seconds_per_time_unit.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "seconds_per_time_unit must be positive, got {}",
                self.seconds_per_time_unit
            )));
        }
        self.train
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Render in the same format `parse` reads, listing every key.
    pub fn render(&self) -> String {
        let decay = match self.hyper.decay {
            DecayKind::ReciprocalLog => "reciprocal_log",
            DecayKind::Exponential => "exponential",
        };
        let optimizer = match self.train.optimizer {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        };
        let task = match self.train.task {
            Task::LinkPrediction => "link_prediction",
            Task::NodeClassification => "node_classification",
        };
        let feature_mode = match self.feature_mode {
            FeatureMode::Projected => "projected",
            FeatureMode::Original => "original",
        };
        format!(
            "dim = {}\ntau = {}\ndecay = {}\nact = tanh\npropagation_enabled = {}\n\
             time_intervals_enabled = {}\nattention_enabled = {}\nbatch_size = {}\n\
             negative_samples = {}\nlr = {}\nepochs = {}\noptimizer = {}\nseed = {}\n\
             task = {}\nlabeled_fraction = {}\nliteral_negative_form = {}\n\
             feature_mode = {}\nseconds_per_time_unit = {}\nexclude_self = {}\n",
            self.hyper.dim,
            self.hyper.tau,
            decay,
            self.hyper.propagation_enabled,
            self.hyper.time_intervals_enabled,
            self.hyper.attention_enabled,
            self.train.batch_size,
            self.train.negative_samples,
            self.train.lr,
            self.train.epochs,
            optimizer,
            self.train.seed,
            task,
            self.train.labeled_fraction,
            self.train.literal_negative_form,
            feature_mode,
            self.seconds_per_time_unit,
            self.exclude_self,
        )
    }
}
