//! Run settings resolved from defaults, an optional `key=value` config
//! file, and command-line flags, in that priority order.

use std::path::Path;

use dgnn_core::eval::FeatureMode;
use dgnn_core::model::HyperParams;
use dgnn_core::train::{OptimizerKind, Task, TrainConfig};

use crate::CliError;

/// Everything a run needs besides file paths. Structural knobs live in
/// `hp`, loop knobs in `train`; the rest shape loading and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub hp: HyperParams,
    pub train: TrainConfig,
    pub feature_mode: FeatureMode,
    /// Engine time-unit size when loading timestamps (86400 = days).
    pub time_unit_seconds: f64,
    /// Sort unsorted input instead of rejecting it.
    pub sort: bool,
}

impl Default for Settings {
    fn default() -> Settings {
        Settings {
            hp: HyperParams::default(),
            train: TrainConfig::default(),
            feature_mode: FeatureMode::Projected,
            time_unit_seconds: 86_400.0,
            sort: false,
        }
    }
}

/// Flag values captured by the argument parser; `None` keeps whatever
/// the config file or default said.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub dim: Option<usize>,
    pub tau: Option<f64>,
    pub q: Option<usize>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub optimizer: Option<String>,
    pub task: Option<String>,
    pub labeled_fraction: Option<f64>,
    pub feature_mode: Option<String>,
    pub time_intervals: Option<String>,
    pub propagation: Option<String>,
    pub attention: Option<String>,
    pub time_unit_seconds: Option<f64>,
    pub sort: bool,
}

impl Settings {
    /// Defaults, then the config file (if given), then flags.
    pub fn resolve(config: Option<&Path>, flags: &Overrides) -> Result<Settings, CliError> {
        let mut s = Settings::default();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
            s.apply_file(&text)?;
        }
        s.apply_overrides(flags)?;
        if s.train.epochs == 0 {
            return Err(CliError::Input("epochs must be at least 1".into()));
        }
        Ok(s)
    }

    /// Apply one `key=value` per line; `#` comments and blanks skipped.
    pub fn apply_file(&mut self, text: &str) -> Result<(), CliError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                CliError::Input(format!("config line {line}: expected key=value, got {trimmed:?}"))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| CliError::Input(format!("config line {line}: {}", e.message())))?;
        }
        Ok(())
    }

    fn apply_overrides(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(v) = o.dim {
            self.hp.dim = v;
        }
        if let Some(v) = o.tau {
            self.hp.tau = v;
        }
        if let Some(v) = o.q {
            self.train.negative_samples = v;
        }
        if let Some(v) = o.lr {
            self.train.lr = v;
        }
        if let Some(v) = o.batch {
            self.train.batch_size = v;
        }
        if let Some(v) = o.epochs {
            self.train.epochs = v;
        }
        if let Some(v) = o.seed {
            self.train.seed = v;
        }
        if let Some(v) = &o.optimizer {
            self.train.optimizer = parse_optimizer(v)?;
        }
        if let Some(v) = &o.task {
            self.train.task = parse_task(v)?;
        }
        if let Some(v) = o.labeled_fraction {
            self.train.labeled_fraction = v;
        }
        if let Some(v) = &o.feature_mode {
            self.feature_mode = parse_feature_mode(v)?;
        }
        if let Some(v) = &o.time_intervals {
            self.hp.time_intervals_enabled = parse_bool(v)?;
        }
        if let Some(v) = &o.propagation {
            self.hp.propagation_enabled = parse_bool(v)?;
        }
        if let Some(v) = &o.attention {
            self.hp.attention_enabled = parse_bool(v)?;
        }
        if let Some(v) = o.time_unit_seconds {
            self.time_unit_seconds = v;
        }
        if o.sort {
            self.sort = true;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "dim" => self.hp.dim = parse_num(key, value)?,
            "tau" => self.hp.tau = parse_num(key, value)?,
            "q" => self.train.negative_samples = parse_num(key, value)?,
            "lr" => self.train.lr = parse_num(key, value)?,
            "batch" => self.train.batch_size = parse_num(key, value)?,
            "epochs" => self.train.epochs = parse_num(key, value)?,
            "seed" => self.train.seed = parse_num(key, value)?,
            "optimizer" => self.train.optimizer = parse_optimizer(value)?,
            "task" => self.train.task = parse_task(value)?,
            "labeled_fraction" => self.train.labeled_fraction = parse_num(key, value)?,
            "feature_mode" => self.feature_mode = parse_feature_mode(value)?,
            "time_intervals" => self.hp.time_intervals_enabled = parse_bool(value)?,
            "propagation" => self.hp.propagation_enabled = parse_bool(value)?,
            "attention" => self.hp.attention_enabled = parse_bool(value)?,
            "time_unit_seconds" => self.time_unit_seconds = parse_num(key, value)?,
            "sort" => self.sort = parse_bool(value)?,
            _ => return Err(CliError::Input(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Input(format!("{key}: cannot parse {value:?}: {e}")))
}

pub fn parse_bool(value: &str) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Input(format!(
            "expected on/off, got {value:?}"
        ))),
    }
}

pub fn parse_optimizer(value: &str) -> Result<OptimizerKind, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "adam" => Ok(OptimizerKind::Adam),
        "sgd" => Ok(OptimizerKind::Sgd),
        _ => Err(CliError::Input(format!(
            "expected adam or sgd, got {value:?}"
        ))),
    }
}

pub fn parse_task(value: &str) -> Result<Task, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "lp" | "link_prediction" => Ok(Task::LinkPrediction),
        "nc" | "node_classification" => Ok(Task::NodeClassification),
        _ => Err(CliError::Input(format!(
            "expected lp or nc, got {value:?}"
        ))),
    }
}

pub fn parse_feature_mode(value: &str) -> Result<FeatureMode, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "projected" => Ok(FeatureMode::Projected),
        "original" => Ok(FeatureMode::Original),
        _ => Err(CliError::Input(format!(
            "expected projected or original, got {value:?}"
        ))),
    }
}

pub fn task_name(task: Task) -> &'static str {
    match task {
        Task::LinkPrediction => "link_prediction",
        Task::NodeClassification => "node_classification",
    }
}

pub fn feature_mode_name(mode: FeatureMode) -> &'static str {
    match mode {
        FeatureMode::Projected => "projected",
        FeatureMode::Original => "original",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags_priority() {
        let mut s = Settings::default();
        s.apply_file("dim=16\nlr = 0.01\n# comment\n\ntau=7\n").unwrap();
        assert_eq!(s.hp.dim, 16);
        assert_eq!(s.train.lr, 0.01);
        assert_eq!(s.hp.tau, 7.0);

        let flags = Overrides {
            dim: Some(32),
            ..Overrides::default()
        };
        s.apply_overrides(&flags).unwrap();
        assert_eq!(s.hp.dim, 32);
        assert_eq!(s.hp.tau, 7.0, "untouched keys survive");
    }

    #[test]
    fn unknown_key_and_bad_values_are_input_errors() {
        let mut s = Settings::default();
        let err = s.apply_file("bogus=1\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.message().contains("bogus"), "{err}");

        let err = s.apply_file("dim=abc\n").unwrap_err();
        assert!(err.message().contains("line 1"), "{err}");

        let err = s.apply_file("no_equals_sign\n").unwrap_err();
        assert!(err.message().contains("key=value"), "{err}");
    }

    #[test]
    fn toggles_and_enums_parse_both_spellings() {
        let mut s = Settings::default();
        s.apply_file("time_intervals=off\npropagation=false\nattention=0\n")
            .unwrap();
        assert!(!s.hp.time_intervals_enabled);
        assert!(!s.hp.propagation_enabled);
        assert!(!s.hp.attention_enabled);
        s.apply_file("task=node_classification\noptimizer=sgd\nfeature_mode=original\n")
            .unwrap();
        assert_eq!(s.train.task, Task::NodeClassification);
        assert_eq!(s.train.optimizer, OptimizerKind::Sgd);
        assert_eq!(s.feature_mode, FeatureMode::Original);
    }
}
