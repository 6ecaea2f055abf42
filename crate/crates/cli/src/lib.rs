//! Library half of the `dgnn` binary: config resolution, the
//! checkpoint format, and the command implementations. Kept as a lib
//! so integration tests can open checkpoints and reuse the parsers.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod runs;

use dgnn_core::data::DataError;
use dgnn_core::eval::EvalError;
use dgnn_core::graph::GraphError;
use dgnn_core::model::ModelError;
use dgnn_core::ndmath::MathError;
use dgnn_core::train::TrainError;

/// Process exit codes: 0 success, 2 input error, 3 numeric failure.
#[derive(Debug)]
pub enum CliError {
    /// Bad file, config, flag, or cross-artifact mismatch.
    Input(String),
    /// Non-finite values or a numeric kernel failure mid-run.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numeric(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.message())
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Input(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> CliError {
        CliError::Input(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> CliError {
        match e {
            TrainError::InvalidConfig(_)
            | TrainError::MissingLabels
            | TrainError::EmptyNegativePool { .. }
            | TrainError::OptimizerMismatch(_) => CliError::Input(e.to_string()),
            TrainError::Math(_)
            | TrainError::Graph(_)
            | TrainError::Model(_)
            | TrainError::Numeric { .. }
            | TrainError::NonFiniteGradient { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        match e {
            EvalError::Math(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<MathError> for CliError {
    fn from(e: MathError) -> CliError {
        CliError::Numeric(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        CliError::Numeric(e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> CliError {
        CliError::Numeric(e.to_string())
    }
}
