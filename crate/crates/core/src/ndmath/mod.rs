//! Dense `f64` tensors and a reverse-mode differentiation tape.
//!
//! [`Tensor`] is a plain value type with the handful of dense ops the
//! model needs (matrix-vector product, elementwise arithmetic,
//! activations, softmax). [`Tape`] records a forward computation over
//! tensors and differentiates any recorded scalar with one reverse
//! sweep. [`finite_diff_check`] is the independent oracle used to
//! validate tape gradients.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{central_diff_gradient, finite_diff_check};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

/// Errors from tensor and tape operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MathError {
    /// Operand shapes are incompatible for the named op.
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// Argument outside the op's domain (empty softmax, bad step size, ...).
    #[error("{op}: {msg}")]
    Domain { op: &'static str, msg: String },
    /// A NaN or infinity reached the named op.
    #[error("{op}: non-finite value")]
    NonFinite { op: &'static str },
}

impl MathError {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        MathError::Domain {
            op,
            msg: msg.into(),
        }
    }
}
