//! The model proper: parameter tree, per-event update and propagation
//! units, and the engine that orchestrates them over an event stream.

mod engine;
mod params;
pub mod units;

pub use engine::{apply_event, apply_stream, BatchRunner, EventStats, ModelError, NodeVars};
pub use params::{
    GateParams, InteractParams, LinkProjParams, MergeParams, ModelParams, PropParams,
    UpdateUnitParams,
};

/// Decay applied to time-sensitive quantities; both choices are
/// strictly decreasing with value 1 at zero interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayKind {
    /// 1 / ln(e + dt). The default; long-tailed, from the time-aware
    /// LSTM family this model builds on.
    ReciprocalLog,
    /// exp(-dt). Kept as an alternative for experimentation.
    Exponential,
}

/// Model-shape and variant knobs. The interaction activation is fixed
/// to tanh (zero-centered, matching the recurrent unit's internals);
/// the three flags switch off whole mechanisms to form reduced model
/// variants for ablation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperParams {
    /// Embedding dimension d.
    pub dim: usize,
    /// Propagation threshold in days: neighbors whose last interaction
    /// is older than this receive nothing.
    pub tau: f64,
    pub decay: DecayKind,
    pub propagation_enabled: bool,
    pub time_intervals_enabled: bool,
    pub attention_enabled: bool,
}

impl HyperParams {
    pub fn new(dim: usize) -> HyperParams {
        HyperParams {
            dim,
            ..HyperParams::default()
        }
    }
}

impl Default for HyperParams {
    fn default() -> HyperParams {
        HyperParams {
            dim: 64,
            tau: 50.0,
            decay: DecayKind::ReciprocalLog,
            propagation_enabled: true,
            time_intervals_enabled: true,
            attention_enabled: true,
        }
    }
}
