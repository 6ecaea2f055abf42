//! Streaming representation learning over temporal interaction graphs.
//!
//! The crate is organized bottom-up: [`ndmath`] provides dense `f64`
//! tensors and a reverse-mode differentiation tape; [`graph`] keeps
//! per-node model state plus a temporal adjacency that remembers who
//! interacted with whom and when; [`model`] implements the per-event
//! update and propagation rules on top of both; [`train`] adds losses,
//! negative sampling, and the mini-batch training loop; [`eval`]
//! computes ranking and classification metrics over chronological
//! splits. [`config`], [`checkpoint`], [`data`], and [`synth`] are the
//! surrounding plumbing: run configuration, binary snapshots, edge
//! stream / label file parsing, and a synthetic community stream for
//! tests and demos.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod eval;
pub mod graph;
pub mod model;
pub mod ndmath;
pub mod synth;
pub mod train;
