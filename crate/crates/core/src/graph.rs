//! Temporal interaction graph: node registry, per-role neighbor sets
//! with last-interaction times, and the per-node recurrent state store.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ndmath::Tensor;

/// Dense internal node index. External string ids are mapped to these
/// by the data loader; synthetic streams use them directly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One directed interaction `src -> dst` at time `t`.
///
/// `t` is in engine time units (days); the data loader converts from
/// integer epoch seconds exactly once at ingestion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteractionEvent {
    pub src: NodeId,
    pub dst: NodeId,
    pub t: f64,
}

/// A node's role in an interaction: the actor (source) or the acted-on
/// (target). Each node keeps independent recurrent state per role.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Source,
    Target,
}

/// Recurrent state of one node: a (cell, hidden) pair per role plus the
/// merged general features, and the time of the node's last interaction
/// in either role.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeState {
    pub c_src: Tensor,
    pub h_src: Tensor,
    pub c_tgt: Tensor,
    pub h_tgt: Tensor,
    pub u: Tensor,
    pub last_event_time: Option<f64>,
}

impl NodeState {
    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn cell(&self, role: Role) -> &Tensor {
        match role {
            Role::Source => &self.c_src,
            Role::Target => &self.c_tgt,
        }
    }

    pub fn hidden(&self, role: Role) -> &Tensor {
        match role {
            Role::Source => &self.h_src,
            Role::Target => &self.h_tgt,
        }
    }
}

/// Per-role neighbor lists of one event's endpoints, captured just
/// before the event is applied. The interacting counterpart is excluded
/// from each list (it receives the direct update instead).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InfluencedSets {
    /// Source neighbors of the event's source: nodes that acted toward it.
    pub src_sources: Vec<(NodeId, f64)>,
    /// Target neighbors of the event's source: nodes it acted toward.
    pub src_targets: Vec<(NodeId, f64)>,
    /// Source neighbors of the event's target.
    pub dst_sources: Vec<(NodeId, f64)>,
    /// Target neighbors of the event's target.
    pub dst_targets: Vec<(NodeId, f64)>,
}

impl InfluencedSets {
    pub fn iter_all(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.src_sources
            .iter()
            .chain(&self.src_targets)
            .chain(&self.dst_sources)
            .chain(&self.dst_targets)
            .copied()
    }

    pub fn is_empty(&self) -> bool {
        self.src_sources.is_empty()
            && self.src_targets.is_empty()
            && self.dst_sources.is_empty()
            && self.dst_targets.is_empty()
    }

    /// Distinct influenced node ids, ascending.
    pub fn unique_nodes(&self) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self.iter_all().map(|(n, _)| n).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("event at time {next} precedes last applied event at time {prev}")]
    OutOfOrder { prev: f64, next: f64 },
    #[error("event time {0} is not finite")]
    InvalidTime(f64),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("state dimension {got} does not match store dimension {want}")]
    DimMismatch { want: usize, got: usize },
}

#[derive(Clone, Debug, Default)]
struct NeighborSets {
    /// N_s: neighbors that played source toward this node (u -> v).
    sources: BTreeMap<NodeId, f64>,
    /// N_g: neighbors this node played source toward (v -> u).
    targets: BTreeMap<NodeId, f64>,
}

/// The evolving graph: registered nodes with recurrent state, per-role
/// temporal adjacency, and the stream clock.
///
/// Single-writer by construction (`&mut self` for all mutation); event
/// application is order-dependent and strictly serialized. Newly seen
/// nodes get state tensors drawn i.i.d. uniform from [-0.1, 0.1] using
/// the store's seeded RNG, so two stores built with the same seed and
/// the same stream are identical.
#[derive(Clone)]
pub struct GraphStore {
    dim: usize,
    seed: u64,
    rng: ChaCha8Rng,
    states: BTreeMap<NodeId, NodeState>,
    adjacency: BTreeMap<NodeId, NeighborSets>,
    last_stream_time: Option<f64>,
}

impl GraphStore {
    pub fn new(dim: usize, seed: u64) -> GraphStore {
        assert!(dim >= 1, "state dimension must be at least 1");
        GraphStore {
            dim,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            states: BTreeMap::new(),
            adjacency: BTreeMap::new(),
            last_stream_time: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of registered nodes.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.states.contains_key(&v)
    }

    /// Registered node ids in ascending order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.states.keys().copied()
    }

    /// Time of the last applied event, if any.
    pub fn last_stream_time(&self) -> Option<f64> {
        self.last_stream_time
    }

    fn random_tensor(&mut self) -> Tensor {
        // O(1) scale: initial states are the only thing distinguishing
        // nodes, so they must be loud enough to survive the shared
        // recurrent dynamics.
        let data = (0..self.dim)
            .map(|_| self.rng.gen_range(-1.0..1.0))
            .collect();
        Tensor::vector(data)
    }

    /// Register `v` with randomly initialized state if unseen.
    ///
    /// Draw order is fixed (c_src, h_src, c_tgt, h_tgt, u) so a given
    /// seed and registration order always produce the same states.
    pub fn ensure_node(&mut self, v: NodeId) {
        if !self.states.contains_key(&v) {
            let state = NodeState {
                c_src: self.random_tensor(),
                h_src: self.random_tensor(),
                c_tgt: self.random_tensor(),
                h_tgt: self.random_tensor(),
                u: self.random_tensor(),
                last_event_time: None,
            };
            self.states.insert(v, state);
        }
    }

    /// Validate that `t` may be applied next (stream is non-decreasing).
    pub fn check_order(&self, t: f64) -> Result<(), GraphError> {
        if !t.is_finite() {
            return Err(GraphError::InvalidTime(t));
        }
        match self.last_stream_time {
            Some(prev) if t < prev => Err(GraphError::OutOfOrder { prev, next: t }),
            _ => Ok(()),
        }
    }

    /// Apply one event: register unseen endpoints, then add/refresh the
    /// directed edge in both role-adjacency maps. Self-loops are
    /// permitted and stored. Does not touch recurrent state; the model
    /// engine owns state evolution.
    pub fn add_event(&mut self, ev: InteractionEvent) -> Result<(), GraphError> {
        self.check_order(ev.t)?;
        self.ensure_node(ev.src);
        self.ensure_node(ev.dst);
        self.adjacency
            .entry(ev.src)
            .or_default()
            .targets
            .insert(ev.dst, ev.t);
        self.adjacency
            .entry(ev.dst)
            .or_default()
            .sources
            .insert(ev.src, ev.t);
        self.last_stream_time = Some(ev.t);
        Ok(())
    }

    /// Source neighbors of `v` (nodes u with an edge u -> v) and the
    /// last time each such edge fired, ascending by id.
    pub fn sources_of(&self, v: NodeId) -> Vec<(NodeId, f64)> {
        self.adjacency
            .get(&v)
            .map(|n| n.sources.iter().map(|(&id, &t)| (id, t)).collect())
            .unwrap_or_default()
    }

    /// Target neighbors of `v` (nodes u with an edge v -> u), ascending
    /// by id.
    pub fn targets_of(&self, v: NodeId) -> Vec<(NodeId, f64)> {
        self.adjacency
            .get(&v)
            .map(|n| n.targets.iter().map(|(&id, &t)| (id, t)).collect())
            .unwrap_or_default()
    }

    /// Neighbor lists of both endpoints as of just before `ev`, with
    /// each endpoint excluded from the other's lists (the counterpart
    /// receives the direct update, not propagation). Call before
    /// [`GraphStore::add_event`] for the same event.
    pub fn influenced_nodes(&self, ev: InteractionEvent) -> InfluencedSets {
        let keep = |other: NodeId| move |&(n, _): &(NodeId, f64)| n != other;
        InfluencedSets {
            src_sources: self
                .sources_of(ev.src)
                .into_iter()
                .filter(keep(ev.dst))
                .collect(),
            src_targets: self
                .targets_of(ev.src)
                .into_iter()
                .filter(keep(ev.dst))
                .collect(),
            dst_sources: self
                .sources_of(ev.dst)
                .into_iter()
                .filter(keep(ev.src))
                .collect(),
            dst_targets: self
                .targets_of(ev.dst)
                .into_iter()
                .filter(keep(ev.src))
                .collect(),
        }
    }

    pub fn state(&self, v: NodeId) -> Result<&NodeState, GraphError> {
        self.states.get(&v).ok_or(GraphError::UnknownNode(v))
    }

    /// Replace the whole state of `v` atomically.
    pub fn set_state(&mut self, v: NodeId, state: NodeState) -> Result<(), GraphError> {
        for t in [&state.c_src, &state.h_src, &state.c_tgt, &state.h_tgt, &state.u] {
            if t.len() != self.dim {
                return Err(GraphError::DimMismatch {
                    want: self.dim,
                    got: t.len(),
                });
            }
        }
        match self.states.get_mut(&v) {
            Some(slot) => {
                *slot = state;
                Ok(())
            }
            None => Err(GraphError::UnknownNode(v)),
        }
    }

    pub fn set_last_event_time(&mut self, v: NodeId, t: f64) -> Result<(), GraphError> {
        match self.states.get_mut(&v) {
            Some(s) => {
                s.last_event_time = Some(t);
                Ok(())
            }
            None => Err(GraphError::UnknownNode(v)),
        }
    }
}
