use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{GraphError, GraphStore, InteractionEvent, NodeId, NodeState, Role};
use crate::model::units::{self, ParamVars};
use crate::model::{HyperParams, ModelParams};
use crate::ndmath::{Gradients, MathError, Tape, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("store dimension {store} does not match model dimension {model}")]
    DimMismatch { store: usize, model: usize },
}

/// Propagation bookkeeping for diagnostics and ablation reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EventStats {
    /// Influenced neighbors considered across all four role lists.
    pub prop_candidates: usize,
    /// Neighbors that passed the recency filter and received an update.
    pub prop_applied: usize,
}

impl EventStats {
    pub fn absorb(&mut self, other: EventStats) {
        self.prop_candidates += other.prop_candidates;
        self.prop_applied += other.prop_applied;
    }
}

/// A node's five state tensors lifted onto the tape.
#[derive(Clone, Copy, Debug)]
pub struct NodeVars {
    pub c_src: Var,
    pub h_src: Var,
    pub c_tgt: Var,
    pub h_tgt: Var,
    pub u: Var,
}

/// Runs events for one mini-batch on a single tape.
///
/// Node states are lifted lazily from the store on first touch and
/// evolve as tape vars; the store's adjacency and per-node clocks are
/// advanced immediately, but state tensors are only written back by
/// [`BatchRunner::finish`]. Writing back plain values severs the tape
/// history, which is exactly the truncation the training loop wants at
/// batch boundaries.
pub struct BatchRunner<'a> {
    tape: Tape,
    store: &'a mut GraphStore,
    pv: ParamVars,
    hp: HyperParams,
    working: BTreeMap<NodeId, NodeVars>,
    stats: EventStats,
}

impl<'a> BatchRunner<'a> {
    pub fn new(
        store: &'a mut GraphStore,
        params: &ModelParams,
        hp: &HyperParams,
    ) -> Result<BatchRunner<'a>, ModelError> {
        if store.dim() != params.dim() {
            return Err(ModelError::DimMismatch {
                store: store.dim(),
                model: params.dim(),
            });
        }
        let mut tape = Tape::new();
        let pv = units::mount_params(&mut tape, params)?;
        Ok(BatchRunner {
            tape,
            store,
            pv,
            hp: *hp,
            working: BTreeMap::new(),
            stats: EventStats::default(),
        })
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn tape_mut(&mut self) -> &mut Tape {
        &mut self.tape
    }

    pub fn param_vars(&self) -> &ParamVars {
        &self.pv
    }

    pub fn stats(&self) -> EventStats {
        self.stats
    }

    pub fn store(&self) -> &GraphStore {
        self.store
    }

    /// Current tape vars of `v`, registering and lifting it on first
    /// touch.
    pub fn node_vars(&mut self, v: NodeId) -> Result<NodeVars, ModelError> {
        if let Some(&vars) = self.working.get(&v) {
            return Ok(vars);
        }
        self.store.ensure_node(v);
        let state = self.store.state(v)?;
        let (c_src, h_src, c_tgt, h_tgt, u) = (
            state.c_src.clone(),
            state.h_src.clone(),
            state.c_tgt.clone(),
            state.h_tgt.clone(),
            state.u.clone(),
        );
        let vars = NodeVars {
            c_src: self.tape.leaf(c_src)?,
            h_src: self.tape.leaf(h_src)?,
            c_tgt: self.tape.leaf(c_tgt)?,
            h_tgt: self.tape.leaf(h_tgt)?,
            u: self.tape.leaf(u)?,
        };
        self.working.insert(v, vars);
        Ok(vars)
    }

    /// Current general features of `v` as a tape var.
    pub fn node_u(&mut self, v: NodeId) -> Result<Var, ModelError> {
        Ok(self.node_vars(v)?.u)
    }

    /// Apply one interaction: encode it, update both endpoints' role
    /// states, and (when enabled) propagate to recently active
    /// neighbors. Attention and the interaction encoding read pre-event
    /// features throughout; neighbor lists are captured before the edge
    /// is added.
    pub fn process_event(&mut self, ev: InteractionEvent) -> Result<(), ModelError> {
        self.store.check_order(ev.t)?;
        self.store.ensure_node(ev.src);
        self.store.ensure_node(ev.dst);
        let influenced = self.store.influenced_nodes(ev);

        let src_vars = self.node_vars(ev.src)?;
        let dst_vars = self.node_vars(ev.dst)?;
        let dt_src = delta_t(self.store.state(ev.src)?.last_event_time, ev.t);
        let dt_dst = delta_t(self.store.state(ev.dst)?.last_event_time, ev.t);

        // Pre-event features of everyone this event can reach, frozen
        // before any state mutates.
        let mut pre_u: BTreeMap<NodeId, Var> = BTreeMap::new();
        pre_u.insert(ev.src, src_vars.u);
        pre_u.insert(ev.dst, dst_vars.u);
        for (n, _) in influenced.iter_all() {
            if !pre_u.contains_key(&n) {
                let u = self.node_u(n)?;
                pre_u.insert(n, u);
            }
        }

        let e = units::interact(&mut self.tape, &self.pv.interact, src_vars.u, dst_vars.u)?;

        // Direct updates: source role of src, target role of dst, both
        // from pre-event state.
        let (c_s, h_s) = units::update_unit(
            &mut self.tape,
            &self.pv.s_update,
            src_vars.c_src,
            src_vars.h_src,
            e,
            dt_src,
            &self.hp,
        )?;
        let (c_g, h_g) = units::update_unit(
            &mut self.tape,
            &self.pv.g_update,
            dst_vars.c_tgt,
            dst_vars.h_tgt,
            e,
            dt_dst,
            &self.hp,
        )?;

        if ev.src == ev.dst {
            let u = units::merge(&mut self.tape, &self.pv.merge, h_s, h_g)?;
            self.working.insert(
                ev.src,
                NodeVars {
                    c_src: c_s,
                    h_src: h_s,
                    c_tgt: c_g,
                    h_tgt: h_g,
                    u,
                },
            );
        } else {
            let u_src = units::merge(&mut self.tape, &self.pv.merge, h_s, src_vars.h_tgt)?;
            self.working.insert(
                ev.src,
                NodeVars {
                    c_src: c_s,
                    h_src: h_s,
                    u: u_src,
                    ..src_vars
                },
            );
            let u_dst = units::merge(&mut self.tape, &self.pv.merge, dst_vars.h_src, h_g)?;
            self.working.insert(
                ev.dst,
                NodeVars {
                    c_tgt: c_g,
                    h_tgt: h_g,
                    u: u_dst,
                    ..dst_vars
                },
            );
        }

        if self.hp.propagation_enabled {
            let groups = [
                (src_vars.u, &influenced.src_sources, self.pv.prop.src_to_src, Role::Source),
                (src_vars.u, &influenced.src_targets, self.pv.prop.src_to_tgt, Role::Target),
                (dst_vars.u, &influenced.dst_sources, self.pv.prop.tgt_to_src, Role::Source),
                (dst_vars.u, &influenced.dst_targets, self.pv.prop.tgt_to_tgt, Role::Target),
            ];
            for (center_pre_u, list, w_hat, nbr_role) in groups {
                if list.is_empty() {
                    continue;
                }
                let nbr_us: Vec<Var> = list.iter().map(|(n, _)| pre_u[n]).collect();
                let weights = units::attention_weights(
                    &mut self.tape,
                    &nbr_us,
                    center_pre_u,
                    self.hp.attention_enabled,
                )?;
                // The transformed interaction is shared by every
                // neighbor in the group.
                let we = self.tape.matvec(w_hat, e)?;
                for (k, &(n, t_last)) in list.iter().enumerate() {
                    self.stats.prop_candidates += 1;
                    let delta = ev.t - t_last;
                    if units::filter_h(delta, self.hp.tau) == 0.0 {
                        continue;
                    }
                    let g_val = if self.hp.time_intervals_enabled {
                        units::decay_g(self.hp.decay, delta)?
                    } else {
                        1.0
                    };
                    let decayed = self.tape.scale(we, g_val)?;
                    let f_a = self.tape.index(weights, k)?;
                    let msg = self.tape.mul_scalar(decayed, f_a)?;

                    let nv = self.node_vars(n)?;
                    let updated = match nbr_role {
                        Role::Source => {
                            let c = self.tape.add(nv.c_src, msg)?;
                            let h = self.tape.tanh(c)?;
                            let u = units::merge(&mut self.tape, &self.pv.merge, h, nv.h_tgt)?;
                            NodeVars {
                                c_src: c,
                                h_src: h,
                                u,
                                ..nv
                            }
                        }
                        Role::Target => {
                            let c = self.tape.add(nv.c_tgt, msg)?;
                            let h = self.tape.tanh(c)?;
                            let u = units::merge(&mut self.tape, &self.pv.merge, nv.h_src, h)?;
                            NodeVars {
                                c_tgt: c,
                                h_tgt: h,
                                u,
                                ..nv
                            }
                        }
                    };
                    self.working.insert(n, updated);
                    self.stats.prop_applied += 1;
                }
            }
        }

        self.store.add_event(ev)?;
        self.store.set_last_event_time(ev.src, ev.t)?;
        self.store.set_last_event_time(ev.dst, ev.t)?;
        Ok(())
    }

    /// Differentiate a recorded scalar (typically the batch loss).
    pub fn backward(&self, root: Var) -> Result<Gradients, MathError> {
        self.tape.backward(root)
    }

    /// Write every touched node's current values back into the store as
    /// plain tensors and drop the tape. States keep their values but
    /// lose their history (truncation boundary).
    pub fn finish(self) -> Result<(), ModelError> {
        let BatchRunner {
            tape,
            store,
            working,
            ..
        } = self;
        for (v, vars) in working {
            let last_event_time = store.state(v)?.last_event_time;
            store.set_state(
                v,
                NodeState {
                    c_src: tape.value(vars.c_src).clone(),
                    h_src: tape.value(vars.h_src).clone(),
                    c_tgt: tape.value(vars.c_tgt).clone(),
                    h_tgt: tape.value(vars.h_tgt).clone(),
                    u: tape.value(vars.u).clone(),
                    last_event_time,
                },
            )?;
        }
        Ok(())
    }
}

/// Interval since the node's previous interaction; a node's first
/// interaction has no past to forget, so its interval is zero.
pub(crate) fn delta_t(last_event_time: Option<f64>, now: f64) -> f64 {
    match last_event_time {
        Some(prev) => now - prev,
        None => 0.0,
    }
}

/// Apply a single event outside any training context.
pub fn apply_event(
    store: &mut GraphStore,
    params: &ModelParams,
    hp: &HyperParams,
    ev: InteractionEvent,
) -> Result<EventStats, ModelError> {
    apply_stream(store, params, hp, std::slice::from_ref(&ev), 1)
}

/// Stream events through the model with fixed parameters (no
/// learning), chunking internally so tapes stay bounded. Used to build
/// features for evaluation and export.
pub fn apply_stream(
    store: &mut GraphStore,
    params: &ModelParams,
    hp: &HyperParams,
    events: &[InteractionEvent],
    chunk_size: usize,
) -> Result<EventStats, ModelError> {
    assert!(chunk_size >= 1, "chunk size must be positive");
    let mut stats = EventStats::default();
    for chunk in events.chunks(chunk_size) {
        let mut runner = BatchRunner::new(store, params, hp)?;
        for &ev in chunk {
            runner.process_event(ev)?;
        }
        stats.absorb(runner.stats());
        runner.finish()?;
    }
    Ok(stats)
}
