//! Streaming trainer: minibatched loss construction over the event
//! stream, reverse-mode gradients, SGD/Adam parameter updates, and
//! truncated backpropagation at batch boundaries.
//!
//! Each minibatch is a contiguous chunk of the time-ordered stream.
//! Losses are recorded on the same tape that processes the events, so
//! gradients flow through every state update inside the batch; at the
//! batch boundary the updated states are written back to the store as
//! plain values, which truncates the gradient history there.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{GraphError, GraphStore, InteractionEvent, NodeId, Role};
use crate::model::units::LinkProjVars;
use crate::model::{BatchRunner, EventStats, HyperParams, ModelError, ModelParams};
use crate::ndmath::{MathError, Tape, Tensor, Var};

/// Training objective selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    LinkPrediction,
    NodeClassification,
}

/// Parameter update rule selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Errors raised while training.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("negative sampling: candidate pool is empty after excluding node {positive}")]
    EmptyNegativePool { positive: NodeId },
    #[error("numeric failure in batch {batch}: {detail} (parameter norm {param_norm:.6e})")]
    Numeric {
        batch: usize,
        detail: String,
        param_norm: f64,
    },
    #[error("non-finite gradient for parameter {name}")]
    NonFiniteGradient { name: &'static str },
    #[error("optimizer state does not match parameters: {0}")]
    OptimizerMismatch(String),
    #[error("classification training requires node labels")]
    MissingLabels,
}

/// Run-level training knobs. Structural knobs (dimension, decay, the
/// recency horizon, unit toggles) live in [`HyperParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Events per minibatch.
    pub batch_size: usize,
    /// Negative samples drawn per positive event (link prediction).
    pub negative_samples: usize,
    /// Learning rate. Zero is allowed and freezes the parameters,
    /// which is useful as a diagnostic.
    pub lr: f64,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    /// Base seed; parameter init, state init, and negative sampling
    /// draw from separate streams derived from it.
    pub seed: u64,
    pub task: Task,
    /// Percent of visible nodes whose labels are used when training
    /// classification (consumed by the split logic, not the epoch loop).
    pub labeled_fraction: f64,
    /// Score the negative term as `-log sigma(s)` instead of the
    /// default `-log sigma(-s)`.
    pub literal_negative_form: bool,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            batch_size: 200,
            negative_samples: 5,
            lr: 1e-3,
            epochs: 5,
            optimizer: OptimizerKind::Adam,
            seed: 42,
            task: Task::LinkPrediction,
            labeled_fraction: 60.0,
            literal_negative_form: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig(
                "batch_size must be at least 1".into(),
            ));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(TrainError::InvalidConfig(format!(
                "lr must be finite and non-negative, got {}",
                self.lr
            )));
        }
        if !(self.labeled_fraction > 0.0 && self.labeled_fraction <= 100.0) {
            return Err(TrainError::InvalidConfig(format!(
                "labeled_fraction must be in (0, 100], got {}",
                self.labeled_fraction
            )));
        }
        Ok(())
    }
}

/// Mix a stream tag into a base seed (splitmix64 finalizer), so the
/// RNGs for parameter init, state init, negative sampling, and splits
/// never share a stream even though the user supplies one seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn params_seed(base: u64) -> u64 {
    derive_seed(base, 1)
}

pub fn store_seed(base: u64) -> u64 {
    derive_seed(base, 2)
}

/// Negative-sampling RNG for one epoch. Seeding per epoch (rather
/// than carrying one RNG across epochs) lets a resumed run reproduce
/// an uninterrupted run bit-exactly.
pub fn negatives_rng(base: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(base, 3), epoch as u64))
}

pub fn split_seed(base: u64) -> u64 {
    derive_seed(base, 4)
}

/// SGD or Adam state over the canonical parameter enumeration.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    kind: OptimizerKind,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &ModelParams) -> OptimizerState {
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => {
                let zeros: Vec<Tensor> = params
                    .entries()
                    .iter()
                    .map(|(_, t)| Tensor::zeros(t.shape()))
                    .collect();
                (zeros.clone(), zeros)
            }
        };
        OptimizerState {
            kind,
            step: 0,
            m,
            v,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// First and second moment estimates (empty for SGD), exposed for
    /// checkpointing.
    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.m, &self.v)
    }

    /// Rebuild state from checkpointed parts, validating against the
    /// parameter shapes.
    pub fn from_parts(
        kind: OptimizerKind,
        step: u64,
        m: Vec<Tensor>,
        v: Vec<Tensor>,
        params: &ModelParams,
    ) -> Result<OptimizerState, TrainError> {
        let want: Vec<&Tensor> = match kind {
            OptimizerKind::Sgd => Vec::new(),
            OptimizerKind::Adam => params.entries().iter().map(|&(_, t)| t).collect(),
        };
        if m.len() != want.len() || v.len() != want.len() {
            return Err(TrainError::OptimizerMismatch(format!(
                "expected {} moment tensors, got {} and {}",
                want.len(),
                m.len(),
                v.len()
            )));
        }
        for (i, p) in want.iter().enumerate() {
            if m[i].shape() != p.shape() || v[i].shape() != p.shape() {
                return Err(TrainError::OptimizerMismatch(format!(
                    "moment {} has shape {:?}/{:?}, parameters have {:?}",
                    i,
                    m[i].shape(),
                    v[i].shape(),
                    p.shape()
                )));
            }
        }
        Ok(OptimizerState { kind, step, m, v })
    }

    /// Apply one update from `grads` (canonical enumeration order).
    /// Rejects non-finite gradients before touching any parameter.
    pub fn apply(
        &mut self,
        params: &mut ModelParams,
        grads: &[Tensor],
        lr: f64,
    ) -> Result<(), TrainError> {
        if grads.len() != ModelParams::ENTRY_COUNT {
            return Err(TrainError::OptimizerMismatch(format!(
                "expected {} gradients, got {}",
                ModelParams::ENTRY_COUNT,
                grads.len()
            )));
        }
        {
            let entries = params.entries();
            for (i, (name, p)) in entries.iter().enumerate() {
                if grads[i].shape() != p.shape() {
                    return Err(TrainError::OptimizerMismatch(format!(
                        "gradient {} has shape {:?}, parameter {} has {:?}",
                        i,
                        grads[i].shape(),
                        name,
                        p.shape()
                    )));
                }
                if grads[i].data().iter().any(|g| !g.is_finite()) {
                    return Err(TrainError::NonFiniteGradient { name });
                }
            }
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (i, (_, p)) in params.entries_mut().into_iter().enumerate() {
                    for (pj, gj) in p.data_mut().iter_mut().zip(grads[i].data()) {
                        *pj -= lr * gj;
                    }
                }
            }
            OptimizerKind::Adam => {
                let bc1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
                for (i, (_, p)) in params.entries_mut().into_iter().enumerate() {
                    let m = self.m[i].data_mut();
                    let v = self.v[i].data_mut();
                    let g = grads[i].data();
                    for j in 0..g.len() {
                        m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * g[j];
                        v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
                        let m_hat = m[j] / bc1;
                        let v_hat = v[j] / bc2;
                        p.data_mut()[j] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Project an embedding into the link-scoring space for its role in
/// the candidate edge.
pub fn project_lp(tape: &mut Tape, lp: &LinkProjVars, u: Var, role: Role) -> Result<Var, MathError> {
    let w = match role {
        Role::Source => lp.src,
        Role::Target => lp.tgt,
    };
    tape.matvec(w, u)
}

/// Link-prediction loss for one positive pair plus its negatives:
/// `-log sigma(<z_src, z_dst>) - sum_n log sigma(-<z_src, z_n>)`, all
/// embeddings role-projected first. With `literal_negative_form` the
/// negative scores keep their sign inside the sigmoid.
pub fn lp_loss(
    tape: &mut Tape,
    lp: &LinkProjVars,
    u_src: Var,
    u_dst: Var,
    u_negatives: &[Var],
    literal_negative_form: bool,
) -> Result<Var, MathError> {
    let z_src = project_lp(tape, lp, u_src, Role::Source)?;
    let z_dst = project_lp(tape, lp, u_dst, Role::Target)?;
    let pos_score = tape.dot(z_src, z_dst)?;
    let pos_ls = tape.log_sigmoid(pos_score)?;
    let mut total = tape.scale(pos_ls, -1.0)?;
    for &u_neg in u_negatives {
        let z_neg = project_lp(tape, lp, u_neg, Role::Target)?;
        let score = tape.dot(z_src, z_neg)?;
        let arg = if literal_negative_form {
            score
        } else {
            tape.scale(score, -1.0)?
        };
        let neg_ls = tape.log_sigmoid(arg)?;
        let term = tape.scale(neg_ls, -1.0)?;
        total = tape.add(total, term)?;
    }
    Ok(total)
}

/// Draw `q` negatives uniformly with replacement from `pool`
/// (sorted, deduplicated), never returning `positive`. A pool that is
/// empty after the exclusion is an error unless `q == 0`.
pub fn sample_negatives(
    pool: &[NodeId],
    positive: NodeId,
    q: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<NodeId>, TrainError> {
    debug_assert!(pool.windows(2).all(|w| w[0] < w[1]), "pool must be sorted unique");
    if q == 0 {
        return Ok(Vec::new());
    }
    let positive_at = pool.binary_search(&positive).ok();
    let effective = pool.len() - usize::from(positive_at.is_some());
    if effective == 0 {
        return Err(TrainError::EmptyNegativePool { positive });
    }
    Ok((0..q)
        .map(|_| {
            let mut i = rng.gen_range(0..effective);
            if let Some(skip) = positive_at {
                if i >= skip {
                    i += 1;
                }
            }
            pool[i]
        })
        .collect())
}

/// All nodes a minibatch touches: event endpoints plus every node in
/// an endpoint's influence lists. Evaluated against the batch-start
/// adjacency; nodes that only become neighbors mid-batch are endpoints
/// of an earlier in-batch event and are already included, so this
/// equals the union of per-event candidate sets.
pub fn batch_candidates(store: &GraphStore, batch: &[InteractionEvent]) -> Vec<NodeId> {
    let mut set = BTreeSet::new();
    for &ev in batch {
        set.insert(ev.src);
        set.insert(ev.dst);
        for (v, _) in store.influenced_nodes(ev).iter_all() {
            set.insert(v);
        }
    }
    set.into_iter().collect()
}

/// Cross-entropy of the class head on one embedding against a one-hot
/// label: `-<one_hot, log_softmax(W_z u)>`.
pub fn nc_loss(tape: &mut Tape, nc_proj: Var, u: Var, y: &Tensor) -> Result<Var, MathError> {
    let logits = tape.matvec(nc_proj, u)?;
    let log_probs = tape.log_softmax(logits)?;
    let y_leaf = tape.leaf(y.clone())?;
    let picked = tape.dot(log_probs, y_leaf)?;
    tape.scale(picked, -1.0)
}

/// One-hot label vector.
pub fn one_hot(class: usize, n_classes: usize) -> Result<Tensor, MathError> {
    if class >= n_classes {
        return Err(MathError::Domain {
            op: "one_hot",
            msg: format!("class {class} out of range for {n_classes} classes"),
        });
    }
    let mut data = vec![0.0; n_classes];
    data[class] = 1.0;
    Ok(Tensor::vector(data))
}

/// Split the time-ordered stream into contiguous chunks of at most
/// `batch_size` events; only the final chunk may be smaller.
pub fn make_minibatches(events: &[InteractionEvent], batch_size: usize) -> Vec<&[InteractionEvent]> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    events.chunks(batch_size).collect()
}

/// Per-epoch training report.
#[derive(Clone, Copy, Debug)]
pub struct EpochMetrics {
    /// Mean loss per contributing term (one per event for link
    /// prediction; one per labeled involved node for classification).
    pub mean_loss: f64,
    pub events_per_sec: f64,
    pub loss_terms: usize,
    pub stats: EventStats,
}

struct BatchOutcome {
    loss_sum: f64,
    terms: usize,
    stats: EventStats,
}

/// Train one pass over `events`, mutating `store`, `params`, and
/// `opt` in place. `negatives` drives negative sampling (use
/// [`negatives_rng`] for the canonical per-epoch stream). Labels are
/// required for [`Task::NodeClassification`] and ignored otherwise.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch(
    events: &[InteractionEvent],
    store: &mut GraphStore,
    params: &mut ModelParams,
    opt: &mut OptimizerState,
    cfg: &TrainConfig,
    hp: &HyperParams,
    negatives: &mut ChaCha8Rng,
    labels: Option<&BTreeMap<NodeId, usize>>,
) -> Result<EpochMetrics, TrainError> {
    cfg.validate()?;
    if cfg.task == Task::NodeClassification && labels.is_none() {
        return Err(TrainError::MissingLabels);
    }
    let start = Instant::now();
    let mut loss_sum = 0.0;
    let mut loss_terms = 0usize;
    let mut stats = EventStats::default();
    for (bidx, batch) in make_minibatches(events, cfg.batch_size).into_iter().enumerate() {
        let outcome = match cfg.task {
            Task::LinkPrediction => run_lp_batch(batch, store, params, opt, cfg, hp, negatives),
            Task::NodeClassification => {
                run_nc_batch(batch, store, params, opt, cfg, hp, labels.unwrap())
            }
        };
        match outcome {
            Ok(b) => {
                loss_sum += b.loss_sum;
                loss_terms += b.terms;
                stats.absorb(b.stats);
            }
            Err(e) => return Err(numeric_context(e, bidx, params)),
        }
    }
    let elapsed = start.elapsed().as_secs_f64().max(1e-9);
    Ok(EpochMetrics {
        mean_loss: if loss_terms == 0 {
            0.0
        } else {
            loss_sum / loss_terms as f64
        },
        events_per_sec: events.len() as f64 / elapsed,
        loss_terms,
        stats,
    })
}

/// Link-prediction batch: per event, score the positive pair and `Q`
/// sampled negatives with the pre-event embeddings, then process the
/// event. One backward pass over the summed loss per batch.
fn run_lp_batch(
    batch: &[InteractionEvent],
    store: &mut GraphStore,
    params: &mut ModelParams,
    opt: &mut OptimizerState,
    cfg: &TrainConfig,
    hp: &HyperParams,
    negatives: &mut ChaCha8Rng,
) -> Result<BatchOutcome, TrainError> {
    // Register endpoints in event order before pooling so state-init
    // draws happen exactly as they would one event at a time.
    for ev in batch {
        store.ensure_node(ev.src);
        store.ensure_node(ev.dst);
    }
    let pool = batch_candidates(store, batch);
    let mut runner = BatchRunner::new(store, params, hp)?;
    let lp = runner.param_vars().lp_proj;
    let mut batch_loss: Option<Var> = None;
    let mut terms = 0usize;
    for &ev in batch {
        let u_src = runner.node_u(ev.src)?;
        let u_dst = runner.node_u(ev.dst)?;
        let negs = sample_negatives(&pool, ev.dst, cfg.negative_samples, negatives)?;
        let mut u_negs = Vec::with_capacity(negs.len());
        for n in negs {
            u_negs.push(runner.node_u(n)?);
        }
        let j = lp_loss(
            runner.tape_mut(),
            &lp,
            u_src,
            u_dst,
            &u_negs,
            cfg.literal_negative_form,
        )?;
        batch_loss = Some(match batch_loss {
            Some(acc) => runner.tape_mut().add(acc, j)?,
            None => j,
        });
        terms += 1;
        runner.process_event(ev)?;
    }
    finish_batch(runner, batch_loss, terms, params, opt, cfg.lr)
}

/// Classification batch: process every event, then take cross-entropy
/// over the labeled nodes involved in the batch, evaluated at the
/// batch-end embeddings. Batches with no labeled involvement still
/// advance the stream state.
fn run_nc_batch(
    batch: &[InteractionEvent],
    store: &mut GraphStore,
    params: &mut ModelParams,
    opt: &mut OptimizerState,
    cfg: &TrainConfig,
    hp: &HyperParams,
    labels: &BTreeMap<NodeId, usize>,
) -> Result<BatchOutcome, TrainError> {
    let n_classes = params.n_classes();
    let mut runner = BatchRunner::new(store, params, hp)?;
    let mut involved: BTreeSet<NodeId> = BTreeSet::new();
    for &ev in batch {
        involved.insert(ev.src);
        involved.insert(ev.dst);
        for (v, _) in runner.store().influenced_nodes(ev).iter_all() {
            involved.insert(v);
        }
        runner.process_event(ev)?;
    }
    let nc_proj = runner.param_vars().nc_proj;
    let mut batch_loss: Option<Var> = None;
    let mut terms = 0usize;
    for &v in &involved {
        let Some(&class) = labels.get(&v) else {
            continue;
        };
        let y = one_hot(class, n_classes)?;
        let u = runner.node_u(v)?;
        let j = nc_loss(runner.tape_mut(), nc_proj, u, &y)?;
        batch_loss = Some(match batch_loss {
            Some(acc) => runner.tape_mut().add(acc, j)?,
            None => j,
        });
        terms += 1;
    }
    finish_batch(runner, batch_loss, terms, params, opt, cfg.lr)
}

/// Backward pass, state write-back (the truncation point), and one
/// optimizer step. A batch that produced no loss terms only writes
/// states back.
fn finish_batch(
    runner: BatchRunner,
    batch_loss: Option<Var>,
    terms: usize,
    params: &mut ModelParams,
    opt: &mut OptimizerState,
    lr: f64,
) -> Result<BatchOutcome, TrainError> {
    let stats = runner.stats();
    let Some(root) = batch_loss else {
        runner.finish()?;
        return Ok(BatchOutcome {
            loss_sum: 0.0,
            terms: 0,
            stats,
        });
    };
    let loss_val = runner.tape().value(root).item();
    if !loss_val.is_finite() {
        return Err(TrainError::Math(MathError::NonFinite { op: "batch_loss" }));
    }
    let grads_all = runner.backward(root)?;
    let grads: Vec<Tensor> = runner
        .param_vars()
        .ordered()
        .iter()
        .map(|&v| grads_all.get_or_zeros(runner.tape(), v))
        .collect();
    runner.finish()?;
    opt.apply(params, &grads, lr)?;
    Ok(BatchOutcome {
        loss_sum: loss_val,
        terms,
        stats,
    })
}

/// Attach batch index and parameter norm to non-finite failures so an
/// aborted run says where it diverged.
fn numeric_context(e: TrainError, batch: usize, params: &ModelParams) -> TrainError {
    let non_finite = matches!(
        &e,
        TrainError::Math(MathError::NonFinite { .. })
            | TrainError::Model(ModelError::Math(MathError::NonFinite { .. }))
    );
    if !non_finite {
        return e;
    }
    let norm = params
        .flatten()
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    TrainError::Numeric {
        batch,
        detail: e.to_string(),
        param_norm: norm,
    }
}

/// Multi-epoch training from scratch: fresh parameters from the
/// config seed, one state rebuild per epoch, canonical RNG streams.
#[derive(Debug)]
pub struct FitOutcome {
    pub params: ModelParams,
    pub opt: OptimizerState,
    pub epochs: Vec<EpochMetrics>,
}

pub fn fit(
    events: &[InteractionEvent],
    cfg: &TrainConfig,
    hp: &HyperParams,
    n_classes: usize,
    labels: Option<&BTreeMap<NodeId, usize>>,
) -> Result<FitOutcome, TrainError> {
    cfg.validate()?;
    let mut params = ModelParams::init(hp.dim, n_classes, params_seed(cfg.seed));
    let mut opt = OptimizerState::new(cfg.optimizer, &params);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut store = GraphStore::new(hp.dim, store_seed(cfg.seed));
        let mut rng = negatives_rng(cfg.seed, epoch);
        epochs.push(train_epoch(
            events, &mut store, &mut params, &mut opt, cfg, hp, &mut rng, labels,
        )?);
    }
    Ok(FitOutcome {
        params,
        opt,
        epochs,
    })
}
