//! Ranking-based link-prediction evaluation (cosine similarity, MRR,
//! Recall@k) and classification scoring (micro/macro F1), plus the
//! temporal and node split protocols.
//!
//! Evaluation runs on a frozen snapshot: a [`FeatureTable`] built once
//! from the post-training store, never on live state.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{GraphStore, InteractionEvent, NodeId};
use crate::model::ModelParams;
use crate::ndmath::{MathError, Tensor};

/// Errors raised while evaluating.
#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error("node {0} is not in the feature table")]
    UnseenNode(NodeId),
    #[error("query {0} is its own truth but the query is excluded from candidates")]
    SelfTruthExcluded(NodeId),
    #[error("no rank results to aggregate")]
    Empty,
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("label {label} outside [0, {n_classes})")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("prediction and truth lists differ in length: {pred} vs {truth}")]
    LengthMismatch { pred: usize, truth: usize },
}

/// Which end of the candidate edge is being ranked: fix the source and
/// rank target candidates, or fix the target and rank source candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    FixSourceRankTargets,
    FixTargetRankSources,
}

/// One ranking query derived from a held-out edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestPair {
    pub query: NodeId,
    pub truth: NodeId,
    pub direction: Direction,
    pub t: f64,
}

/// Outcome of ranking one pair: 1 <= rank <= candidates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankResult {
    pub pair: TestPair,
    pub rank: usize,
    pub candidates: usize,
}

/// Every held-out edge yields exactly two pairs: rank targets given
/// the source, then rank sources given the target.
pub fn pairs_from_edges(edges: &[InteractionEvent]) -> Vec<TestPair> {
    let mut pairs = Vec::with_capacity(edges.len() * 2);
    for ev in edges {
        pairs.push(TestPair {
            query: ev.src,
            truth: ev.dst,
            direction: Direction::FixSourceRankTargets,
            t: ev.t,
        });
        pairs.push(TestPair {
            query: ev.dst,
            truth: ev.src,
            direction: Direction::FixTargetRankSources,
            t: ev.t,
        });
    }
    pairs
}

/// Score candidates with raw embeddings, or with the role projections
/// applied first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureMode {
    Projected,
    Original,
}

/// Frozen per-node feature vectors for ranking, one per role. In
/// `Original` mode both roles share the raw embedding.
#[derive(Clone, Debug)]
pub struct FeatureTable {
    nodes: Vec<NodeId>,
    source: Vec<Tensor>,
    target: Vec<Tensor>,
}

impl FeatureTable {
    /// Snapshot every registered node's features. Read-only on both
    /// inputs, by construction.
    pub fn from_store(
        store: &GraphStore,
        params: &ModelParams,
        mode: FeatureMode,
    ) -> Result<FeatureTable, EvalError> {
        let mut nodes = Vec::with_capacity(store.len());
        let mut source = Vec::with_capacity(store.len());
        let mut target = Vec::with_capacity(store.len());
        let entries = params.entries();
        let (lp_src, lp_tgt) = (entries[38].1, entries[39].1);
        for v in store.node_ids().collect::<Vec<_>>() {
            let u = &store.state(v).expect("listed node").u;
            let (fs, ft) = match mode {
                FeatureMode::Original => (u.clone(), u.clone()),
                FeatureMode::Projected => (lp_src.matvec(u)?, lp_tgt.matvec(u)?),
            };
            nodes.push(v);
            source.push(fs);
            target.push(ft);
        }
        Ok(FeatureTable {
            nodes,
            source,
            target,
        })
    }

    /// Build directly from (node, source-feature, target-feature)
    /// rows; rows are sorted by node id.
    pub fn from_rows(mut rows: Vec<(NodeId, Tensor, Tensor)>) -> FeatureTable {
        rows.sort_by_key(|r| r.0);
        let mut nodes = Vec::with_capacity(rows.len());
        let mut source = Vec::with_capacity(rows.len());
        let mut target = Vec::with_capacity(rows.len());
        for (v, fs, ft) in rows {
            nodes.push(v);
            source.push(fs);
            target.push(ft);
        }
        FeatureTable {
            nodes,
            source,
            target,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_ids(&self) -> &[NodeId] {
        &self.nodes
    }

    fn index_of(&self, v: NodeId) -> Option<usize> {
        self.nodes.binary_search(&v).ok()
    }

    pub fn source_feature(&self, v: NodeId) -> Option<&Tensor> {
        self.index_of(v).map(|i| &self.source[i])
    }

    pub fn target_feature(&self, v: NodeId) -> Option<&Tensor> {
        self.index_of(v).map(|i| &self.target[i])
    }
}

/// Cosine similarity; a zero-norm side scores 0.
fn cosine(a: &Tensor, b: &Tensor) -> Result<f64, MathError> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(a.dot(b)? / (na * nb))
}

/// Rank every registered node as a candidate completion of `pair` by
/// cosine similarity in the pair's direction. The rank is optimistic
/// under ties: 1 plus the number of candidates scoring strictly above
/// the truth. The query itself is a candidate unless `exclude_self`.
pub fn rank_candidates(
    pair: &TestPair,
    features: &FeatureTable,
    exclude_self: bool,
) -> Result<RankResult, EvalError> {
    let (query_feat, candidate_of): (&Tensor, fn(&FeatureTable, usize) -> &Tensor) =
        match pair.direction {
            Direction::FixSourceRankTargets => (
                features
                    .source_feature(pair.query)
                    .ok_or(EvalError::UnseenNode(pair.query))?,
                |f, i| &f.target[i],
            ),
            Direction::FixTargetRankSources => (
                features
                    .target_feature(pair.query)
                    .ok_or(EvalError::UnseenNode(pair.query))?,
                |f, i| &f.source[i],
            ),
        };
    let truth_idx = features
        .index_of(pair.truth)
        .ok_or(EvalError::UnseenNode(pair.truth))?;
    if exclude_self && pair.truth == pair.query {
        return Err(EvalError::SelfTruthExcluded(pair.query));
    }
    let truth_score = cosine(query_feat, candidate_of(features, truth_idx))?;
    let mut rank = 1usize;
    let mut candidates = 0usize;
    for i in 0..features.len() {
        if exclude_self && features.nodes[i] == pair.query {
            continue;
        }
        candidates += 1;
        if i == truth_idx {
            continue;
        }
        if cosine(query_feat, candidate_of(features, i))? > truth_score {
            rank += 1;
        }
    }
    Ok(RankResult {
        pair: *pair,
        rank,
        candidates,
    })
}

/// Ranked pairs plus counts of pairs that could not be ranked.
#[derive(Clone, Debug, Default)]
pub struct EvalReport {
    pub results: Vec<RankResult>,
    /// Pairs whose query or truth never appeared in training.
    pub unseen_pairs: usize,
    /// Self-loop pairs dropped because the query was excluded.
    pub self_excluded_pairs: usize,
}

/// Rank all pairs against one frozen table, in parallel. Unrankable
/// pairs are skipped and counted; result order follows pair order.
pub fn evaluate_pairs(
    pairs: &[TestPair],
    features: &FeatureTable,
    exclude_self: bool,
) -> Result<EvalReport, EvalError> {
    let outcomes: Vec<Result<RankResult, EvalError>> = pairs
        .par_iter()
        .map(|p| rank_candidates(p, features, exclude_self))
        .collect();
    let mut report = EvalReport::default();
    for outcome in outcomes {
        match outcome {
            Ok(r) => report.results.push(r),
            Err(EvalError::UnseenNode(_)) => report.unseen_pairs += 1,
            Err(EvalError::SelfTruthExcluded(_)) => report.self_excluded_pairs += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

/// Mean reciprocal rank.
pub fn mrr(results: &[RankResult]) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Err(EvalError::Empty);
    }
    let sum: f64 = results.iter().map(|r| 1.0 / r.rank as f64).sum();
    Ok(sum / results.len() as f64)
}

/// Fraction of pairs ranked in the top `k`. Zero over an empty list.
pub fn recall_at_k(results: &[RankResult], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    if results.is_empty() {
        return 0.0;
    }
    let hits = results.iter().filter(|r| r.rank <= k).count();
    hits as f64 / results.len() as f64
}

/// Micro- and macro-averaged F1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F1Scores {
    pub micro: f64,
    pub macro_avg: f64,
}

/// F1 over single-label predictions. Micro pools counts across
/// classes; macro averages per-class F1 over all `n_classes`, scoring
/// 0 for classes with no support in either list.
pub fn f1_scores(
    predicted: &[usize],
    truth: &[usize],
    n_classes: usize,
) -> Result<F1Scores, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: predicted.len(),
            truth: truth.len(),
        });
    }
    for &label in predicted.iter().chain(truth) {
        if label >= n_classes {
            return Err(EvalError::LabelOutOfRange { label, n_classes });
        }
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fnb = vec![0usize; n_classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fnb[t] += 1;
        }
    }
    let f1 = |tp: usize, fp: usize, fnb: usize| -> f64 {
        let denom = 2 * tp + fp + fnb;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let (tps, fps, fns) = (
        tp.iter().sum::<usize>(),
        fp.iter().sum::<usize>(),
        fnb.iter().sum::<usize>(),
    );
    let macro_avg = (0..n_classes)
        .map(|c| f1(tp[c], fp[c], fnb[c]))
        .sum::<f64>()
        / n_classes as f64;
    Ok(F1Scores {
        micro: f1(tps, fps, fns),
        macro_avg,
    })
}

/// Contiguous, order-preserving 80/10/10 partition by edge count.
#[derive(Clone, Copy, Debug)]
pub struct TemporalSplit<'a> {
    pub train: &'a [InteractionEvent],
    pub valid: &'a [InteractionEvent],
    pub test: &'a [InteractionEvent],
    /// Set when the stream is too short (< 10 events) for the
    /// proportions to be meaningful.
    pub degenerate: bool,
}

pub fn temporal_split(events: &[InteractionEvent]) -> TemporalSplit<'_> {
    let n = events.len();
    let n_train = n * 8 / 10;
    let n_valid = n / 10;
    let (train, rest) = events.split_at(n_train);
    let (valid, test) = rest.split_at(n_valid);
    TemporalSplit {
        train,
        valid,
        test,
        degenerate: n < 10,
    }
}

/// Label-visibility split for classification: 10% + 10% of labeled
/// nodes hidden for validation and test, and `labeled_fraction`
/// percent of the remaining visible nodes kept as training labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSplit {
    pub valid: Vec<NodeId>,
    pub test: Vec<NodeId>,
    pub train_labeled: Vec<NodeId>,
    pub visible_unlabeled: Vec<NodeId>,
}

pub fn node_split(
    labeled: &[NodeId],
    labeled_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<NodeSplit, EvalError> {
    if !(labeled_fraction > 0.0 && labeled_fraction <= 100.0) {
        return Err(EvalError::DegenerateSplit(format!(
            "labeled_fraction must be in (0, 100], got {labeled_fraction}"
        )));
    }
    let unique: BTreeSet<NodeId> = labeled.iter().copied().collect();
    if unique.len() < 5 {
        return Err(EvalError::DegenerateSplit(format!(
            "need at least 5 labeled nodes, got {}",
            unique.len()
        )));
    }
    let mut order: Vec<NodeId> = unique.into_iter().collect();
    order.shuffle(rng);
    let n = order.len();
    let tenth = n / 10;
    let mut valid: Vec<NodeId> = order[..tenth].to_vec();
    let mut test: Vec<NodeId> = order[tenth..2 * tenth].to_vec();
    let visible = &order[2 * tenth..];
    let n_train = (visible.len() as f64 * labeled_fraction / 100.0).floor() as usize;
    let mut train_labeled: Vec<NodeId> = visible[..n_train].to_vec();
    let mut visible_unlabeled: Vec<NodeId> = visible[n_train..].to_vec();
    valid.sort_unstable();
    test.sort_unstable();
    train_labeled.sort_unstable();
    visible_unlabeled.sort_unstable();
    Ok(NodeSplit {
        valid,
        test,
        train_labeled,
        visible_unlabeled,
    })
}
