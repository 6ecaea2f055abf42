//! Training and evaluation machinery shared by the train, eval,
//! ablate, and sweep-tau commands.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use dgnn_core::eval::{
    evaluate_pairs, mrr, pairs_from_edges, recall_at_k, temporal_split, EvalReport, FeatureTable,
    TestPair,
};
use dgnn_core::graph::{GraphStore, InteractionEvent, NodeId};
use dgnn_core::model::{apply_stream, ModelParams};
use dgnn_core::train::{negatives_rng, params_seed, store_seed, train_epoch, OptimizerState};

use crate::checkpoint::BestEpoch;
use crate::config::Settings;
use crate::CliError;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RANKS_FILE: &str = "ranks.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const EXPORT_FILE: &str = "embeddings.tsv";

/// One finished epoch as reported in metrics.csv (timings excluded so
/// the file is byte-identical under a fixed seed).
#[derive(Clone, Copy, Debug)]
pub struct EpochRow {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_metric: f64,
    pub events_per_sec: f64,
}

/// Where to pick up a continued run.
pub struct ResumeState {
    pub params: ModelParams,
    pub opt: OptimizerState,
    pub epochs_done: u32,
    pub best: Option<BestEpoch>,
}

pub struct TrainedRun {
    pub last: ModelParams,
    pub opt: OptimizerState,
    pub best: Option<BestEpoch>,
    pub rows: Vec<EpochRow>,
    pub epochs_done: u32,
}

impl TrainedRun {
    /// Validation-selected parameters (final ones if nothing ran).
    pub fn best_params(&self, dim: usize, n_classes: usize) -> Result<ModelParams, CliError> {
        match &self.best {
            Some(b) => crate::checkpoint::params_from_flat(dim, n_classes, &b.flat),
            None => Ok(self.last.clone()),
        }
    }
}

/// Run `target_epochs` total epochs of training (continuing from
/// `resume` if given), scoring each epoch with `validate` and keeping
/// the best-scoring parameters. One state rebuild per epoch; RNG
/// streams are derived from the seed, so a resumed run and an
/// uninterrupted one are bit-identical.
pub fn run_training(
    events: &[InteractionEvent],
    settings: &Settings,
    n_classes: usize,
    labels: Option<&BTreeMap<NodeId, usize>>,
    resume: Option<ResumeState>,
    target_epochs: usize,
    validate: impl Fn(&GraphStore, &ModelParams) -> Result<f64, CliError>,
    log: bool,
) -> Result<TrainedRun, CliError> {
    let cfg = &settings.train;
    let (mut params, mut opt, start, mut best) = match resume {
        Some(r) => (r.params, r.opt, r.epochs_done as usize, r.best),
        None => {
            let p = ModelParams::init(settings.hp.dim, n_classes.max(1), params_seed(cfg.seed));
            let o = OptimizerState::new(cfg.optimizer, &p);
            (p, o, 0, None)
        }
    };
    let mut rows = Vec::new();
    for epoch in start..target_epochs {
        let mut store = GraphStore::new(settings.hp.dim, store_seed(cfg.seed));
        let mut rng = negatives_rng(cfg.seed, epoch);
        let metrics = train_epoch(
            events,
            &mut store,
            &mut params,
            &mut opt,
            cfg,
            &settings.hp,
            &mut rng,
            labels,
        )?;
        let val_metric = validate(&store, &params)?;
        if best.as_ref().map_or(true, |b| val_metric > b.val_metric) {
            best = Some(BestEpoch {
                epoch: epoch as u32,
                val_metric,
                flat: params.flatten(),
            });
        }
        if log {
            println!(
                "epoch {epoch}: mean loss {:.6}, validation {:.6}, {:.0} events/s",
                metrics.mean_loss, val_metric, metrics.events_per_sec
            );
        }
        rows.push(EpochRow {
            epoch,
            mean_loss: metrics.mean_loss,
            val_metric,
            events_per_sec: metrics.events_per_sec,
        });
    }
    Ok(TrainedRun {
        last: params,
        opt,
        best,
        rows,
        epochs_done: target_epochs.max(start) as u32,
    })
}

/// Validation-MRR scorer for link prediction: snapshot the post-epoch
/// store and rank the held-out pairs. No rankable pair scores 0.
pub fn lp_validator<'a>(
    pairs: &'a [TestPair],
    settings: &'a Settings,
) -> impl Fn(&GraphStore, &ModelParams) -> Result<f64, CliError> + 'a {
    move |store, params| {
        let table = FeatureTable::from_store(store, params, settings.feature_mode)?;
        let report = evaluate_pairs(pairs, &table, false)?;
        if report.results.is_empty() {
            Ok(0.0)
        } else {
            Ok(mrr(&report.results)?)
        }
    }
}

/// Validation-F1(micro) scorer for node classification over the given
/// held-out nodes; nodes absent from the stream are skipped.
pub fn nc_validator<'a>(
    nodes: &'a [NodeId],
    labels: &'a BTreeMap<NodeId, usize>,
    n_classes: usize,
) -> impl Fn(&GraphStore, &ModelParams) -> Result<f64, CliError> + 'a {
    move |store, params| {
        let (predicted, truth, _unseen) = predict_classes(store, params, nodes, labels);
        Ok(f1_or_zero(&predicted, &truth, n_classes)?.0)
    }
}

/// Argmax class per node (first index wins ties). Returns predictions,
/// ground truth, and the count of nodes missing from the store.
pub fn predict_classes(
    store: &GraphStore,
    params: &ModelParams,
    nodes: &[NodeId],
    labels: &BTreeMap<NodeId, usize>,
) -> (Vec<usize>, Vec<usize>, usize) {
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    let mut unseen = 0usize;
    for &v in nodes {
        let Some(&label) = labels.get(&v) else {
            continue;
        };
        let Ok(state) = store.state(v) else {
            unseen += 1;
            continue;
        };
        let scores = params
            .nc_proj
            .matvec(&state.u)
            .expect("projection and state share the model dimension");
        let mut arg = 0usize;
        for (i, &s) in scores.data().iter().enumerate() {
            if s > scores.data()[arg] {
                arg = i;
            }
        }
        predicted.push(arg);
        truth.push(label);
    }
    (predicted, truth, unseen)
}

/// F1 micro/macro, or zeros when nothing was predictable.
pub fn f1_or_zero(
    predicted: &[usize],
    truth: &[usize],
    n_classes: usize,
) -> Result<(f64, f64), CliError> {
    if predicted.is_empty() {
        return Ok((0.0, 0.0));
    }
    let f1 = dgnn_core::eval::f1_scores(predicted, truth, n_classes)?;
    Ok((f1.micro, f1.macro_avg))
}

/// Feature table after streaming `events` through frozen parameters on
/// a fresh store, as evaluation and export see the model.
pub fn feature_table_after(
    events: &[InteractionEvent],
    params: &ModelParams,
    settings: &Settings,
) -> Result<FeatureTable, CliError> {
    let store = store_after(events, params, settings)?;
    Ok(FeatureTable::from_store(&store, params, settings.feature_mode)?)
}

pub fn store_after(
    events: &[InteractionEvent],
    params: &ModelParams,
    settings: &Settings,
) -> Result<GraphStore, CliError> {
    let mut store = GraphStore::new(settings.hp.dim, store_seed(settings.train.seed));
    apply_stream(
        &mut store,
        params,
        &settings.hp,
        events,
        settings.train.batch_size.max(1),
    )?;
    Ok(store)
}

/// Ranking metrics for link prediction: report plus MRR, recall@20,
/// recall@50 (zeros when nothing ranked).
pub fn lp_metrics(
    pairs: &[TestPair],
    table: &FeatureTable,
) -> Result<(EvalReport, f64, f64, f64), CliError> {
    let report = evaluate_pairs(pairs, table, false)?;
    if report.results.is_empty() {
        return Ok((report, 0.0, 0.0, 0.0));
    }
    let m = mrr(&report.results)?;
    let r20 = recall_at_k(&report.results, 20);
    let r50 = recall_at_k(&report.results, 50);
    Ok((report, m, r20, r50))
}

/// One full link-prediction run for comparison commands: train on the
/// 80% prefix, pick the best epoch on validation, return test-split
/// (MRR, recall@20, recall@50).
pub fn lp_train_and_test(
    events: &[InteractionEvent],
    settings: &Settings,
) -> Result<(f64, f64, f64), CliError> {
    let split = temporal_split(events);
    if split.degenerate {
        return Err(CliError::Input(format!(
            "stream of {} events is too short for an 80/10/10 split",
            events.len()
        )));
    }
    let val_pairs = pairs_from_edges(split.valid);
    let run = run_training(
        split.train,
        settings,
        1,
        None,
        None,
        settings.train.epochs,
        lp_validator(&val_pairs, settings),
        false,
    )?;
    let params = run.best_params(settings.hp.dim, 1)?;
    let table = feature_table_after(split.train, &params, settings)?;
    let pairs = pairs_from_edges(split.test);
    let (_, m, r20, r50) = lp_metrics(&pairs, &table)?;
    Ok((m, r20, r50))
}

/// Write metrics.csv. Deterministic formatting only: no timings.
pub fn write_metrics_csv(path: &Path, rows: &[EpochRow]) -> Result<(), CliError> {
    let mut out = String::from("epoch,mean_loss,val_metric\n");
    for r in rows {
        out.push_str(&format!("{},{:?},{:?}\n", r.epoch, r.mean_loss, r.val_metric));
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| CliError::Input(format!("write {}: {e}", path.display())))?;
    f.write_all(out.as_bytes())
        .map_err(|e| CliError::Input(format!("write {}: {e}", path.display())))?;
    Ok(())
}
