//! `dgnn train`: fit a model, select the best epoch on the validation
//! split, and write a resumable checkpoint plus per-epoch metrics.

use std::collections::BTreeMap;
use std::path::Path;

use dgnn_core::data::{join_labels, load_events, load_labels, Dataset};
use dgnn_core::eval::{node_split, pairs_from_edges, temporal_split, NodeSplit};
use dgnn_core::graph::NodeId;
use dgnn_core::ndmath::Tensor;
use dgnn_core::train::{split_seed, Task};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::config::{Overrides, Settings};
use crate::runs::{
    lp_validator, nc_validator, run_training, write_metrics_csv, ResumeState, TrainedRun,
    CHECKPOINT_FILE, METRICS_FILE,
};
use crate::CliError;

pub struct TrainArgs<'a> {
    pub data: &'a Path,
    pub labels: Option<&'a Path>,
    pub out_dir: &'a Path,
    pub config: Option<&'a Path>,
    pub resume: Option<&'a Path>,
    pub flags: &'a Overrides,
}

pub fn run(args: &TrainArgs<'_>) -> Result<(), CliError> {
    // A resumed run keeps the checkpoint's settings; only the epoch
    // target may move (otherwise the continuation would diverge from
    // the uninterrupted run it must reproduce).
    let (settings, resume_ckpt) = match args.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let mut s = ckpt.settings.clone();
            if args.config.is_some() {
                eprintln!("note: --config is ignored when resuming; checkpoint settings apply");
            }
            if let Some(epochs) = args.flags.epochs {
                s.train.epochs = epochs;
            }
            (s, Some(ckpt))
        }
        None => (Settings::resolve(args.config, args.flags)?, None),
    };

    let dataset = load_events(args.data, settings.sort, settings.time_unit_seconds)?;
    if let Some(ckpt) = &resume_ckpt {
        if ckpt.node_names != dataset.node_names {
            return Err(CliError::Input(
                "checkpoint node mapping does not match the data file".into(),
            ));
        }
        if ckpt.epochs_done as usize > settings.train.epochs {
            return Err(CliError::Input(format!(
                "checkpoint already has {} epochs, target is {}",
                ckpt.epochs_done, settings.train.epochs
            )));
        }
    }

    std::fs::create_dir_all(args.out_dir)
        .map_err(|e| CliError::Input(format!("create {}: {e}", args.out_dir.display())))?;

    let outcome = match settings.train.task {
        Task::LinkPrediction => train_lp(&dataset, &settings, &resume_ckpt)?,
        Task::NodeClassification => train_nc(&dataset, &settings, &resume_ckpt, args.labels)?,
    };
    let (run, n_classes) = outcome;

    write_metrics_csv(&args.out_dir.join(METRICS_FILE), &run.rows)?;
    let ckpt = Checkpoint {
        settings: settings.clone(),
        n_classes: n_classes as u32,
        epochs_done: run.epochs_done,
        node_names: dataset.node_names.clone(),
        last_flat: run.last.flatten(),
        best: run.best.clone(),
        opt_step: run.opt.step_count(),
        opt_m: flatten_tensors(run.opt.moments().0),
        opt_v: flatten_tensors(run.opt.moments().1),
    };
    let ckpt_path = args.out_dir.join(CHECKPOINT_FILE);
    ckpt.save(&ckpt_path)?;

    match &run.best {
        Some(b) => println!(
            "wrote {} (best epoch {}, validation {:.6})",
            ckpt_path.display(),
            b.epoch,
            b.val_metric
        ),
        None => println!("wrote {} (no new epochs ran)", ckpt_path.display()),
    }
    Ok(())
}

fn resume_state(ckpt: &Option<Checkpoint>) -> Result<Option<ResumeState>, CliError> {
    match ckpt {
        None => Ok(None),
        Some(c) => {
            let params = c.last_params()?;
            let opt = c.optimizer_state(&params)?;
            Ok(Some(ResumeState {
                params,
                opt,
                epochs_done: c.epochs_done,
                best: c.best.clone(),
            }))
        }
    }
}

fn train_lp(
    dataset: &Dataset,
    settings: &Settings,
    resume: &Option<Checkpoint>,
) -> Result<(TrainedRun, usize), CliError> {
    let split = temporal_split(&dataset.events);
    if split.degenerate {
        return Err(CliError::Input(format!(
            "stream of {} events is too short for an 80/10/10 split",
            dataset.events.len()
        )));
    }
    let val_pairs = pairs_from_edges(split.valid);
    let run = run_training(
        split.train,
        settings,
        1,
        None,
        resume_state(resume)?,
        settings.train.epochs,
        lp_validator(&val_pairs, settings),
        true,
    )?;
    Ok((run, 1))
}

fn train_nc(
    dataset: &Dataset,
    settings: &Settings,
    resume: &Option<Checkpoint>,
    labels_path: Option<&Path>,
) -> Result<(TrainedRun, usize), CliError> {
    let (labels, n_classes, split) = nc_setup(dataset, settings, labels_path)?;
    let train_labels: BTreeMap<NodeId, usize> = split
        .train_labeled
        .iter()
        .filter_map(|v| labels.get(v).map(|&c| (*v, c)))
        .collect();
    let run = run_training(
        &dataset.events,
        settings,
        n_classes,
        Some(&train_labels),
        resume_state(resume)?,
        settings.train.epochs,
        nc_validator(&split.valid, &labels, n_classes),
        true,
    )?;
    Ok((run, n_classes))
}

/// Load and join labels, then derive the label-visibility split from
/// the run seed. Shared with evaluation so both sides agree on it.
pub fn nc_setup(
    dataset: &Dataset,
    settings: &Settings,
    labels_path: Option<&Path>,
) -> Result<(BTreeMap<NodeId, usize>, usize, NodeSplit), CliError> {
    let path = labels_path.ok_or_else(|| {
        CliError::Input("node classification requires --labels <file>".into())
    })?;
    let rows = load_labels(path)?;
    let table = join_labels(dataset, &rows);
    if !table.missing_nodes.is_empty() {
        eprintln!(
            "warning: {} labeled nodes never appear in the stream",
            table.missing_nodes.len()
        );
    }
    let labeled: Vec<NodeId> = table.labels.keys().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(settings.train.seed));
    let split = node_split(&labeled, settings.train.labeled_fraction, &mut rng)?;
    Ok((table.labels, table.classes.len(), split))
}

pub fn flatten_tensors(ts: &[Tensor]) -> Vec<f64> {
    ts.iter().flat_map(|t| t.data().to_vec()).collect()
}
