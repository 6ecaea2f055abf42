//! `dgnn eval`: score a checkpoint on one split of a dataset.

use std::path::Path;

use dgnn_core::data::load_events;
use dgnn_core::eval::{pairs_from_edges, temporal_split, Direction};
use dgnn_core::train::Task;

use crate::checkpoint::Checkpoint;
use crate::commands::train::nc_setup;
use crate::config::{feature_mode_name, parse_feature_mode, task_name};
use crate::runs::{
    f1_or_zero, feature_table_after, lp_metrics, predict_classes, store_after, RANKS_FILE,
    RESULTS_FILE, SUMMARY_FILE,
};
use crate::CliError;

pub struct EvalArgs<'a> {
    pub checkpoint: &'a Path,
    pub data: &'a Path,
    pub labels: Option<&'a Path>,
    pub split: &'a str,
    pub out_dir: &'a Path,
    /// Evaluate the final parameters instead of the best-epoch ones.
    pub use_last: bool,
    pub feature_mode: Option<&'a str>,
    /// Also write the per-pair ranks for auditing.
    pub dump_ranks: bool,
}

/// Name the model variant a checkpoint was trained as: "full" when every
/// component is on, otherwise the disabled components joined with "+".
fn variant_name(hp: &dgnn_core::model::HyperParams) -> String {
    let mut off = Vec::new();
    if !hp.time_intervals_enabled {
        off.push("ti");
    }
    if !hp.propagation_enabled {
        off.push("prop");
    }
    if !hp.attention_enabled {
        off.push("att");
    }
    if off.is_empty() {
        "full".into()
    } else {
        off.join("+")
    }
}

pub fn run(args: &EvalArgs<'_>) -> Result<(), CliError> {
    if !matches!(args.split, "train" | "valid" | "test") {
        return Err(CliError::Input(format!(
            "unknown split {:?}; expected train, valid, or test",
            args.split
        )));
    }
    let ckpt = Checkpoint::load(args.checkpoint)?;
    let mut settings = ckpt.settings.clone();
    if let Some(mode) = args.feature_mode {
        settings.feature_mode = parse_feature_mode(mode)?;
    }
    let dataset = load_events(args.data, settings.sort, settings.time_unit_seconds)?;
    if dataset.node_names != ckpt.node_names {
        return Err(CliError::Input(
            "checkpoint node mapping does not match the data file".into(),
        ));
    }
    let params = if args.use_last {
        ckpt.last_params()?
    } else {
        ckpt.best_params()?
    };
    std::fs::create_dir_all(args.out_dir)
        .map_err(|e| CliError::Input(format!("create {}: {e}", args.out_dir.display())))?;

    let mut summary = serde_json::Map::new();
    summary.insert("task".into(), task_name(settings.train.task).into());
    summary.insert("split".into(), args.split.into());
    summary.insert("seed".into(), settings.train.seed.into());
    summary.insert("dim".into(), settings.hp.dim.into());
    summary.insert("tau".into(), settings.hp.tau.into());
    summary.insert(
        "params".into(),
        if args.use_last { "last" } else { "best" }.into(),
    );

    if args.dump_ranks && settings.train.task != Task::LinkPrediction {
        return Err(CliError::Input(
            "--dump-ranks applies to link-prediction checkpoints only".into(),
        ));
    }
    let variant = variant_name(&settings.hp);
    let seed = settings.train.seed;
    let tau = settings.hp.tau;
    let row = |metric: &str, value: f64, k: &str| {
        format!("{metric},{value:?},{k},{seed},{variant},{tau:?}\n")
    };

    let csv = match settings.train.task {
        Task::LinkPrediction => {
            // Features come from the training prefix only; held-out
            // edges are ranked against that frozen snapshot.
            let split = temporal_split(&dataset.events);
            let pairs = pairs_from_edges(match args.split {
                "train" => split.train,
                "valid" => split.valid,
                _ => split.test,
            });
            let table = feature_table_after(split.train, &params, &settings)?;
            let (report, mrr, r20, r50) = lp_metrics(&pairs, &table)?;
            summary.insert(
                "feature_mode".into(),
                feature_mode_name(settings.feature_mode).into(),
            );
            summary.insert("pairs_ranked".into(), report.results.len().into());
            summary.insert("unseen_pairs".into(), report.unseen_pairs.into());
            summary.insert(
                "self_excluded_pairs".into(),
                report.self_excluded_pairs.into(),
            );
            let mut metrics = serde_json::Map::new();
            metrics.insert("mrr".into(), mrr.into());
            metrics.insert("recall_at_20".into(), r20.into());
            metrics.insert("recall_at_50".into(), r50.into());
            summary.insert("metrics".into(), metrics.into());
            println!("mrr: {mrr:.6}");
            println!("recall@20: {r20:.6}");
            println!("recall@50: {r50:.6}");
            if args.dump_ranks {
                let mut dump = String::from("query,truth,direction,rank,candidates\n");
                for r in &report.results {
                    let dir = match r.pair.direction {
                        Direction::FixSourceRankTargets => "targets",
                        Direction::FixTargetRankSources => "sources",
                    };
                    dump.push_str(&format!(
                        "{},{},{dir},{},{}\n",
                        dataset.node_names[r.pair.query.0 as usize],
                        dataset.node_names[r.pair.truth.0 as usize],
                        r.rank,
                        r.candidates
                    ));
                }
                let ranks_path = args.out_dir.join(RANKS_FILE);
                std::fs::write(&ranks_path, dump).map_err(|e| {
                    CliError::Input(format!("write {}: {e}", ranks_path.display()))
                })?;
                println!("wrote {}", ranks_path.display());
            }
            format!(
                "metric,value,k,seed,variant,tau\n{}{}{}",
                row("mrr", mrr, ""),
                row("recall", r20, "20"),
                row("recall", r50, "50")
            )
        }
        Task::NodeClassification => {
            let (labels, n_classes, split) = nc_setup(&dataset, &settings, args.labels)?;
            let nodes = match args.split {
                "train" => &split.train_labeled,
                "valid" => &split.valid,
                _ => &split.test,
            };
            let store = store_after(&dataset.events, &params, &settings)?;
            let (predicted, truth, unseen) = predict_classes(&store, &params, nodes, &labels);
            let (micro, macro_avg) = f1_or_zero(&predicted, &truth, n_classes)?;
            summary.insert("nodes_scored".into(), predicted.len().into());
            summary.insert("unseen_nodes".into(), unseen.into());
            summary.insert("classes".into(), n_classes.into());
            let mut metrics = serde_json::Map::new();
            metrics.insert("f1_micro".into(), micro.into());
            metrics.insert("f1_macro".into(), macro_avg.into());
            summary.insert("metrics".into(), metrics.into());
            println!("f1_micro: {micro:.6}");
            println!("f1_macro: {macro_avg:.6}");
            format!(
                "metric,value,k,seed,variant,tau\n{}{}",
                row("f1_micro", micro, ""),
                row("f1_macro", macro_avg, "")
            )
        }
    };

    let results_path = args.out_dir.join(RESULTS_FILE);
    std::fs::write(&results_path, csv)
        .map_err(|e| CliError::Input(format!("write {}: {e}", results_path.display())))?;
    let summary_path = args.out_dir.join(SUMMARY_FILE);
    let json = serde_json::Value::Object(summary);
    std::fs::write(&summary_path, format!("{:#}\n", json))
        .map_err(|e| CliError::Input(format!("write {}: {e}", summary_path.display())))?;
    println!("wrote {} and {}", results_path.display(), summary_path.display());
    Ok(())
}
