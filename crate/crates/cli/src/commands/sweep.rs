//! `dgnn sweep-tau`: one full train/eval per propagation threshold,
//! shared seed, plot-ready CSV.

use std::path::Path;

use dgnn_core::data::load_events;
use dgnn_core::train::Task;

use crate::config::Settings;
use crate::runs::{lp_train_and_test, SWEEP_FILE};
use crate::CliError;

/// The published sweep grid: 1 and 7 days, then 10..=100 by 10.
pub fn default_grid() -> Vec<f64> {
    let mut g = vec![1.0, 7.0];
    g.extend((1..=10).map(|k| (k * 10) as f64));
    g
}

pub fn parse_taus(tokens: &[String]) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for tok in tokens {
        for part in tok.split(',').filter(|p| !p.is_empty()) {
            let tau: f64 = part
                .trim()
                .parse()
                .map_err(|e| CliError::Input(format!("tau {part:?}: {e}")))?;
            if !tau.is_finite() || tau < 0.0 {
                return Err(CliError::Input(format!(
                    "tau must be finite and non-negative, got {part}"
                )));
            }
            out.push(tau);
        }
    }
    if out.is_empty() {
        out = default_grid();
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite by validation"));
    out.dedup();
    Ok(out)
}

pub fn run(
    data: &Path,
    out_dir: &Path,
    taus: &[String],
    settings: &Settings,
) -> Result<(), CliError> {
    let taus = parse_taus(taus)?;
    let mut settings = settings.clone();
    settings.train.task = Task::LinkPrediction;

    let dataset = load_events(data, settings.sort, settings.time_unit_seconds)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Input(format!("create {}: {e}", out_dir.display())))?;

    let mut csv = String::from("tau,mrr\n");
    for &tau in &taus {
        let mut s = settings.clone();
        s.hp.tau = tau;
        let (mrr, _, _) = lp_train_and_test(&dataset.events, &s)?;
        println!("tau {tau}: mrr {mrr:.6}");
        csv.push_str(&format!("{tau:?},{mrr:?}\n"));
    }
    let path = out_dir.join(SWEEP_FILE);
    std::fs::write(&path, csv)
        .map_err(|e| CliError::Input(format!("write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}
