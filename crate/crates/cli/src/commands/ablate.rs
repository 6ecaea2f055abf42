//! `dgnn ablate`: train the full model and reduced variants under one
//! seed and compare their held-out link-prediction metrics.

use std::path::Path;

use dgnn_core::data::load_events;
use dgnn_core::train::Task;

use crate::config::Settings;
use crate::runs::{lp_train_and_test, ABLATION_FILE};
use crate::CliError;

/// Mechanism switched off per variant; `full` keeps everything on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Full,
    Ti,
    Prop,
    Att,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Ti => "ti",
            Variant::Prop => "prop",
            Variant::Att => "att",
        }
    }

    pub fn apply(self, settings: &Settings) -> Settings {
        let mut s = settings.clone();
        match self {
            Variant::Full => {}
            Variant::Ti => s.hp.time_intervals_enabled = false,
            Variant::Prop => s.hp.propagation_enabled = false,
            Variant::Att => s.hp.attention_enabled = false,
        }
        s
    }
}

pub fn parse_variants(tokens: &[String]) -> Result<Vec<Variant>, CliError> {
    let mut requested = Vec::new();
    for tok in tokens {
        for part in tok.split(',').filter(|p| !p.is_empty()) {
            let v = match part.trim() {
                "ti" => Variant::Ti,
                "prop" => Variant::Prop,
                "att" => Variant::Att,
                other => {
                    return Err(CliError::Input(format!(
                        "unknown variant {other:?}; expected ti, prop, or att"
                    )))
                }
            };
            if !requested.contains(&v) {
                requested.push(v);
            }
        }
    }
    if requested.is_empty() {
        requested = vec![Variant::Ti, Variant::Prop, Variant::Att];
    }
    // Fixed comparison order regardless of how flags were spelled.
    let mut out = vec![Variant::Full];
    for v in [Variant::Ti, Variant::Prop, Variant::Att] {
        if requested.contains(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

pub fn run(
    data: &Path,
    out_dir: &Path,
    variants: &[String],
    settings: &Settings,
) -> Result<(), CliError> {
    let variants = parse_variants(variants)?;
    let mut settings = settings.clone();
    // Ablations compare link-prediction rankings; there is no variant
    // table for classification.
    settings.train.task = Task::LinkPrediction;

    let dataset = load_events(data, settings.sort, settings.time_unit_seconds)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Input(format!("create {}: {e}", out_dir.display())))?;

    let mut csv = String::from("variant,mrr,recall_at_20,recall_at_50\n");
    for v in variants {
        let (mrr, r20, r50) = lp_train_and_test(&dataset.events, &v.apply(&settings))?;
        println!(
            "{}: mrr {mrr:.6}, recall@20 {r20:.6}, recall@50 {r50:.6}",
            v.name()
        );
        csv.push_str(&format!("{},{mrr:?},{r20:?},{r50:?}\n", v.name()));
    }
    let path = out_dir.join(ABLATION_FILE);
    std::fs::write(&path, csv)
        .map_err(|e| CliError::Input(format!("write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}
