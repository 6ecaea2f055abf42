//! `dgnn export`: stream the full dataset through a checkpoint's
//! parameters and dump every node's general feature vector.

use std::fmt::Write as _;
use std::path::Path;

use dgnn_core::data::load_events;
use dgnn_core::graph::NodeId;

use crate::checkpoint::Checkpoint;
use crate::runs::store_after;
use crate::CliError;

pub fn run(
    checkpoint: &Path,
    data: &Path,
    out_file: &Path,
    use_last: bool,
) -> Result<(), CliError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let settings = &ckpt.settings;
    let dataset = load_events(data, settings.sort, settings.time_unit_seconds)?;
    if dataset.node_names != ckpt.node_names {
        return Err(CliError::Input(
            "checkpoint node mapping does not match the data file".into(),
        ));
    }
    let params = if use_last {
        ckpt.last_params()?
    } else {
        ckpt.best_params()?
    };
    let store = store_after(&dataset.events, &params, settings)?;

    // `{:?}` prints the shortest decimal that parses back to the same
    // f64, so a reload is bit-identical.
    let mut out = String::new();
    for (idx, name) in dataset.node_names.iter().enumerate() {
        let state = store.state(NodeId(idx as u32))?;
        out.push_str(name);
        out.push('\t');
        for (i, v) in state.u.data().iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{v:?}").expect("string writes cannot fail");
        }
        out.push('\n');
    }
    std::fs::write(out_file, out)
        .map_err(|e| CliError::Input(format!("write {}: {e}", out_file.display())))?;
    println!(
        "exported {} nodes, dim {}, to {}",
        dataset.node_names.len(),
        settings.hp.dim,
        out_file.display()
    );
    Ok(())
}
