//! `dgnn validate`: edge-stream sanity report.

use std::path::Path;

use dgnn_core::data::{parse_events, DataError, Dataset};

use crate::CliError;

#[derive(Debug)]
pub struct ValidateReport {
    pub events: usize,
    pub nodes: usize,
    pub duration_days: f64,
    pub input_sorted: bool,
}

/// Parse the stream, report counts and duration, and flag ordering.
/// Unsorted input is an error unless `sort` is set.
pub fn run(path: &Path, sort: bool, time_unit_seconds: f64) -> Result<ValidateReport, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let (dataset, input_sorted) = match parse_events(&text, false, time_unit_seconds) {
        Ok(ds) => (ds, true),
        Err(DataError::Unsorted { .. }) if sort => {
            (parse_events(&text, true, time_unit_seconds)?, false)
        }
        Err(e) => return Err(e.into()),
    };
    Ok(report(&dataset, input_sorted))
}

fn report(dataset: &Dataset, input_sorted: bool) -> ValidateReport {
    ValidateReport {
        events: dataset.events.len(),
        nodes: dataset.n_nodes(),
        duration_days: dataset.duration() * dataset.seconds_per_time_unit / 86_400.0,
        input_sorted,
    }
}

impl ValidateReport {
    pub fn print(&self) {
        if self.events == 0 {
            eprintln!("warning: stream is empty");
        }
        println!("events: {}", self.events);
        println!("nodes: {}", self.nodes);
        println!("duration_days: {:.1}", self.duration_days);
        println!(
            "input_sorted: {}",
            if self.input_sorted { "yes" } else { "no (sorted on load)" }
        );
    }
}
