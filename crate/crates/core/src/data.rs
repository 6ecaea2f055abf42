//! Loaders for the on-disk dataset formats: whitespace-separated edge
//! streams with integer-second timestamps, and node label files.
//! External node ids are arbitrary strings; they are mapped to dense
//! internal indices in first-appearance order of the (time-sorted)
//! stream, and the mapping travels with the checkpoint.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::graph::{InteractionEvent, NodeId};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read data: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: timestamp {next} is earlier than {prev}; pass --sort to sort the input")]
    Unsorted { line: usize, prev: i64, next: i64 },
}

/// A loaded event stream with its id mapping. `events[i].t` is in
/// engine time units; `node_names[v]` is the external id of `NodeId(v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub events: Vec<InteractionEvent>,
    pub node_names: Vec<String>,
    pub name_to_id: BTreeMap<String, NodeId>,
    pub seconds_per_time_unit: f64,
}

impl Dataset {
    pub fn n_nodes(&self) -> usize {
        self.node_names.len()
    }

    pub fn id_of(&self, name: &str) -> Option<NodeId> {
        self.name_to_id.get(name).copied()
    }

    pub fn name_of(&self, v: NodeId) -> Option<&str> {
        self.node_names.get(v.0 as usize).map(|s| s.as_str())
    }

    /// Duration covered by the stream, in engine time units.
    pub fn duration(&self) -> f64 {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

/// One raw line: external ids plus integer seconds.
struct RawEdge {
    src: String,
    dst: String,
    seconds: i64,
    line: usize,
}

/// Parse an edge-stream text. One event per line, whitespace
/// separated: `src dst timestamp` or `src dst weight timestamp` (the
/// weight is ignored). Blank lines and lines starting with `#` or `%`
/// are skipped. Timestamps must be sorted ascending unless `sort`.
pub fn parse_events(
    text: &str,
    sort: bool,
    seconds_per_time_unit: f64,
) -> Result<Dataset, DataError> {
    assert!(
        seconds_per_time_unit > 0.0,
        "seconds_per_time_unit must be positive"
    );
    let mut raw = Vec::new();
    for (idx, line_text) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = line_text.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        let (src, dst, ts) = match cols.len() {
            3 => (cols[0], cols[1], cols[2]),
            4 => (cols[0], cols[1], cols[3]),
            n => {
                return Err(DataError::Parse {
                    line,
                    msg: format!("expected 3 or 4 columns, got {n}"),
                })
            }
        };
        let seconds: i64 = ts.parse().map_err(|_| DataError::Parse {
            line,
            msg: format!("timestamp must be integer seconds, got {ts:?}"),
        })?;
        raw.push(RawEdge {
            src: src.to_string(),
            dst: dst.to_string(),
            seconds,
            line,
        });
    }

    if sort {
        // Stable, so same-timestamp events keep their file order.
        raw.sort_by_key(|e| e.seconds);
    } else {
        for w in raw.windows(2) {
            if w[1].seconds < w[0].seconds {
                return Err(DataError::Unsorted {
                    line: w[1].line,
                    prev: w[0].seconds,
                    next: w[1].seconds,
                });
            }
        }
    }

    let mut node_names = Vec::new();
    let mut name_to_id = BTreeMap::new();
    let mut intern = |name: &str, node_names: &mut Vec<String>| -> NodeId {
        if let Some(&id) = name_to_id.get(name) {
            return id;
        }
        let id = NodeId(node_names.len() as u32);
        node_names.push(name.to_string());
        name_to_id.insert(name.to_string(), id);
        id
    };
    let mut events = Vec::with_capacity(raw.len());
    for e in &raw {
        let src = intern(&e.src, &mut node_names);
        let dst = intern(&e.dst, &mut node_names);
        events.push(InteractionEvent {
            src,
            dst,
            t: e.seconds as f64 / seconds_per_time_unit,
        });
    }
    Ok(Dataset {
        events,
        node_names,
        name_to_id,
        seconds_per_time_unit,
    })
}

pub fn load_events(
    path: &Path,
    sort: bool,
    seconds_per_time_unit: f64,
) -> Result<Dataset, DataError> {
    parse_events(&std::fs::read_to_string(path)?, sort, seconds_per_time_unit)
}

/// Parse a label file: `node_id<TAB>label_string` per line, comments
/// and blanks as in the edge format. Duplicate node ids are rejected.
pub fn parse_labels(text: &str) -> Result<Vec<(String, String)>, DataError> {
    let mut rows = Vec::new();
    let mut seen = BTreeMap::new();
    for (idx, line_text) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = line_text.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(DataError::Parse {
                line,
                msg: format!("expected `node label`, got {} columns", cols.len()),
            });
        }
        if let Some(prev) = seen.insert(cols[0].to_string(), line) {
            return Err(DataError::Parse {
                line,
                msg: format!("node {:?} already labeled on line {prev}", cols[0]),
            });
        }
        rows.push((cols[0].to_string(), cols[1].to_string()));
    }
    Ok(rows)
}

pub fn load_labels(path: &Path) -> Result<Vec<(String, String)>, DataError> {
    parse_labels(&std::fs::read_to_string(path)?)
}

/// Labels joined against a dataset's id mapping. Class indices are
/// assigned to the sorted distinct label strings; labeled nodes that
/// never appear in the stream are reported, not silently dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelTable {
    pub labels: BTreeMap<NodeId, usize>,
    pub classes: Vec<String>,
    pub missing_nodes: Vec<String>,
}

pub fn join_labels(dataset: &Dataset, rows: &[(String, String)]) -> LabelTable {
    let mut classes: Vec<String> = rows.iter().map(|(_, l)| l.clone()).collect();
    classes.sort();
    classes.dedup();
    let class_of: BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut labels = BTreeMap::new();
    let mut missing_nodes = Vec::new();
    for (name, label) in rows {
        match dataset.id_of(name) {
            Some(v) => {
                labels.insert(v, class_of[label.as_str()]);
            }
            None => missing_nodes.push(name.clone()),
        }
    }
    LabelTable {
        labels,
        classes,
        missing_nodes,
    }
}
