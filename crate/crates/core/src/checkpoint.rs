//! Versioned binary checkpoints. A checkpoint carries everything a
//! later process needs to resume training bit-exactly from an epoch
//! boundary or to evaluate: run config, parameters (final and
//! best-validation), optimizer state, epoch counter, the node-id
//! mapping, and class names. Node states are not stored; they are a
//! deterministic function of parameters and the stream.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::config::RunConfig;
use crate::eval::FeatureMode;
use crate::model::{DecayKind, ModelParams};
use crate::ndmath::{MathError, Tensor};
use crate::train::{OptimizerKind, OptimizerState, Task, TrainError};

const MAGIC: [u8; 5] = *b"DGNN\x01";
const VERSION: u32 = 1;
/// Sanity bound for length fields, to fail fast on garbage input.
const MAX_LEN: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

fn bad(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Format(msg.into())
}

/// Best-validation snapshot kept next to the final training state.
#[derive(Clone, Debug)]
pub struct BestEpoch {
    pub epoch: u64,
    pub score: f64,
    pub params: ModelParams,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub n_classes: usize,
    pub epochs_done: u64,
    pub params: ModelParams,
    pub optimizer: OptimizerState,
    pub best: Option<BestEpoch>,
    pub node_names: Vec<String>,
    pub classes: Vec<String>,
}

impl Checkpoint {
    /// Parameters to evaluate with: the best-validation snapshot when
    /// present, the final state otherwise.
    pub fn eval_params(&self) -> &ModelParams {
        self.best.as_ref().map(|b| &b.params).unwrap_or(&self.params)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        self.validate()?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&MAGIC)?;
        w_u32(&mut w, VERSION)?;

        let cfg = &self.config;
        w_u64(&mut w, cfg.hyper.dim as u64)?;
        w_f64(&mut w, cfg.hyper.tau)?;
        w_u8(
            &mut w,
            match cfg.hyper.decay {
                DecayKind::ReciprocalLog => 0,
                DecayKind::Exponential => 1,
            },
        )?;
        w_u8(&mut w, cfg.hyper.propagation_enabled as u8)?;
        w_u8(&mut w, cfg.hyper.time_intervals_enabled as u8)?;
        w_u8(&mut w, cfg.hyper.attention_enabled as u8)?;
        w_u64(&mut w, cfg.train.batch_size as u64)?;
        w_u64(&mut w, cfg.train.negative_samples as u64)?;
        w_f64(&mut w, cfg.train.lr)?;
        w_u64(&mut w, cfg.train.epochs as u64)?;
        w_u8(
            &mut w,
            match cfg.train.optimizer {
                OptimizerKind::Sgd => 0,
                OptimizerKind::Adam => 1,
            },
        )?;
        w_u64(&mut w, cfg.train.seed)?;
        w_u8(
            &mut w,
            match cfg.train.task {
                Task::LinkPrediction => 0,
                Task::NodeClassification => 1,
            },
        )?;
        w_f64(&mut w, cfg.train.labeled_fraction)?;
        w_u8(&mut w, cfg.train.literal_negative_form as u8)?;
        w_u8(
            &mut w,
            match cfg.feature_mode {
                FeatureMode::Projected => 0,
                FeatureMode::Original => 1,
            },
        )?;
        w_f64(&mut w, cfg.seconds_per_time_unit)?;
        w_u8(&mut w, cfg.exclude_self as u8)?;

        w_u64(&mut w, self.n_classes as u64)?;
        w_u64(&mut w, self.epochs_done)?;
        w_params(&mut w, &self.params)?;

        w_u8(
            &mut w,
            match self.optimizer.kind() {
                OptimizerKind::Sgd => 0,
                OptimizerKind::Adam => 1,
            },
        )?;
        w_u64(&mut w, self.optimizer.step_count())?;
        let (m, v) = self.optimizer.moments();
        w_u64(&mut w, m.len() as u64)?;
        for t in m.iter().chain(v) {
            w_tensor(&mut w, t)?;
        }

        match &self.best {
            None => w_u8(&mut w, 0)?,
            Some(b) => {
                w_u8(&mut w, 1)?;
                w_u64(&mut w, b.epoch)?;
                w_f64(&mut w, b.score)?;
                w_params(&mut w, &b.params)?;
            }
        }

        w_u64(&mut w, self.node_names.len() as u64)?;
        for name in &self.node_names {
            w_str(&mut w, name)?;
        }
        w_u64(&mut w, self.classes.len() as u64)?;
        for class in &self.classes {
            w_str(&mut w, class)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)
            .map_err(|_| bad("file too short for magic header"))?;
        if magic != MAGIC {
            return Err(bad(format!(
                "magic mismatch: expected {MAGIC:02x?}, got {magic:02x?}"
            )));
        }
        let version = r_u32(&mut r)?;
        if version != VERSION {
            return Err(bad(format!(
                "unsupported checkpoint version {version}, expected {VERSION}"
            )));
        }

        let mut cfg = RunConfig::default();
        cfg.hyper.dim = r_usize(&mut r)?;
        cfg.hyper.tau = r_f64(&mut r)?;
        cfg.hyper.decay = match r_u8(&mut r)? {
            0 => DecayKind::ReciprocalLog,
            1 => DecayKind::Exponential,
            x => return Err(bad(format!("unknown decay tag {x}"))),
        };
        cfg.hyper.propagation_enabled = r_bool(&mut r)?;
        cfg.hyper.time_intervals_enabled = r_bool(&mut r)?;
        cfg.hyper.attention_enabled = r_bool(&mut r)?;
        cfg.train.batch_size = r_usize(&mut r)?;
        cfg.train.negative_samples = r_usize(&mut r)?;
        cfg.train.lr = r_f64(&mut r)?;
        cfg.train.epochs = r_usize(&mut r)?;
        cfg.train.optimizer = match r_u8(&mut r)? {
            0 => OptimizerKind::Sgd,
            1 => OptimizerKind::Adam,
            x => return Err(bad(format!("unknown optimizer tag {x}"))),
        };
        cfg.train.seed = r_u64(&mut r)?;
        cfg.train.task = match r_u8(&mut r)? {
            0 => Task::LinkPrediction,
            1 => Task::NodeClassification,
            x => return Err(bad(format!("unknown task tag {x}"))),
        };
        cfg.train.labeled_fraction = r_f64(&mut r)?;
        cfg.train.literal_negative_form = r_bool(&mut r)?;
        cfg.feature_mode = match r_u8(&mut r)? {
            0 => FeatureMode::Projected,
            1 => FeatureMode::Original,
            x => return Err(bad(format!("unknown feature-mode tag {x}"))),
        };
        cfg.seconds_per_time_unit = r_f64(&mut r)?;
        cfg.exclude_self = r_bool(&mut r)?;
        cfg.validate()
            .map_err(|e| bad(format!("stored config invalid: {e}")))?;

        let n_classes = r_usize(&mut r)?;
        let epochs_done = r_u64(&mut r)?;
        let params = r_params(&mut r, cfg.hyper.dim, n_classes)?;

        let opt_kind = match r_u8(&mut r)? {
            0 => OptimizerKind::Sgd,
            1 => OptimizerKind::Adam,
            x => return Err(bad(format!("unknown optimizer tag {x}"))),
        };
        let step = r_u64(&mut r)?;
        let n_moments = r_usize(&mut r)?;
        if n_moments as u64 > MAX_LEN {
            return Err(bad("absurd moment count"));
        }
        let mut m = Vec::with_capacity(n_moments);
        let mut v = Vec::with_capacity(n_moments);
        for _ in 0..n_moments {
            m.push(r_tensor(&mut r)?);
        }
        for _ in 0..n_moments {
            v.push(r_tensor(&mut r)?);
        }
        let optimizer = OptimizerState::from_parts(opt_kind, step, m, v, &params)?;

        let best = match r_u8(&mut r)? {
            0 => None,
            1 => {
                let epoch = r_u64(&mut r)?;
                let score = r_f64(&mut r)?;
                let params = r_params(&mut r, cfg.hyper.dim, n_classes)?;
                Some(BestEpoch {
                    epoch,
                    score,
                    params,
                })
            }
            x => return Err(bad(format!("unknown best-epoch tag {x}"))),
        };

        let n_nodes = r_usize(&mut r)?;
        let mut node_names = Vec::with_capacity(n_nodes.min(1 << 20));
        for _ in 0..n_nodes {
            node_names.push(r_str(&mut r)?);
        }
        let n_class_names = r_usize(&mut r)?;
        let mut classes = Vec::with_capacity(n_class_names.min(1 << 20));
        for _ in 0..n_class_names {
            classes.push(r_str(&mut r)?);
        }

        let mut trailer = [0u8; 1];
        if r.read(&mut trailer)? != 0 {
            return Err(bad("trailing bytes after checkpoint payload"));
        }

        let ckpt = Checkpoint {
            config: cfg,
            n_classes,
            epochs_done,
            params,
            optimizer,
            best,
            node_names,
            classes,
        };
        ckpt.validate()?;
        Ok(ckpt)
    }

    fn validate(&self) -> Result<(), CheckpointError> {
        if self.params.dim() != self.config.hyper.dim {
            return Err(bad(format!(
                "parameter dim {} does not match config dim {}",
                self.params.dim(),
                self.config.hyper.dim
            )));
        }
        for (name, t) in self.params.entries() {
            if t.data().iter().any(|x| !x.is_finite()) {
                return Err(bad(format!("parameter {name} contains non-finite values")));
            }
        }
        if let Some(b) = &self.best {
            for (name, t) in b.params.entries() {
                if t.data().iter().any(|x| !x.is_finite()) {
                    return Err(bad(format!(
                        "best-epoch parameter {name} contains non-finite values"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn w_u8<W: Write>(w: &mut W, x: u8) -> std::io::Result<()> {
    w.write_all(&[x])
}

fn w_u32<W: Write>(w: &mut W, x: u32) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn w_u64<W: Write>(w: &mut W, x: u64) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn w_f64<W: Write>(w: &mut W, x: f64) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn w_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn w_tensor<W: Write>(w: &mut W, t: &Tensor) -> std::io::Result<()> {
    w_u32(w, t.shape().len() as u32)?;
    for &d in t.shape() {
        w_u64(w, d as u64)?;
    }
    w_u64(w, t.data().len() as u64)?;
    for &x in t.data() {
        w_f64(w, x)?;
    }
    Ok(())
}

/// Named entries in canonical order; the count and names are the
/// drift audit.
fn w_params<W: Write>(w: &mut W, p: &ModelParams) -> std::io::Result<()> {
    let entries = p.entries();
    w_u32(w, entries.len() as u32)?;
    for (name, t) in entries {
        w_str(w, name)?;
        w_tensor(w, t)?;
    }
    Ok(())
}

fn r_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N], CheckpointError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|_| bad("truncated file"))?;
    Ok(buf)
}

fn r_u8<R: Read>(r: &mut R) -> Result<u8, CheckpointError> {
    Ok(r_exact::<R, 1>(r)?[0])
}

fn r_bool<R: Read>(r: &mut R) -> Result<bool, CheckpointError> {
    match r_u8(r)? {
        0 => Ok(false),
        1 => Ok(true),
        x => Err(bad(format!("expected boolean byte, got {x}"))),
    }
}

fn r_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    Ok(u32::from_le_bytes(r_exact::<R, 4>(r)?))
}

fn r_u64<R: Read>(r: &mut R) -> Result<u64, CheckpointError> {
    Ok(u64::from_le_bytes(r_exact::<R, 8>(r)?))
}

fn r_usize<R: Read>(r: &mut R) -> Result<usize, CheckpointError> {
    let x = r_u64(r)?;
    if x > MAX_LEN {
        return Err(bad(format!("length field {x} out of range")));
    }
    Ok(x as usize)
}

fn r_f64<R: Read>(r: &mut R) -> Result<f64, CheckpointError> {
    Ok(f64::from_le_bytes(r_exact::<R, 8>(r)?))
}

fn r_str<R: Read>(r: &mut R) -> Result<String, CheckpointError> {
    let len = r_u32(r)? as usize;
    if len > (1 << 20) {
        return Err(bad(format!("string length {len} out of range")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(|_| bad("truncated string"))?;
    String::from_utf8(buf).map_err(|_| bad("string is not UTF-8"))
}

fn r_tensor<R: Read>(r: &mut R) -> Result<Tensor, CheckpointError> {
    let rank = r_u32(r)? as usize;
    if rank > 8 {
        return Err(bad(format!("tensor rank {rank} out of range")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(r_usize(r)?);
    }
    let len = r_usize(r)?;
    if len != shape.iter().product::<usize>() {
        return Err(bad(format!(
            "tensor length {len} does not match shape {shape:?}"
        )));
    }
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        data.push(r_f64(r)?);
    }
    Ok(Tensor::from_vec(&shape, data)?)
}

fn r_params<R: Read>(
    r: &mut R,
    dim: usize,
    n_classes: usize,
) -> Result<ModelParams, CheckpointError> {
    let count = r_u32(r)? as usize;
    if count != ModelParams::ENTRY_COUNT {
        return Err(bad(format!(
            "parameter count {count}, expected {}",
            ModelParams::ENTRY_COUNT
        )));
    }
    let mut params = ModelParams::init(dim, n_classes, 0);
    let mut flat = Vec::with_capacity(params.n_scalars());
    for (want_name, want_tensor) in params.entries() {
        let name = r_str(r)?;
        if name != want_name {
            return Err(bad(format!(
                "parameter name drift: expected {want_name}, found {name}"
            )));
        }
        let t = r_tensor(r)?;
        if t.shape() != want_tensor.shape() {
            return Err(bad(format!(
                "parameter {name} has shape {:?}, expected {:?}",
                t.shape(),
                want_tensor.shape()
            )));
        }
        flat.extend_from_slice(t.data());
    }
    params.assign_flat(&flat)?;
    Ok(params)
}
