//! Versioned binary checkpoint: everything needed to evaluate a
//! trained model or continue its training bit-exactly.

use std::path::Path;

use dgnn_core::eval::FeatureMode;
use dgnn_core::model::{DecayKind, ModelParams};
use dgnn_core::ndmath::Tensor;
use dgnn_core::train::{OptimizerKind, OptimizerState, Task};

use crate::config::Settings;
use crate::CliError;

const MAGIC: &[u8; 5] = b"DGNN\x01";
const VERSION: u32 = 1;

/// Parameters of the epoch that won validation, kept alongside the
/// final parameters so evaluation and resumption don't fight.
#[derive(Clone, Debug, PartialEq)]
pub struct BestEpoch {
    pub epoch: u32,
    pub val_metric: f64,
    pub flat: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub settings: Settings,
    pub n_classes: u32,
    /// Epochs completed; resuming starts here.
    pub epochs_done: u32,
    /// External node names, indexed by internal id.
    pub node_names: Vec<String>,
    /// Final parameters, flattened in canonical enumeration order.
    pub last_flat: Vec<f64>,
    pub best: Option<BestEpoch>,
    pub opt_step: u64,
    /// Adam moment vectors, flattened like the parameters; empty for SGD.
    pub opt_m: Vec<f64>,
    pub opt_v: Vec<f64>,
}

impl Checkpoint {
    pub fn last_params(&self) -> Result<ModelParams, CliError> {
        params_from_flat(
            self.settings.hp.dim,
            self.n_classes as usize,
            &self.last_flat,
        )
    }

    /// Validation-selected parameters, falling back to the final ones
    /// when no epoch was validated.
    pub fn best_params(&self) -> Result<ModelParams, CliError> {
        match &self.best {
            Some(b) => params_from_flat(self.settings.hp.dim, self.n_classes as usize, &b.flat),
            None => self.last_params(),
        }
    }

    pub fn optimizer_state(&self, params: &ModelParams) -> Result<OptimizerState, CliError> {
        let (m, v) = match self.settings.train.optimizer {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => (
                tensors_from_flat(params, &self.opt_m)?,
                tensors_from_flat(params, &self.opt_v)?,
            ),
        };
        OptimizerState::from_parts(self.settings.train.optimizer, self.opt_step, m, v, params)
            .map_err(|e| CliError::Input(format!("checkpoint optimizer state: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_bytes())
            .map_err(|e| CliError::Input(format!("write {}: {e}", path.display())))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Input(format!("read {}: {e}", path.display())))?;
        Checkpoint::from_bytes(&bytes)
            .map_err(|e| CliError::Input(format!("{}: {}", path.display(), e.message())))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.settings;
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.u8(match s.train.task {
            Task::LinkPrediction => 0,
            Task::NodeClassification => 1,
        });
        w.u32(s.hp.dim as u32);
        w.u32(self.n_classes);
        w.f64(s.hp.tau);
        w.u8(match s.hp.decay {
            DecayKind::ReciprocalLog => 0,
            DecayKind::Exponential => 1,
        });
        w.u8(s.hp.time_intervals_enabled as u8);
        w.u8(s.hp.propagation_enabled as u8);
        w.u8(s.hp.attention_enabled as u8);
        w.u8(match s.feature_mode {
            FeatureMode::Projected => 0,
            FeatureMode::Original => 1,
        });
        w.f64(s.time_unit_seconds);
        w.u8(s.sort as u8);
        w.u64(s.train.seed);
        w.u32(s.train.batch_size as u32);
        w.u32(s.train.negative_samples as u32);
        w.f64(s.train.lr);
        w.u32(s.train.epochs as u32);
        w.u8(match s.train.optimizer {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam => 1,
        });
        w.f64(s.train.labeled_fraction);
        w.u8(s.train.literal_negative_form as u8);
        w.u32(self.epochs_done);
        w.u32(self.node_names.len() as u32);
        for name in &self.node_names {
            w.str(name);
        }
        w.flat(&self.last_flat);
        match &self.best {
            Some(b) => {
                w.u8(1);
                w.u32(b.epoch);
                w.f64(b.val_metric);
                w.flat(&b.flat);
            }
            None => w.u8(0),
        }
        w.u64(self.opt_step);
        w.flat(&self.opt_m);
        w.flat(&self.opt_v);
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, CliError> {
        let mut r = Reader { buf: bytes, off: 0 };
        let magic = r.take(MAGIC.len())?;
        if magic != MAGIC {
            return Err(CliError::Input("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CliError::Input(format!(
                "unsupported checkpoint version {version} (expected {VERSION})"
            )));
        }
        let mut s = Settings::default();
        s.train.task = match r.u8()? {
            0 => Task::LinkPrediction,
            1 => Task::NodeClassification,
            b => return Err(CliError::Input(format!("bad task byte {b}"))),
        };
        s.hp.dim = r.u32()? as usize;
        let n_classes = r.u32()?;
        s.hp.tau = r.f64()?;
        s.hp.decay = match r.u8()? {
            0 => DecayKind::ReciprocalLog,
            1 => DecayKind::Exponential,
            b => return Err(CliError::Input(format!("bad decay byte {b}"))),
        };
        s.hp.time_intervals_enabled = r.u8()? != 0;
        s.hp.propagation_enabled = r.u8()? != 0;
        s.hp.attention_enabled = r.u8()? != 0;
        s.feature_mode = match r.u8()? {
            0 => FeatureMode::Projected,
            1 => FeatureMode::Original,
            b => return Err(CliError::Input(format!("bad feature-mode byte {b}"))),
        };
        s.time_unit_seconds = r.f64()?;
        s.sort = r.u8()? != 0;
        s.train.seed = r.u64()?;
        s.train.batch_size = r.u32()? as usize;
        s.train.negative_samples = r.u32()? as usize;
        s.train.lr = r.f64()?;
        s.train.epochs = r.u32()? as usize;
        s.train.optimizer = match r.u8()? {
            0 => OptimizerKind::Sgd,
            1 => OptimizerKind::Adam,
            b => return Err(CliError::Input(format!("bad optimizer byte {b}"))),
        };
        s.train.labeled_fraction = r.f64()?;
        s.train.literal_negative_form = r.u8()? != 0;
        let epochs_done = r.u32()?;
        let n_names = r.u32()? as usize;
        let mut node_names = Vec::with_capacity(n_names);
        for _ in 0..n_names {
            node_names.push(r.str()?);
        }
        let last_flat = r.flat()?;
        let best = match r.u8()? {
            0 => None,
            _ => Some(BestEpoch {
                epoch: r.u32()?,
                val_metric: r.f64()?,
                flat: r.flat()?,
            }),
        };
        let opt_step = r.u64()?;
        let opt_m = r.flat()?;
        let opt_v = r.flat()?;
        if r.off != bytes.len() {
            return Err(CliError::Input(format!(
                "checkpoint has {} trailing bytes",
                bytes.len() - r.off
            )));
        }
        Ok(Checkpoint {
            settings: s,
            n_classes,
            epochs_done,
            node_names,
            last_flat,
            best,
            opt_step,
            opt_m,
            opt_v,
        })
    }
}

/// Rebuild parameters from a canonical-order flat vector.
pub fn params_from_flat(dim: usize, n_classes: usize, flat: &[f64]) -> Result<ModelParams, CliError> {
    let mut p = ModelParams::init(dim, n_classes.max(1), 0);
    p.assign_flat(flat).map_err(|e| {
        CliError::Input(format!(
            "checkpoint parameters do not fit dim {dim}, {n_classes} classes: {e}"
        ))
    })?;
    Ok(p)
}

/// Split a flat moment vector into tensors shaped like the parameters.
fn tensors_from_flat(template: &ModelParams, flat: &[f64]) -> Result<Vec<Tensor>, CliError> {
    let mut out = Vec::new();
    let mut off = 0usize;
    for (name, t) in template.entries() {
        let n = t.len();
        if off + n > flat.len() {
            return Err(CliError::Input(format!(
                "checkpoint moments truncated at {name}"
            )));
        }
        out.push(
            Tensor::from_vec(t.shape(), flat[off..off + n].to_vec())
                .map_err(|e| CliError::Input(format!("checkpoint moments: {e}")))?,
        );
        off += n;
    }
    if off != flat.len() {
        return Err(CliError::Input(format!(
            "checkpoint moments have {} extra values",
            flat.len() - off
        )));
    }
    Ok(out)
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }
    fn flat(&mut self, xs: &[f64]) {
        self.u64(xs.len() as u64);
        for &x in xs {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    off: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        if self.off + n > self.buf.len() {
            return Err(CliError::Input(format!(
                "checkpoint truncated at byte {}",
                self.buf.len()
            )));
        }
        let s = &self.buf[self.off..self.off + n];
        self.off += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String, CliError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| CliError::Input("checkpoint name is not UTF-8".into()))
    }
    fn flat(&mut self) -> Result<Vec<f64>, CliError> {
        let n = self.u64()? as usize;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }
}
