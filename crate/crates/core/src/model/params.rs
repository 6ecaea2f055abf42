use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ndmath::{MathError, Tensor};

/// One recurrent gate: `sigma(W e + U h + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

/// Parameters of one time-adjusted recurrent update unit. The source
/// and target units share this structure but never share storage.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateUnitParams {
    /// Extracts the short-term part of the cell before decay.
    pub w_d: Tensor,
    pub b_d: Tensor,
    pub forget: GateParams,
    pub input: GateParams,
    pub output: GateParams,
    pub cell: GateParams,
}

/// Combines the two endpoint features into interaction information.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractParams {
    pub w1: Tensor,
    pub w2: Tensor,
    pub b: Tensor,
}

/// Linear merge of the two role hidden states into general features.
#[derive(Clone, Debug, PartialEq)]
pub struct MergeParams {
    pub w_src: Tensor,
    pub w_tgt: Tensor,
    pub b: Tensor,
}

/// The four propagation transforms, selected by (center role,
/// neighbor role). Identical shape, independent storage.
#[derive(Clone, Debug, PartialEq)]
pub struct PropParams {
    pub src_to_src: Tensor,
    pub src_to_tgt: Tensor,
    pub tgt_to_src: Tensor,
    pub tgt_to_tgt: Tensor,
}

/// Role-specific projections used by the link-prediction score.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkProjParams {
    pub src: Tensor,
    pub tgt: Tensor,
}

/// Every learnable weight in the model.
///
/// [`ModelParams::entries`] fixes a canonical enumeration order; the
/// optimizer's moment buffers, gradient extraction, checkpoints, and
/// the flatten/assign round-trip all index parameters by that order, so
/// it must never change silently; `ENTRY_COUNT` and the flat-length
/// checks in `assign_flat` exist to catch drift.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    dim: usize,
    n_classes: usize,
    pub interact: InteractParams,
    pub s_update: UpdateUnitParams,
    pub g_update: UpdateUnitParams,
    pub merge: MergeParams,
    pub prop: PropParams,
    pub lp_proj: LinkProjParams,
    pub nc_proj: Tensor,
}

impl ModelParams {
    pub const ENTRY_COUNT: usize = 41;

    /// Fresh parameters: matrices i.i.d. uniform on (-1/sqrt(d),
    /// 1/sqrt(d)) in enumeration order, biases zero.
    pub fn init(dim: usize, n_classes: usize, seed: u64) -> ModelParams {
        assert!(dim >= 1, "embedding dimension must be at least 1");
        assert!(n_classes >= 1, "classifier needs at least one class");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (dim as f64).sqrt();
        fn mat(rng: &mut ChaCha8Rng, bound: f64, rows: usize, cols: usize) -> Tensor {
            let data = (0..rows * cols)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            Tensor::from_vec(&[rows, cols], data).expect("sized by construction")
        }
        fn unit(rng: &mut ChaCha8Rng, bound: f64, dim: usize) -> UpdateUnitParams {
            let gate = |rng: &mut ChaCha8Rng, bias: f64| GateParams {
                w: mat(rng, bound, dim, dim),
                u: mat(rng, bound, dim, dim),
                b: Tensor::from_vec(&[dim], vec![bias; dim]).expect("sized by construction"),
            };
            UpdateUnitParams {
                w_d: mat(rng, bound, dim, dim),
                b_d: Tensor::zeros(&[dim]),
                // Forget gates start open so cells retain their state
                // across events until training decides otherwise.
                forget: gate(rng, 1.0),
                input: gate(rng, 0.0),
                output: gate(rng, 0.0),
                cell: gate(rng, 0.0),
            }
        }
        // Draw order below mirrors `entries`; both must evolve together.
        let interact = InteractParams {
            w1: mat(&mut rng, bound, dim, dim),
            w2: mat(&mut rng, bound, dim, dim),
            b: Tensor::zeros(&[dim]),
        };
        let s_update = unit(&mut rng, bound, dim);
        let g_update = unit(&mut rng, bound, dim);
        let merge = MergeParams {
            w_src: mat(&mut rng, bound, dim, dim),
            w_tgt: mat(&mut rng, bound, dim, dim),
            b: Tensor::zeros(&[dim]),
        };
        // Message weights start an order of magnitude smaller than the
        // rest: untrained propagation then barely perturbs the direct
        // update dynamics, and training grows it where it helps.
        let prop_bound = bound * 0.1;
        let prop = PropParams {
            src_to_src: mat(&mut rng, prop_bound, dim, dim),
            src_to_tgt: mat(&mut rng, prop_bound, dim, dim),
            tgt_to_src: mat(&mut rng, prop_bound, dim, dim),
            tgt_to_tgt: mat(&mut rng, prop_bound, dim, dim),
        };
        let lp_proj = LinkProjParams {
            src: mat(&mut rng, bound, dim, dim),
            tgt: mat(&mut rng, bound, dim, dim),
        };
        let nc_proj = mat(&mut rng, bound, n_classes, dim);
        ModelParams {
            dim,
            n_classes,
            interact,
            s_update,
            g_update,
            merge,
            prop,
            lp_proj,
            nc_proj,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// All parameters in canonical order with stable names.
    pub fn entries(&self) -> Vec<(&'static str, &Tensor)> {
        fn unit<'a>(
            prefix_wd: &'static str,
            prefix_bd: &'static str,
            gates: [(&'static str, &'static str, &'static str); 4],
            u: &'a UpdateUnitParams,
            out: &mut Vec<(&'static str, &'a Tensor)>,
        ) {
            out.push((prefix_wd, &u.w_d));
            out.push((prefix_bd, &u.b_d));
            let gs = [&u.forget, &u.input, &u.output, &u.cell];
            for ((w, uu, b), g) in gates.iter().zip(gs) {
                out.push((w, &g.w));
                out.push((uu, &g.u));
                out.push((b, &g.b));
            }
        }
        let mut out = Vec::with_capacity(Self::ENTRY_COUNT);
        out.push(("interact.w1", &self.interact.w1));
        out.push(("interact.w2", &self.interact.w2));
        out.push(("interact.b", &self.interact.b));
        unit(
            "s_update.w_d",
            "s_update.b_d",
            [
                ("s_update.forget.w", "s_update.forget.u", "s_update.forget.b"),
                ("s_update.input.w", "s_update.input.u", "s_update.input.b"),
                ("s_update.output.w", "s_update.output.u", "s_update.output.b"),
                ("s_update.cell.w", "s_update.cell.u", "s_update.cell.b"),
            ],
            &self.s_update,
            &mut out,
        );
        unit(
            "g_update.w_d",
            "g_update.b_d",
            [
                ("g_update.forget.w", "g_update.forget.u", "g_update.forget.b"),
                ("g_update.input.w", "g_update.input.u", "g_update.input.b"),
                ("g_update.output.w", "g_update.output.u", "g_update.output.b"),
                ("g_update.cell.w", "g_update.cell.u", "g_update.cell.b"),
            ],
            &self.g_update,
            &mut out,
        );
        out.push(("merge.w_src", &self.merge.w_src));
        out.push(("merge.w_tgt", &self.merge.w_tgt));
        out.push(("merge.b", &self.merge.b));
        out.push(("prop.src_to_src", &self.prop.src_to_src));
        out.push(("prop.src_to_tgt", &self.prop.src_to_tgt));
        out.push(("prop.tgt_to_src", &self.prop.tgt_to_src));
        out.push(("prop.tgt_to_tgt", &self.prop.tgt_to_tgt));
        out.push(("lp_proj.src", &self.lp_proj.src));
        out.push(("lp_proj.tgt", &self.lp_proj.tgt));
        out.push(("nc_proj", &self.nc_proj));
        debug_assert_eq!(out.len(), Self::ENTRY_COUNT);
        out
    }

    /// Mutable view in the same canonical order as [`ModelParams::entries`].
    pub fn entries_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        fn unit<'a>(
            prefix_wd: &'static str,
            prefix_bd: &'static str,
            gates: [(&'static str, &'static str, &'static str); 4],
            u: &'a mut UpdateUnitParams,
            out: &mut Vec<(&'static str, &'a mut Tensor)>,
        ) {
            out.push((prefix_wd, &mut u.w_d));
            out.push((prefix_bd, &mut u.b_d));
            let gs = [&mut u.forget, &mut u.input, &mut u.output, &mut u.cell];
            for ((w, uu, b), g) in gates.iter().zip(gs) {
                out.push((w, &mut g.w));
                out.push((uu, &mut g.u));
                out.push((b, &mut g.b));
            }
        }
        let mut out = Vec::with_capacity(Self::ENTRY_COUNT);
        out.push(("interact.w1", &mut self.interact.w1));
        out.push(("interact.w2", &mut self.interact.w2));
        out.push(("interact.b", &mut self.interact.b));
        unit(
            "s_update.w_d",
            "s_update.b_d",
            [
                ("s_update.forget.w", "s_update.forget.u", "s_update.forget.b"),
                ("s_update.input.w", "s_update.input.u", "s_update.input.b"),
                ("s_update.output.w", "s_update.output.u", "s_update.output.b"),
                ("s_update.cell.w", "s_update.cell.u", "s_update.cell.b"),
            ],
            &mut self.s_update,
            &mut out,
        );
        unit(
            "g_update.w_d",
            "g_update.b_d",
            [
                ("g_update.forget.w", "g_update.forget.u", "g_update.forget.b"),
                ("g_update.input.w", "g_update.input.u", "g_update.input.b"),
                ("g_update.output.w", "g_update.output.u", "g_update.output.b"),
                ("g_update.cell.w", "g_update.cell.u", "g_update.cell.b"),
            ],
            &mut self.g_update,
            &mut out,
        );
        out.push(("merge.w_src", &mut self.merge.w_src));
        out.push(("merge.w_tgt", &mut self.merge.w_tgt));
        out.push(("merge.b", &mut self.merge.b));
        out.push(("prop.src_to_src", &mut self.prop.src_to_src));
        out.push(("prop.src_to_tgt", &mut self.prop.src_to_tgt));
        out.push(("prop.tgt_to_src", &mut self.prop.tgt_to_src));
        out.push(("prop.tgt_to_tgt", &mut self.prop.tgt_to_tgt));
        out.push(("lp_proj.src", &mut self.lp_proj.src));
        out.push(("lp_proj.tgt", &mut self.lp_proj.tgt));
        out.push(("nc_proj", &mut self.nc_proj));
        debug_assert_eq!(out.len(), Self::ENTRY_COUNT);
        out
    }

    /// Total scalar parameter count.
    pub fn n_scalars(&self) -> usize {
        self.entries().iter().map(|(_, t)| t.len()).sum()
    }

    /// All scalars concatenated in enumeration order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_scalars());
        for (_, t) in self.entries() {
            out.extend_from_slice(t.data());
        }
        out
    }

    /// Inverse of [`ModelParams::flatten`]; `flat` must have exactly
    /// the right length.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<(), MathError> {
        if flat.len() != self.n_scalars() {
            return Err(MathError::ShapeMismatch {
                op: "assign_flat",
                left: vec![self.n_scalars()],
                right: vec![flat.len()],
            });
        }
        let mut offset = 0;
        for (_, t) in self.entries_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}
