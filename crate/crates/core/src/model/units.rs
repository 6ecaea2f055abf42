//! Tape-level building blocks of the model: interaction encoding, the
//! time-adjusted recurrent update, merge, decay/filter, and attention.
//!
//! Every unit takes mounted parameter vars plus input vars and appends
//! to the caller's [`Tape`], so a whole mini-batch (and everything the
//! loss needs) lives on one tape and differentiates in one sweep.

use crate::model::{DecayKind, HyperParams, ModelParams};
use crate::ndmath::{MathError, Tape, Tensor, Var};

#[derive(Clone, Copy)]
pub struct GateVars {
    pub w: Var,
    pub u: Var,
    pub b: Var,
}

#[derive(Clone, Copy)]
pub struct UpdateUnitVars {
    pub w_d: Var,
    pub b_d: Var,
    pub forget: GateVars,
    pub input: GateVars,
    pub output: GateVars,
    pub cell: GateVars,
}

#[derive(Clone, Copy)]
pub struct InteractVars {
    pub w1: Var,
    pub w2: Var,
    pub b: Var,
}

#[derive(Clone, Copy)]
pub struct MergeVars {
    pub w_src: Var,
    pub w_tgt: Var,
    pub b: Var,
}

#[derive(Clone, Copy)]
pub struct PropVars {
    pub src_to_src: Var,
    pub src_to_tgt: Var,
    pub tgt_to_src: Var,
    pub tgt_to_tgt: Var,
}

#[derive(Clone, Copy)]
pub struct LinkProjVars {
    pub src: Var,
    pub tgt: Var,
}

/// All model parameters lifted onto one tape.
#[derive(Clone, Copy)]
pub struct ParamVars {
    pub interact: InteractVars,
    pub s_update: UpdateUnitVars,
    pub g_update: UpdateUnitVars,
    pub merge: MergeVars,
    pub prop: PropVars,
    pub lp_proj: LinkProjVars,
    pub nc_proj: Var,
}

/// Record every parameter as a leaf, in the canonical enumeration
/// order of [`ModelParams::entries`].
pub fn mount_params(tape: &mut Tape, p: &ModelParams) -> Result<ParamVars, MathError> {
    let mut vars = Vec::with_capacity(ModelParams::ENTRY_COUNT);
    for (_, t) in p.entries() {
        vars.push(tape.leaf(t.clone())?);
    }
    let v = |i: usize| vars[i];
    let unit = |o: usize| UpdateUnitVars {
        w_d: v(o),
        b_d: v(o + 1),
        forget: GateVars {
            w: v(o + 2),
            u: v(o + 3),
            b: v(o + 4),
        },
        input: GateVars {
            w: v(o + 5),
            u: v(o + 6),
            b: v(o + 7),
        },
        output: GateVars {
            w: v(o + 8),
            u: v(o + 9),
            b: v(o + 10),
        },
        cell: GateVars {
            w: v(o + 11),
            u: v(o + 12),
            b: v(o + 13),
        },
    };
    Ok(ParamVars {
        interact: InteractVars {
            w1: v(0),
            w2: v(1),
            b: v(2),
        },
        s_update: unit(3),
        g_update: unit(17),
        merge: MergeVars {
            w_src: v(31),
            w_tgt: v(32),
            b: v(33),
        },
        prop: PropVars {
            src_to_src: v(34),
            src_to_tgt: v(35),
            tgt_to_src: v(36),
            tgt_to_tgt: v(37),
        },
        lp_proj: LinkProjVars {
            src: v(38),
            tgt: v(39),
        },
        nc_proj: v(40),
    })
}

impl ParamVars {
    /// Vars in the canonical enumeration order, for aligned gradient
    /// extraction.
    pub fn ordered(&self) -> Vec<Var> {
        let unit = |u: &UpdateUnitVars| {
            vec![
                u.w_d, u.b_d, u.forget.w, u.forget.u, u.forget.b, u.input.w, u.input.u, u.input.b,
                u.output.w, u.output.u, u.output.b, u.cell.w, u.cell.u, u.cell.b,
            ]
        };
        let mut out = vec![self.interact.w1, self.interact.w2, self.interact.b];
        out.extend(unit(&self.s_update));
        out.extend(unit(&self.g_update));
        out.extend([
            self.merge.w_src,
            self.merge.w_tgt,
            self.merge.b,
            self.prop.src_to_src,
            self.prop.src_to_tgt,
            self.prop.tgt_to_src,
            self.prop.tgt_to_tgt,
            self.lp_proj.src,
            self.lp_proj.tgt,
            self.nc_proj,
        ]);
        debug_assert_eq!(out.len(), ModelParams::ENTRY_COUNT);
        out
    }
}

/// Time decay in (0, 1], strictly decreasing, 1 at zero interval.
pub fn decay_g(kind: DecayKind, dt: f64) -> Result<f64, MathError> {
    if !dt.is_finite() || dt < 0.0 {
        return Err(MathError::domain(
            "decay_g",
            format!("interval must be finite and non-negative, got {dt}"),
        ));
    }
    Ok(match kind {
        DecayKind::ReciprocalLog => 1.0 / (std::f64::consts::E + dt).ln(),
        DecayKind::Exponential => (-dt).exp(),
    })
}

/// Propagation filter: 1 while the neighbor's last interaction is
/// within `tau` (boundary inclusive), 0 once it is older.
pub fn filter_h(dt: f64, tau: f64) -> f64 {
    if dt <= tau {
        1.0
    } else {
        0.0
    }
}

/// Interaction information `e(t) = tanh(W1 u_src + W2 u_dst + b)`,
/// from the endpoints' pre-event general features.
pub fn interact(
    tape: &mut Tape,
    p: &InteractVars,
    u_src: Var,
    u_dst: Var,
) -> Result<Var, MathError> {
    let a = tape.matvec(p.w1, u_src)?;
    let b = tape.matvec(p.w2, u_dst)?;
    let sum = tape.add(a, b)?;
    let pre = tape.add(sum, p.b)?;
    tape.tanh(pre)
}

/// Split the cell into long- and short-term parts and decay only the
/// short-term part:
///
/// `C_I = tanh(W_d C + b_d)`, `C* = (C - C_I) + C_I * g(dt)`.
///
/// With time intervals disabled (or dt = 0) the decay is exactly 1 and
/// the unit is the identity; that case returns `c` itself rather than
/// recomputing `(C - C_I) + C_I`, which under floating point would not
/// be bit-equal to `C`. The shortcut is also gradient-exact: at g = 1
/// the analytic derivative w.r.t. (W_d, b_d) is zero and w.r.t. C is
/// the identity.
pub fn time_adjust_cell(
    tape: &mut Tape,
    w_d: Var,
    b_d: Var,
    c: Var,
    dt: f64,
    hp: &HyperParams,
) -> Result<Var, MathError> {
    let g = if hp.time_intervals_enabled {
        decay_g(hp.decay, dt)?
    } else {
        1.0
    };
    if g == 1.0 {
        return Ok(c);
    }
    let pre = tape.matvec(w_d, c)?;
    let pre = tape.add(pre, b_d)?;
    let c_i = tape.tanh(pre)?;
    let c_long = tape.sub(c, c_i)?;
    let c_decayed = tape.scale(c_i, g)?;
    tape.add(c_long, c_decayed)
}

/// Standard gated recurrent step on the adjusted cell:
/// `f,i,o = sigma(W e + U h + b)`, `C~ = tanh(W_c e + U_c h + b_c)`,
/// `C' = f o C* + i o C~`, `h' = o o tanh(C')`.
pub fn lstm_step(
    tape: &mut Tape,
    unit: &UpdateUnitVars,
    c_star: Var,
    h_prev: Var,
    e: Var,
) -> Result<(Var, Var), MathError> {
    let gate = |tape: &mut Tape, g: &GateVars| -> Result<Var, MathError> {
        let we = tape.matvec(g.w, e)?;
        let uh = tape.matvec(g.u, h_prev)?;
        let sum = tape.add(we, uh)?;
        let pre = tape.add(sum, g.b)?;
        tape.sigmoid(pre)
    };
    let f = gate(tape, &unit.forget)?;
    let i = gate(tape, &unit.input)?;
    let o = gate(tape, &unit.output)?;
    let we = tape.matvec(unit.cell.w, e)?;
    let uh = tape.matvec(unit.cell.u, h_prev)?;
    let sum = tape.add(we, uh)?;
    let pre = tape.add(sum, unit.cell.b)?;
    let c_tilde = tape.tanh(pre)?;

    let keep = tape.hadamard(f, c_star)?;
    let write = tape.hadamard(i, c_tilde)?;
    let c_new = tape.add(keep, write)?;
    let c_act = tape.tanh(c_new)?;
    let h_new = tape.hadamard(o, c_act)?;
    Ok((c_new, h_new))
}

/// Full role update: time-adjust the cell by the node's own interval,
/// then run the recurrent step on the interaction information.
pub fn update_unit(
    tape: &mut Tape,
    unit: &UpdateUnitVars,
    c_prev: Var,
    h_prev: Var,
    e: Var,
    dt: f64,
    hp: &HyperParams,
) -> Result<(Var, Var), MathError> {
    let c_star = time_adjust_cell(tape, unit.w_d, unit.b_d, c_prev, dt, hp)?;
    lstm_step(tape, unit, c_star, h_prev, e)
}

/// General features from the two role hidden states:
/// `u = W_src h_src + W_tgt h_tgt + b` (linear, no activation).
pub fn merge(
    tape: &mut Tape,
    p: &MergeVars,
    h_src_role: Var,
    h_tgt_role: Var,
) -> Result<Var, MathError> {
    let a = tape.matvec(p.w_src, h_src_role)?;
    let b = tape.matvec(p.w_tgt, h_tgt_role)?;
    let sum = tape.add(a, b)?;
    tape.add(sum, p.b)
}

/// Tie-strength weights over a center node's role neighbors: softmax of
/// `u_x . u_center` over the FULL neighbor list (the filter is applied
/// multiplicatively afterwards and does not renormalize). All features
/// are pre-event. With attention disabled the weights are a constant
/// uniform 1/n.
pub fn attention_weights(
    tape: &mut Tape,
    neighbor_us: &[Var],
    center_u: Var,
    enabled: bool,
) -> Result<Var, MathError> {
    if neighbor_us.is_empty() {
        return Err(MathError::domain(
            "attention_weights",
            "empty neighbor list: skip propagation instead",
        ));
    }
    if !enabled {
        let n = neighbor_us.len();
        return tape.leaf(Tensor::vector(vec![1.0 / n as f64; n]));
    }
    let mut scores = Vec::with_capacity(neighbor_us.len());
    for &u_x in neighbor_us {
        scores.push(tape.dot(u_x, center_u)?);
    }
    let stacked = tape.stack(&scores)?;
    tape.softmax(stacked)
}

/// Value-level attention probe for tests and diagnostics; same math as
/// [`attention_weights`] on a scratch tape.
pub fn attention_probe(
    neighbor_us: &[Tensor],
    center_u: &Tensor,
    enabled: bool,
) -> Result<Tensor, MathError> {
    let mut tape = Tape::new();
    let center = tape.leaf(center_u.clone())?;
    let mut vars = Vec::with_capacity(neighbor_us.len());
    for u in neighbor_us {
        vars.push(tape.leaf(u.clone())?);
    }
    let w = attention_weights(&mut tape, &vars, center, enabled)?;
    Ok(tape.value(w).clone())
}
