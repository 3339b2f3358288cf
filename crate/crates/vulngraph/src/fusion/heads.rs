//! Projection, fusion and classifier blocks on a tape. All inputs are
//! batches of row vectors.

use crate::error::Result;
use crate::tensor::{Activation, Matrix, ParamStore, Tape, Var, LAYER_NORM_EPS};

/// `LayerNorm(φ(X W + b)) ⊙ γ + β` with parameters `{prefix}.{w,b,gamma,beta}`.
pub fn project(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    x: Var,
    act: Activation,
) -> Result<Var> {
    let w = tape.param(store, &format!("{prefix}.w"))?;
    let b = tape.param(store, &format!("{prefix}.b"))?;
    let gamma = tape.param(store, &format!("{prefix}.gamma"))?;
    let beta = tape.param(store, &format!("{prefix}.beta"))?;
    let z = tape.matmul(x, w)?;
    let z = tape.add_row(z, b)?;
    let z = act.apply(tape, z);
    let z = tape.layer_norm_rows(z, LAYER_NORM_EPS);
    let z = tape.mul_row(z, gamma)?;
    tape.add_row(z, beta)
}

pub fn fuse_concat(tape: &mut Tape, g: Var, l: Var) -> Result<Var> {
    tape.concat_cols(&[g, l])
}

#[derive(Debug, Clone, Copy)]
pub struct GateParams {
    pub w_e: Var,
    pub b_e: Var,
    pub w_e2: Var,
    pub b_e2: Var,
    pub v: Var,
}

impl GateParams {
    pub fn bind(tape: &mut Tape, store: &ParamStore) -> Result<Self> {
        Ok(Self {
            w_e: tape.param(store, "fuse.gate.w_e")?,
            b_e: tape.param(store, "fuse.gate.b_e")?,
            w_e2: tape.param(store, "fuse.gate.w_e2")?,
            b_e2: tape.param(store, "fuse.gate.b_e2")?,
            v: tape.param(store, "fuse.gate.v")?,
        })
    }
}

/// Gate scores `[e_g, e_l]` as a `B × 2` matrix.
pub fn gate_scores(tape: &mut Tape, p: GateParams, g: Var, l: Var) -> Result<Var> {
    let gl = tape.concat_cols(&[g, l])?;
    let lg = tape.concat_cols(&[l, g])?;
    let hg = tape.matmul(gl, p.w_e)?;
    let hg = tape.add_row(hg, p.b_e)?;
    let hg = tape.tanh(hg);
    let e_g = tape.matmul(hg, p.v)?;
    let hl = tape.matmul(lg, p.w_e2)?;
    let hl = tape.add_row(hl, p.b_e2)?;
    let hl = tape.tanh(hl);
    let e_l = tape.matmul(hl, p.v)?;
    tape.concat_cols(&[e_g, e_l])
}

/// `ĥ = a_g ĝ + a_l l̂` for a `B × 2` weight matrix `a`.
pub fn gate_combine(tape: &mut Tape, a: Var, g: Var, l: Var) -> Result<Var> {
    let a_g = tape.slice_cols(a, 0, 1)?;
    let a_l = tape.slice_cols(a, 1, 2)?;
    let wg = tape.mul_col(g, a_g)?;
    let wl = tape.mul_col(l, a_l)?;
    tape.add(wg, wl)
}

/// Two-way softmax of `B × 2` scores written as `a_g = σ(e_g − e_l)`,
/// `a_l = 1 − a_g`, so that `a_g + a_l` rounds to exactly 1.
pub fn gate_weights(tape: &mut Tape, scores: Var) -> Result<Var> {
    let e_g = tape.slice_cols(scores, 0, 1)?;
    let e_l = tape.slice_cols(scores, 1, 2)?;
    let d = tape.sub(e_g, e_l)?;
    let a_g = tape.sigmoid(d);
    let neg = tape.scale(a_g, -1.0);
    let one = tape.constant(Matrix::ones(tape.shape(a_g)));
    let a_l = tape.add(one, neg)?;
    tape.concat_cols(&[a_g, a_l])
}

/// Returns `(ĥ, a)` where `a = softmax([e_g, e_l])` row-wise.
pub fn fuse_gate(tape: &mut Tape, p: GateParams, g: Var, l: Var) -> Result<(Var, Var)> {
    let scores = gate_scores(tape, p, g, l)?;
    let a = gate_weights(tape, scores)?;
    Ok((gate_combine(tape, a, g, l)?, a))
}

#[derive(Debug, Clone, Copy)]
pub struct CrossAttentionParams {
    pub w_q: Var,
    pub w_k: Var,
    pub w_v: Var,
}

impl CrossAttentionParams {
    pub fn bind(tape: &mut Tape, store: &ParamStore) -> Result<Self> {
        Ok(Self {
            w_q: tape.param(store, "fuse.xattn.w_q")?,
            w_k: tape.param(store, "fuse.xattn.w_k")?,
            w_v: tape.param(store, "fuse.xattn.w_v")?,
        })
    }
}

/// One query row attending over `n` key/value rows. Returns `(F, α)` with
/// `F` of shape `1 × d_k` and `α` of shape `1 × n`.
pub fn fuse_cross_attention(
    tape: &mut Tape,
    p: CrossAttentionParams,
    query: Var,
    nodes: Var,
) -> Result<(Var, Var)> {
    let q = tape.matmul(query, p.w_q)?;
    let k = tape.matmul(nodes, p.w_k)?;
    let v = tape.matmul(nodes, p.w_v)?;
    let d_k = tape.shape(q).1 as f64;
    let kt = tape.transpose(k);
    let scores = tape.matmul(q, kt)?;
    let scores = tape.scale(scores, 1.0 / d_k.sqrt());
    let alpha = tape.softmax_rows(scores);
    Ok((tape.matmul(alpha, v)?, alpha))
}

/// MLP layers `cls.{i}.{w,b}` with `φ`, then the scalar head `cls.out.{w,b}`.
/// Returns a `B × 1` logit column.
pub fn classify(
    tape: &mut Tape,
    store: &ParamStore,
    u: Var,
    hidden_layers: usize,
    act: Activation,
) -> Result<Var> {
    let mut h = u;
    for i in 0..hidden_layers {
        let w = tape.param(store, &format!("cls.{i}.w"))?;
        let b = tape.param(store, &format!("cls.{i}.b"))?;
        let z = tape.matmul(h, w)?;
        let z = tape.add_row(z, b)?;
        h = act.apply(tape, z);
    }
    let w = tape.param(store, "cls.out.w")?;
    let b = tape.param(store, "cls.out.b")?;
    let s = tape.matmul(h, w)?;
    tape.add_row(s, b)
}

/// A constant `B × 2` gate with every row equal to `[a_g, 1 − a_g]`.
pub fn frozen_gate(tape: &mut Tape, batch: usize, a_g: f64) -> Var {
    tape.constant(Matrix::from_shape_fn((batch, 2), |(_, j)| {
        if j == 0 {
            a_g
        } else {
            1.0 - a_g
        }
    }))
}
