//! Message-passing layers. Weights use row convention: `X' = X W`.

use crate::error::Result;
use crate::tensor::{Activation, Matrix, Tape, Var};

fn activate(tape: &mut Tape, v: Var, act: Option<Activation>) -> Var {
    match act {
        Some(a) => a.apply(tape, v),
        None => v,
    }
}

/// `φ(Â X W)` with a precomputed propagation operator `Â`.
pub fn gcn_layer(
    tape: &mut Tape,
    x: Var,
    a_hat: &Matrix,
    w: Var,
    act: Option<Activation>,
) -> Result<Var> {
    let a = tape.constant(a_hat.clone());
    let ax = tape.matmul(a, x)?;
    let z = tape.matmul(ax, w)?;
    Ok(activate(tape, z, act))
}

/// `φ([X ‖ M X] W)` where `M` row-averages each node's neighbors.
pub fn sage_layer(
    tape: &mut Tape,
    x: Var,
    mean_op: &Matrix,
    w: Var,
    act: Option<Activation>,
) -> Result<Var> {
    let m = tape.constant(mean_op.clone());
    let agg = tape.matmul(m, x)?;
    let both = tape.concat_cols(&[x, agg])?;
    let z = tape.matmul(both, w)?;
    Ok(activate(tape, z, act))
}

#[derive(Debug, Clone, Copy)]
pub struct GatHead {
    pub w: Var,
    /// `f × 1` scoring vector applied to the source node.
    pub a_src: Var,
    /// `f × 1` scoring vector applied to the target node.
    pub a_dst: Var,
}

pub const GAT_SLOPE: f64 = 0.2;

/// One attention head. `mask[v][u]` is nonzero when `u` is in the scope of
/// `v` (its neighbors and itself). Returns the head output and the `n × n`
/// attention matrix whose row `v` holds the weights over `v`'s scope.
pub fn gat_head(tape: &mut Tape, x: Var, mask: &Matrix, head: GatHead) -> Result<(Var, Var)> {
    let wh = tape.matmul(x, head.w)?;
    let s_src = tape.matmul(wh, head.a_src)?;
    let s_dst = tape.matmul(wh, head.a_dst)?;
    let s_src_row = tape.transpose(s_src);
    let scores = tape.outer_add(s_dst, s_src_row)?;
    let scores = tape.leaky_relu(scores, GAT_SLOPE);
    let alpha = tape.masked_softmax_rows(scores, mask)?;
    let out = tape.matmul(alpha, wh)?;
    Ok((out, alpha))
}

/// Multi-head attention layer: heads are concatenated when `concat`, else
/// averaged. `φ` is applied after combining.
pub fn gat_layer(
    tape: &mut Tape,
    x: Var,
    mask: &Matrix,
    heads: &[GatHead],
    concat: bool,
    act: Option<Activation>,
) -> Result<Var> {
    let mut outs = Vec::with_capacity(heads.len());
    for &h in heads {
        outs.push(gat_head(tape, x, mask, h)?.0);
    }
    let z = if concat {
        tape.concat_cols(&outs)?
    } else {
        let mut acc = outs[0];
        for &o in &outs[1..] {
            acc = tape.add(acc, o)?;
        }
        tape.scale(acc, 1.0 / outs.len() as f64)
    };
    Ok(activate(tape, z, act))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gcn_operator, mean_operator, Neighborhood};
    use ndarray::array;

    #[test]
    fn gcn_single_node_identity() {
        let mut t = Tape::new();
        let x = t.constant(array![[0.5, -2.0]]);
        let w = t.constant(Matrix::eye(2));
        let out = gcn_layer(
            &mut t,
            x,
            &gcn_operator(1, &[], Neighborhood::Symmetric),
            w,
            None,
        )
        .unwrap();
        assert_eq!(t.value(out), &array![[0.5, -2.0]]);
    }

    #[test]
    fn gat_self_only_scope_returns_wx() {
        let mut t = Tape::new();
        let x = t.constant(array![[1.0, 2.0]]);
        let w = t.constant(array![[1.0, 0.0, 2.0], [0.0, 1.0, -1.0]]);
        let a = t.constant(array![[0.3], [0.1], [-0.2]]);
        let head = GatHead {
            w,
            a_src: a,
            a_dst: a,
        };
        let (out, alpha) = gat_head(&mut t, x, &array![[1.0]], head).unwrap();
        assert_eq!(t.value(alpha), &array![[1.0]]);
        assert_eq!(t.value(out), &array![[1.0, 2.0, 0.0]]);
    }

    #[test]
    fn sage_isolated_node_uses_zero_aggregate() {
        let mut t = Tape::new();
        let x = t.constant(array![[1.0, 2.0]]);
        let w = t.constant(array![[1.0], [1.0], [5.0], [5.0]]);
        let out = sage_layer(
            &mut t,
            x,
            &mean_operator(1, &[], Neighborhood::Symmetric),
            w,
            None,
        )
        .unwrap();
        assert_eq!(t.value(out), &array![[3.0]]);
    }
}
