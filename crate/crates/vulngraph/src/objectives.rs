//! Training objective: weighted BCE on logits, in-batch InfoNCE between the
//! projected modalities, and an edge-sum Laplacian smoothness penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub lambda_nce: f64,
    pub lambda_lap: f64,
    pub tau: f64,
    /// Weight on positive examples. `None` means `N_neg / N_pos` of the
    /// training split.
    pub pos_weight: Option<f64>,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_nce: 0.1,
            lambda_lap: 0.01,
            tau: 0.1,
            pos_weight: None,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.lambda_nce, self.lambda_lap, self.tau]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.lambda_nce < 0.0 || self.lambda_lap < 0.0 || self.tau <= 0.0 {
            return Err(Error::Config(
                "loss weights must be finite and non-negative, tau positive".into(),
            ));
        }
        if let Some(w) = self.pos_weight {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Config(format!(
                    "pos_weight {w} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// `N_neg / N_pos`, or 1 when either class is absent.
pub fn balanced_pos_weight(labels: &[u8]) -> f64 {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        1.0
    } else {
        neg as f64 / pos as f64
    }
}

/// Mean binary cross-entropy from a `B × 1` logit column, using
/// `softplus(−s)` for positives and `softplus(s)` for negatives.
pub fn bce_with_logits(
    tape: &mut Tape,
    logits: Var,
    labels: &[f64],
    pos_weight: f64,
) -> Result<Var> {
    let (b, c) = tape.shape(logits);
    if c != 1 || b != labels.len() || b == 0 {
        return Err(Error::shape(
            "bce",
            format!("{} x 1", labels.len()),
            format!("{b} x {c}"),
        ));
    }
    let pos = Matrix::from_shape_fn((b, 1), |(i, _)| labels[i] * pos_weight);
    let neg = Matrix::from_shape_fn((b, 1), |(i, _)| 1.0 - labels[i]);
    let neg_logits = tape.scale(logits, -1.0);
    let sp_neg = tape.softplus(neg_logits);
    let sp_pos = tape.softplus(logits);
    let pos = tape.constant(pos);
    let neg = tape.constant(neg);
    let a = tape.mul(pos, sp_neg)?;
    let bb = tape.mul(neg, sp_pos)?;
    let per = tape.add(a, bb)?;
    let total = tape.sum(per);
    Ok(tape.scale(total, 1.0 / b as f64))
}

/// In-batch InfoNCE with dot-product similarity, matching row `i` of `g`
/// with row `i` of `l`.
pub fn info_nce(tape: &mut Tape, g: Var, l: Var, tau: f64) -> Result<Var> {
    let (n, d) = tape.shape(g);
    if tape.shape(l) != (n, d) || n == 0 {
        return Err(Error::shape(
            "info_nce",
            format!("{n} x {d}"),
            format!("{:?}", tape.shape(l)),
        ));
    }
    let lt = tape.transpose(l);
    let sims = tape.matmul(g, lt)?;
    let logits = tape.scale(sims, 1.0 / tau);
    let logp = tape.log_softmax_rows(logits);
    let eye = tape.constant(Matrix::eye(n));
    let diag = tape.mul(logp, eye)?;
    let total = tape.sum(diag);
    Ok(tape.scale(total, -1.0 / n as f64))
}

/// `Σ_{(u,v)∈E} ‖h_u − h_v‖²` for one graph, over its directed edges.
pub fn edge_sum(tape: &mut Tape, h: Var, edges: &[(usize, usize)]) -> Result<Var> {
    let n = tape.shape(h).0;
    if edges.is_empty() {
        let z = tape.constant(Matrix::zeros((1, 1)));
        return Ok(z);
    }
    let mut inc = Matrix::zeros((edges.len(), n));
    for (k, &(u, v)) in edges.iter().enumerate() {
        if u >= n || v >= n {
            return Err(Error::shape(
                "laplacian_reg",
                format!("node ids < {n}"),
                format!("edge ({u}, {v})"),
            ));
        }
        inc[[k, u]] += 1.0;
        inc[[k, v]] -= 1.0;
    }
    let inc = tape.constant(inc);
    let diff = tape.matmul(inc, h)?;
    let sq = tape.mul(diff, diff)?;
    Ok(tape.sum(sq))
}

/// Mean of [`edge_sum`] over the graphs in a batch.
pub fn laplacian_reg(tape: &mut Tape, graphs: &[(Var, &[(usize, usize)])]) -> Result<Var> {
    if graphs.is_empty() {
        return Ok(tape.constant(Matrix::zeros((1, 1))));
    }
    let mut acc: Option<Var> = None;
    for &(h, edges) in graphs {
        let term = edge_sum(tape, h, edges)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, term)?,
            None => term,
        });
    }
    let acc = acc.expect("non-empty batch");
    Ok(tape.scale(acc, 1.0 / graphs.len() as f64))
}

#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub cls: Var,
    pub nce: Var,
    pub lap: Var,
}

/// `L_cls + λ_nce·L_nce + λ_lap·L_lap`.
pub fn total_loss(tape: &mut Tape, parts: LossParts, cfg: &LossConfig) -> Result<Var> {
    let nce = tape.scale(parts.nce, cfg.lambda_nce);
    let lap = tape.scale(parts.lap, cfg.lambda_lap);
    let l = tape.add(parts.cls, nce)?;
    tape.add(l, lap)
}
