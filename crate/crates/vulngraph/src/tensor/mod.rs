//! Dense 2-D tensors with tape-based reverse-mode differentiation.
//!
//! Every value is an `f64` matrix; vectors are `1 × n` rows. A [`Tape`]
//! records each operation as it is evaluated, and [`Tape::backward`] walks
//! the record in reverse, summing gradient contributions when a value feeds
//! more than one downstream op.
//!
//! ```
//! use ndarray::array;
//! use vulngraph::tensor::Tape;
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(array![[1.0, -2.0, 3.0]]);
//! let sq = tape.mul(x, x).unwrap();
//! let loss = tape.sum(sq);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap(), &array![[2.0, -4.0, 6.0]]);
//! ```

mod gradcheck;
mod optim;
mod params;

use std::collections::HashMap;
use std::f64::consts::PI;

use ndarray::{s, Array2, Axis};

use crate::error::{Error, Result};

pub use gradcheck::{grad_check, grad_check_params};
pub use optim::{Adam, AdamConfig};
pub use params::{xavier_uniform, ParamStore};

pub type Matrix = Array2<f64>;

/// Epsilon guard used by [`Tape::l2_normalize_rows`].
pub const NORM_EPS: f64 = 1e-8;
/// Variance guard used by [`Tape::layer_norm_rows`].
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Nonlinearity `φ` used by encoder hidden layers, projection heads and the
/// classifier MLP.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Gelu,
    Relu,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, a: Var) -> Var {
        match self {
            Activation::Gelu => tape.gelu(a),
            Activation::Relu => tape.relu(a),
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => gelu(x),
            Activation::Relu => x.max(0.0),
        }
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize, usize),
    SliceCols(Var, usize, usize),
    Transpose(Var),
    Sum(Var),
    MeanRows(Var),
    MaxRows(Var, Vec<usize>),
    L2NormalizeRows(Var, Vec<f64>),
    Relu(Var),
    LeakyRelu(Var, f64),
    Gelu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softplus(Var),
    Exp(Var),
    Log(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    MaskedSoftmaxRows(Var),
    LayerNormRows(Var, Vec<f64>),
    OuterAdd(Var, Var),
    Dropout(Var, Matrix),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    tracked: bool,
}

/// Records a computation for reverse-mode differentiation.
///
/// A tape is confined to one thread; build a fresh tape per forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<String, Var>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros shaped like it when `v` did not influence the output.
    pub fn get_or_zeros(&self, tape: &Tape, v: Var) -> Matrix {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(tape.value(v).raw_dim()))
    }

    /// Gradients for every parameter bound on `tape`, keyed by parameter name.
    pub fn params(&self, tape: &Tape) -> HashMap<String, Matrix> {
        tape.params
            .iter()
            .map(|(name, &v)| (name.clone(), self.get_or_zeros(tape, v)))
            .collect()
    }
}

fn dims(m: &Matrix) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

fn gelu_inner(x: f64) -> f64 {
    (2.0 / PI).sqrt() * (x + 0.044715 * x * x * x)
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + gelu_inner(x).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = gelu_inner(x).tanh();
    let dinner = (2.0 / PI).sqrt() * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn softmax_row_in_place(mut row: ndarray::ArrayViewMut1<f64>) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    row.mapv_inplace(|v| (v - max).exp());
    let total: f64 = row.sum();
    row.mapv_inplace(|v| v / total);
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, tracked: bool) -> Var {
        debug_assert!(
            value.iter().all(|v| v.is_finite()),
            "non-finite value from {op:?}"
        );
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].tracked)
    }

    fn unary(&mut self, a: Var, value: Matrix, op: Op) -> Var {
        let tracked = self.tracked(&[a]);
        self.push(value, op, tracked)
    }

    /// Untracked input; never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Tracked input whose gradient is reported by [`Tape::backward`].
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Binds a named parameter from `store` as a tracked leaf. Binding the
    /// same name twice returns the same handle.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let value = store
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter {name}")))?
            .clone();
        let v = self.leaf(value);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ncols() != vb.nrows() {
            return Err(Error::shape(
                "matmul",
                format!("{} rows on rhs", va.ncols()),
                dims(vb),
            ));
        }
        let out = va.dot(vb);
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), tracked))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.dim() != vb.dim() {
            return Err(Error::shape(op, dims(va), dims(vb)));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a) + self.value(b);
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), tracked))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a) - self.value(b);
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), tracked))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a) * self.value(b);
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), tracked))
    }

    fn check_row(&self, op: &'static str, a: Var, row: Var) -> Result<()> {
        let (va, vr) = (self.value(a), self.value(row));
        if vr.nrows() != 1 || vr.ncols() != va.ncols() {
            return Err(Error::shape(op, format!("1x{}", va.ncols()), dims(vr)));
        }
        Ok(())
    }

    /// Adds a `1 × m` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.check_row("add_row", a, row)?;
        let out = self.value(a) + self.value(row);
        let tracked = self.tracked(&[a, row]);
        Ok(self.push(out, Op::AddRow(a, row), tracked))
    }

    /// Multiplies every row of `a` elementwise by a `1 × m` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.check_row("mul_row", a, row)?;
        let out = self.value(a) * self.value(row);
        let tracked = self.tracked(&[a, row]);
        Ok(self.push(out, Op::MulRow(a, row), tracked))
    }

    /// Scales row `i` of `a` by `col[i]`, where `col` is `n × 1`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (va, vc) = (self.value(a), self.value(col));
        if vc.ncols() != 1 || vc.nrows() != va.nrows() {
            return Err(Error::shape(
                "mul_col",
                format!("{}x1", va.nrows()),
                dims(vc),
            ));
        }
        let out = va * vc;
        let tracked = self.tracked(&[a, col]);
        Ok(self.push(out, Op::MulCol(a, col), tracked))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a) * c;
        self.unary(a, out, Op::Scale(a, c))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views)
            .map_err(|e| Error::shape("concat_cols", "equal row counts", e.to_string()))?;
        let tracked = self.tracked(parts);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), tracked))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::shape("concat_rows", "equal column counts", e.to_string()))?;
        let tracked = self.tracked(parts);
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), tracked))
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let va = self.value(a);
        if start > end || end > va.nrows() {
            return Err(Error::shape(
                "slice_rows",
                format!("range within {} rows", va.nrows()),
                format!("{start}..{end}"),
            ));
        }
        let out = va.slice(s![start..end, ..]).to_owned();
        Ok(self.unary(a, out, Op::SliceRows(a, start, end)))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let va = self.value(a);
        if start > end || end > va.ncols() {
            return Err(Error::shape(
                "slice_cols",
                format!("range within {} cols", va.ncols()),
                format!("{start}..{end}"),
            ));
        }
        let out = va.slice(s![.., start..end]).to_owned();
        Ok(self.unary(a, out, Op::SliceCols(a, start, end)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).t().to_owned();
        self.unary(a, out, Op::Transpose(a))
    }

    /// Sum of all entries as a `1 × 1` value.
    pub fn sum(&mut self, a: Var) -> Var {
        let out = Matrix::from_elem((1, 1), self.value(a).sum());
        self.unary(a, out, Op::Sum(a))
    }

    /// Column-wise mean over rows, giving `1 × m`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        let out = va
            .mean_axis(Axis(0))
            .ok_or_else(|| Error::shape("mean_rows", "at least one row", dims(va)))?
            .insert_axis(Axis(0));
        Ok(self.unary(a, out, Op::MeanRows(a)))
    }

    /// Column-wise maximum over rows, giving `1 × m`. Ties go to the first row.
    pub fn max_rows(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        if va.nrows() == 0 {
            return Err(Error::shape("max_rows", "at least one row", dims(va)));
        }
        let mut arg = vec![0usize; va.ncols()];
        let mut out = Matrix::zeros((1, va.ncols()));
        for (j, col) in va.axis_iter(Axis(1)).enumerate() {
            let mut best = 0;
            for i in 1..col.len() {
                if col[i] > col[best] {
                    best = i;
                }
            }
            arg[j] = best;
            out[[0, j]] = col[best];
        }
        Ok(self.unary(a, out, Op::MaxRows(a, arg)))
    }

    /// Scales each row by `1 / max(‖row‖₂, ε)`; a zero row stays zero.
    pub fn l2_normalize_rows(&mut self, a: Var, eps: f64) -> Var {
        let va = self.value(a);
        let mut out = va.clone();
        let mut norms = Vec::with_capacity(va.nrows());
        for mut row in out.rows_mut() {
            let n = row.dot(&row).sqrt();
            norms.push(n);
            let d = n.max(eps);
            row.mapv_inplace(|v| v / d);
        }
        // denominator clamp threshold travels with the norms
        norms.push(eps);
        self.unary(a, out, Op::L2NormalizeRows(a, norms))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|v| v.max(0.0));
        self.unary(a, out, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).mapv(|v| if v > 0.0 { v } else { slope * v });
        self.unary(a, out, Op::LeakyRelu(a, slope))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(gelu);
        self.unary(a, out, Op::Gelu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::tanh);
        self.unary(a, out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(sigmoid);
        self.unary(a, out, Op::Sigmoid(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(softplus);
        self.unary(a, out, Op::Softplus(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::exp);
        self.unary(a, out, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        if let Some(bad) = va.iter().find(|&&v| v <= 0.0) {
            return Err(Error::Domain {
                op: "log",
                detail: format!("non-positive input {bad}"),
            });
        }
        let out = va.mapv(f64::ln);
        Ok(self.unary(a, out, Op::Log(a)))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for row in out.rows_mut() {
            softmax_row_in_place(row);
        }
        self.unary(a, out, Op::SoftmaxRows(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for mut row in out.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.mapv_inplace(|v| v - lse);
        }
        self.unary(a, out, Op::LogSoftmaxRows(a))
    }

    /// Row softmax restricted to entries where `mask` is nonzero; masked
    /// entries come out as exactly zero. `mask` must be a constant.
    pub fn masked_softmax_rows(&mut self, a: Var, mask: &Matrix) -> Result<Var> {
        let va = self.value(a);
        if va.dim() != mask.dim() {
            return Err(Error::shape("masked_softmax_rows", dims(va), dims(mask)));
        }
        let mut out = Matrix::zeros(va.raw_dim());
        for ((src, m), mut dst) in va.rows().into_iter().zip(mask.rows()).zip(out.rows_mut()) {
            let max = src
                .iter()
                .zip(m.iter())
                .filter(|(_, &k)| k != 0.0)
                .map(|(&v, _)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                continue;
            }
            let mut total = 0.0;
            for ((d, &v), &k) in dst.iter_mut().zip(src.iter()).zip(m.iter()) {
                if k != 0.0 {
                    *d = (v - max).exp();
                    total += *d;
                }
            }
            dst.mapv_inplace(|v| v / total);
        }
        Ok(self.unary(a, out, Op::MaskedSoftmaxRows(a)))
    }

    /// Per-row standardization `(x − μ) / sqrt(σ² + ε)` without affine terms.
    pub fn layer_norm_rows(&mut self, a: Var, eps: f64) -> Var {
        let mut out = self.value(a).clone();
        let mut inv_std = Vec::with_capacity(out.nrows());
        for mut row in out.rows_mut() {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let inv = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mean) * inv);
            inv_std.push(inv);
        }
        self.unary(a, out, Op::LayerNormRows(a, inv_std))
    }

    /// `out[i][j] = col[i] + row[j]` for an `n × 1` column and `1 × m` row.
    pub fn outer_add(&mut self, col: Var, row: Var) -> Result<Var> {
        let (vc, vr) = (self.value(col), self.value(row));
        if vc.ncols() != 1 || vr.nrows() != 1 {
            return Err(Error::shape(
                "outer_add",
                "n x 1 and 1 x m",
                format!("{} and {}", dims(vc), dims(vr)),
            ));
        }
        let out = vc + vr;
        let tracked = self.tracked(&[col, row]);
        Ok(self.push(out, Op::OuterAdd(col, row), tracked))
    }

    /// Inverted dropout with a precomputed keep mask (entries 0 or 1/(1-p)).
    pub fn dropout_with_mask(&mut self, a: Var, mask: Matrix) -> Result<Var> {
        let va = self.value(a);
        if va.dim() != mask.dim() {
            return Err(Error::shape("dropout", dims(va), dims(&mask)));
        }
        let out = va * &mask;
        Ok(self.unary(a, out, Op::Dropout(a, mask)))
    }

    /// Reverse pass from a `1 × 1` output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out_val = self.value(output);
        if out_val.dim() != (1, 1) {
            return Err(Error::shape("backward", "1x1", dims(out_val)));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Matrix::ones((1, 1)));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[idx];
        let y = &node.value;
        let mut acc = |v: Var, contrib: Matrix| {
            if !self.nodes[v.0].tracked {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => *existing += &contrib,
                slot @ None => *slot = Some(contrib),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                acc(*a, g.dot(&self.value(*b).t()));
                acc(*b, self.value(*a).t().dot(g));
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, -g);
            }
            Op::Mul(a, b) => {
                acc(*a, g * self.value(*b));
                acc(*b, g * self.value(*a));
            }
            Op::AddRow(a, r) => {
                acc(*a, g.clone());
                acc(*r, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::MulRow(a, r) => {
                acc(*a, g * self.value(*r));
                acc(
                    *r,
                    (g * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0)),
                );
            }
            Op::MulCol(a, c) => {
                acc(*a, g * self.value(*c));
                acc(
                    *c,
                    (g * self.value(*a)).sum_axis(Axis(1)).insert_axis(Axis(1)),
                );
            }
            Op::Scale(a, c) => acc(*a, g * *c),
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = self.value(p).ncols();
                    acc(p, g.slice(s![.., start..start + w]).to_owned());
                    start += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let h = self.value(p).nrows();
                    acc(p, g.slice(s![start..start + h, ..]).to_owned());
                    start += h;
                }
            }
            Op::SliceRows(a, start, end) => {
                let mut full = Matrix::zeros(self.value(*a).raw_dim());
                full.slice_mut(s![*start..*end, ..]).assign(g);
                acc(*a, full);
            }
            Op::SliceCols(a, start, end) => {
                let mut full = Matrix::zeros(self.value(*a).raw_dim());
                full.slice_mut(s![.., *start..*end]).assign(g);
                acc(*a, full);
            }
            Op::Transpose(a) => acc(*a, g.t().to_owned()),
            Op::Sum(a) => acc(*a, Matrix::from_elem(self.value(*a).raw_dim(), g[[0, 0]])),
            Op::MeanRows(a) => {
                let va = self.value(*a);
                let n = va.nrows() as f64;
                let mut full = Matrix::zeros(va.raw_dim());
                for mut row in full.rows_mut() {
                    row.assign(&(g.row(0).to_owned() / n));
                }
                acc(*a, full);
            }
            Op::MaxRows(a, arg) => {
                let mut full = Matrix::zeros(self.value(*a).raw_dim());
                for (j, &i) in arg.iter().enumerate() {
                    full[[i, j]] = g[[0, j]];
                }
                acc(*a, full);
            }
            Op::L2NormalizeRows(a, norms) => {
                let x = self.value(*a);
                let eps = *norms.last().expect("eps recorded");
                let mut gx = Matrix::zeros(x.raw_dim());
                for i in 0..x.nrows() {
                    let n = norms[i];
                    let gi = g.row(i);
                    if n > eps {
                        // d(x/‖x‖) = (g − y (y·g)) / ‖x‖
                        let yi = y.row(i);
                        let proj = yi.dot(&gi);
                        let row = (&gi - &(&yi * proj)) / n;
                        gx.row_mut(i).assign(&row);
                    } else {
                        gx.row_mut(i).assign(&(&gi / eps));
                    }
                }
                acc(*a, gx);
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                acc(
                    *a,
                    ndarray::Zip::from(g)
                        .and(x)
                        .map_collect(|&gv, &xv| if xv > 0.0 { gv } else { 0.0 }),
                );
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.value(*a);
                acc(
                    *a,
                    ndarray::Zip::from(g).and(x).map_collect(|&gv, &xv| {
                        if xv > 0.0 {
                            gv
                        } else {
                            slope * gv
                        }
                    }),
                );
            }
            Op::Gelu(a) => {
                let x = self.value(*a);
                acc(
                    *a,
                    ndarray::Zip::from(g)
                        .and(x)
                        .map_collect(|&gv, &xv| gv * gelu_grad(xv)),
                );
            }
            Op::Tanh(a) => acc(*a, g * &y.mapv(|t| 1.0 - t * t)),
            Op::Sigmoid(a) => acc(*a, g * &y.mapv(|s| s * (1.0 - s))),
            Op::Softplus(a) => acc(*a, g * &self.value(*a).mapv(sigmoid)),
            Op::Exp(a) => acc(*a, g * y),
            Op::Log(a) => acc(*a, g / self.value(*a)),
            Op::SoftmaxRows(a) | Op::MaskedSoftmaxRows(a) => {
                // masked entries have y = 0 so they receive no gradient
                let mut gx = g * y;
                for (mut row, yr) in gx.rows_mut().into_iter().zip(y.rows()) {
                    let dot = row.sum();
                    row.zip_mut_with(&yr, |r, &yv| *r -= yv * dot);
                }
                acc(*a, gx);
            }
            Op::LogSoftmaxRows(a) => {
                let mut gx = g.clone();
                for (mut row, yr) in gx.rows_mut().into_iter().zip(y.rows()) {
                    let total = row.sum();
                    row.zip_mut_with(&yr, |r, &lv| *r -= lv.exp() * total);
                }
                acc(*a, gx);
            }
            Op::LayerNormRows(a, inv_std) => {
                let mut gx = Matrix::zeros(y.raw_dim());
                for i in 0..y.nrows() {
                    let gi = g.row(i);
                    let yi = y.row(i);
                    let n = gi.len() as f64;
                    let mean_g = gi.sum() / n;
                    let mean_gy = gi.dot(&yi) / n;
                    let row = (&gi - mean_g - &(&yi * mean_gy)) * inv_std[i];
                    gx.row_mut(i).assign(&row);
                }
                acc(*a, gx);
            }
            Op::OuterAdd(c, r) => {
                acc(*c, g.sum_axis(Axis(1)).insert_axis(Axis(1)));
                acc(*r, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Dropout(a, mask) => acc(*a, g * mask),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn sigmoid_at_zero() {
        let mut t = Tape::new();
        let x = t.leaf(array![[0.0]]);
        let y = t.sigmoid(x);
        assert_eq!(t.scalar(y), 0.5);
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap()[[0, 0]], 0.25);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let mut t = Tape::new();
        let x = t.constant(array![[0.0, 0.0]]);
        let y = t.softmax_rows(x);
        assert_eq!(t.value(y), &array![[0.5, 0.5]]);
    }

    #[test]
    fn layer_norm_of_constant_row_is_zero() {
        let mut t = Tape::new();
        let x = t.constant(array![[3.0, 3.0, 3.0, 3.0]]);
        let y = t.layer_norm_rows(x, LAYER_NORM_EPS);
        assert!(t.value(y).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn log_rejects_non_positive() {
        let mut t = Tape::new();
        let x = t.constant(array![[1.0, 0.0]]);
        assert!(matches!(t.log(x), Err(Error::Domain { op: "log", .. })));
    }

    #[test]
    fn matmul_shape_mismatch() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros((2, 3)));
        let b = t.constant(Matrix::zeros((2, 3)));
        assert!(matches!(
            t.matmul(a, b),
            Err(Error::ShapeMismatch { op: "matmul", .. })
        ));
    }

    #[test]
    fn zero_row_normalizes_to_zero() {
        let mut t = Tape::new();
        let x = t.constant(array![[0.0, 0.0], [3.0, 4.0]]);
        let y = t.l2_normalize_rows(x, NORM_EPS);
        assert_eq!(t.value(y), &array![[0.0, 0.0], [0.6, 0.8]]);
    }

    #[test]
    fn reused_value_accumulates_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(array![[2.0]]);
        let a = t.scale(x, 3.0);
        let b = t.add(a, x).unwrap();
        let g = t.backward(b).unwrap();
        assert_eq!(g.get(x).unwrap()[[0, 0]], 4.0);
    }

    #[test]
    fn constant_output_has_zero_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(array![[1.0, 2.0]]);
        let zero = t.scale(x, 0.0);
        let s = t.sum(zero);
        let g = t.backward(s).unwrap();
        assert!(g.get(x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn masked_softmax_zeroes_masked_entries() {
        let mut t = Tape::new();
        let x = t.constant(array![[1.0, 5.0, 1.0]]);
        let y = t.masked_softmax_rows(x, &array![[1.0, 0.0, 1.0]]).unwrap();
        let want = array![[0.5, 0.0, 0.5]];
        assert!(t
            .value(y)
            .iter()
            .zip(want.iter())
            .all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu(0.0), 0.0);
        assert_abs_diff_eq!(gelu(1.0), 0.841_191_990_607_477_2, epsilon = 1e-12);
        assert_abs_diff_eq!(gelu(-1.0), -0.158_808_009_392_522_8, epsilon = 1e-12);
    }
}
