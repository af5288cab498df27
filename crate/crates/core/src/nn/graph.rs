//! Reverse-mode differentiation over a recorded graph of matrix ops.

use super::matrix::gemm;
use super::{Grads, Matrix, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Additive sentinel for masked entries.
pub const MASK: f64 = -1e9;

const NORM_EPS: f64 = 1e-5;

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulBT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    AddConst(Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    /// Per-column `std + eps` and `std`.
    InstanceNorm(Var, Vec<f64>, Vec<f64>),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    Reshape(Var),
    SumAll(Var),
    MeanRows(Var),
    HeadScores(Var, Var, usize, f64),
    HeadMix(Var, Var, usize),
    Pick(Var, Vec<usize>),
    WeightedSum(Var, Vec<f64>),
    NegEntropyRows(Var),
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

/// A computation graph. Parameters enter once each via [`Graph::param`].
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<Option<Var>>,
    param_nodes: Vec<(usize, ParamId)>,
}

/// Gradients of one backward pass, indexed by node.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }
}

fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Shape(format!("{op}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1))
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, vs: &[Var]) -> bool {
        vs.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// Constant input.
    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Input that receives a gradient.
    pub fn variable(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if self.params.len() < store.len() {
            self.params.resize(store.len(), None);
        }
        if let Some(v) = self.params[id.0] {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Leaf, true);
        self.params[id.0] = Some(v);
        self.param_nodes.push((v.0, id));
        v
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(shape_err("matmul", sa, sb));
        }
        let mut c = Matrix::zeros(sa.0, sb.1);
        gemm(1.0, self.value(a), false, self.value(b), false, &mut c);
        let ng = self.ng(&[a, b]);
        Ok(self.push(c, Op::MatMul(a, b), ng))
    }

    /// `a * b^T`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.1 {
            return Err(shape_err("matmul_bt", sa, sb));
        }
        let mut c = Matrix::zeros(sa.0, sb.0);
        gemm(1.0, self.value(a), false, self.value(b), true, &mut c);
        let ng = self.ng(&[a, b]);
        Ok(self.push(c, Op::MatMulBT(a, b), ng))
    }

    fn zip(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(name, sa, sb));
        }
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data.iter().zip(&y.data).map(|(&p, &q)| f(p, q)).collect();
        Ok(Matrix { rows: sa.0, cols: sa.1, data })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let m = self.zip(a, b, "add", |p, q| p + q)?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(m, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let m = self.zip(a, b, "sub", |p, q| p - q)?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(m, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let m = self.zip(a, b, "mul", |p, q| p * q)?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(m, Op::Mul(a, b), ng))
    }

    fn row_op(&mut self, x: Var, r: Var, name: &str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        let (sx, sr) = (self.shape(x), self.shape(r));
        if sr.0 != 1 || sr.1 != sx.1 {
            return Err(shape_err(name, sx, sr));
        }
        let mut m = self.value(x).clone();
        let row = &self.value(r).data;
        for i in 0..sx.0 {
            for (v, &b) in m.row_mut(i).iter_mut().zip(row) {
                *v = f(*v, b);
            }
        }
        Ok(m)
    }

    /// `x + r` with the row vector `r` broadcast over rows.
    pub fn add_row(&mut self, x: Var, r: Var) -> Result<Var> {
        let m = self.row_op(x, r, "add_row", |p, q| p + q)?;
        let ng = self.ng(&[x, r]);
        Ok(self.push(m, Op::AddRow(x, r), ng))
    }

    pub fn mul_row(&mut self, x: Var, r: Var) -> Result<Var> {
        let m = self.row_op(x, r, "mul_row", |p, q| p * q)?;
        let ng = self.ng(&[x, r]);
        Ok(self.push(m, Op::MulRow(x, r), ng))
    }

    /// `x + c` for a constant `c` (e.g. an additive mask).
    pub fn add_const(&mut self, x: Var, c: &Matrix) -> Result<Var> {
        let sx = self.shape(x);
        if sx != c.shape() {
            return Err(shape_err("add_const", sx, c.shape()));
        }
        let mut m = self.value(x).clone();
        m.add_assign(c);
        let ng = self.ng(&[x]);
        Ok(self.push(m, Op::AddConst(x), ng))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let mut m = self.value(x).clone();
        m.scale_assign(s);
        let ng = self.ng(&[x]);
        self.push(m, Op::Scale(x, s), ng)
    }

    fn map(&mut self, x: Var, f: impl Fn(f64) -> f64) -> Matrix {
        let v = self.value(x);
        Matrix { rows: v.rows, cols: v.cols, data: v.data.iter().map(|&a| f(a)).collect() }
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let m = self.map(x, |a| a.max(0.0));
        let ng = self.ng(&[x]);
        self.push(m, Op::Relu(x), ng)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let m = self.map(x, f64::tanh);
        let ng = self.ng(&[x]);
        self.push(m, Op::Tanh(x), ng)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let mut m = self.value(x).clone();
        for r in 0..m.rows {
            softmax_in_place(m.row_mut(r));
        }
        let ng = self.ng(&[x]);
        self.push(m, Op::SoftmaxRows(x), ng)
    }

    pub fn log_softmax_rows(&mut self, x: Var) -> Var {
        let mut m = self.value(x).clone();
        for r in 0..m.rows {
            let row = m.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        let ng = self.ng(&[x]);
        self.push(m, Op::LogSoftmaxRows(x), ng)
    }

    /// Normalizes every column over rows: `(x - mean) / (std + 1e-5)`.
    pub fn instance_norm(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let (rows, cols) = v.shape();
        let mut m = v.clone();
        let mut denom = vec![0.0; cols];
        let mut std = vec![0.0; cols];
        for c in 0..cols {
            let mean = (0..rows).map(|r| v.get(r, c)).sum::<f64>() / rows as f64;
            let var = (0..rows).map(|r| (v.get(r, c) - mean).powi(2)).sum::<f64>() / rows as f64;
            std[c] = var.sqrt();
            denom[c] = std[c] + NORM_EPS;
            for r in 0..rows {
                m.set(r, c, (v.get(r, c) - mean) / denom[c]);
            }
        }
        let ng = self.ng(&[x]);
        self.push(m, Op::InstanceNorm(x, denom, std), ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.shape(parts[0]).0;
        let mut cols = 0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(shape_err("concat_cols", self.shape(parts[0]), self.shape(p)));
            }
            cols += self.shape(p).1;
        }
        let mut m = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                m.row_mut(r)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let ng = self.ng(parts);
        Ok(self.push(m, Op::ConcatCols(parts.to_vec()), ng))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.shape(parts[0]).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            if self.shape(p).1 != cols {
                return Err(shape_err("concat_rows", self.shape(parts[0]), self.shape(p)));
            }
            data.extend_from_slice(&self.value(p).data);
            rows += self.shape(p).0;
        }
        let ng = self.ng(parts);
        Ok(self.push(Matrix { rows, cols, data }, Op::ConcatRows(parts.to_vec()), ng))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var> {
        let (rows, cols) = self.shape(x);
        if start + width > cols {
            return Err(Error::Shape(format!("slice_cols {start}+{width} of {cols} columns")));
        }
        let mut m = Matrix::zeros(rows, width);
        for r in 0..rows {
            m.row_mut(r).copy_from_slice(&self.value(x).row(r)[start..start + width]);
        }
        let ng = self.ng(&[x]);
        Ok(self.push(m, Op::SliceCols(x, start), ng))
    }

    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let (rows, cols) = self.shape(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(Error::Shape(format!("gather_rows index {bad} of {rows} rows")));
        }
        let mut m = Matrix::zeros(idx.len(), cols);
        for (k, &i) in idx.iter().enumerate() {
            m.row_mut(k).copy_from_slice(self.value(x).row(i));
        }
        let ng = self.ng(&[x]);
        Ok(self.push(m, Op::GatherRows(x, idx.to_vec()), ng))
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let v = self.value(x);
        if v.len() != rows * cols {
            return Err(shape_err("reshape", v.shape(), (rows, cols)));
        }
        let m = Matrix { rows, cols, data: v.data.clone() };
        let ng = self.ng(&[x]);
        Ok(self.push(m, Op::Reshape(x), ng))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        let ng = self.ng(&[x]);
        self.push(Matrix::scalar(s), Op::SumAll(x), ng)
    }

    /// Column means as a row vector.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let mut m = Matrix::zeros(1, v.cols);
        for r in 0..v.rows {
            for (a, b) in m.data.iter_mut().zip(v.row(r)) {
                *a += b;
            }
        }
        m.scale_assign(1.0 / v.rows as f64);
        let ng = self.ng(&[x]);
        self.push(m, Op::MeanRows(x), ng)
    }

    /// Per-head scaled dot products. `q` is `A x d`, `k` is `B x d`; the
    /// result stacks heads vertically: row `h*A + i`, column `j` holds
    /// `scale * <q_i, k_j>` over the columns of head `h`.
    pub fn head_scores(&mut self, q: Var, k: Var, heads: usize, scale: f64) -> Result<Var> {
        let (sq, sk) = (self.shape(q), self.shape(k));
        if sq.1 != sk.1 || heads == 0 || sq.1 % heads != 0 {
            return Err(shape_err("head_scores", sq, sk));
        }
        let dh = sq.1 / heads;
        let (a, b) = (sq.0, sk.0);
        let mut m = Matrix::zeros(heads * a, b);
        for h in 0..heads {
            strided_gemm(
                scale,
                a, dh, b,
                (&self.value(q).data, h * dh, sq.1, 1),
                (&self.value(k).data, h * dh, 1, sk.1),
                (&mut m.data, h * a * b, b, 1),
            );
        }
        let ng = self.ng(&[q, k]);
        Ok(self.push(m, Op::HeadScores(q, k, heads, scale), ng))
    }

    /// Applies stacked per-head weights `p` (`heads*A x B`) to `v`
    /// (`B x d`), concatenating heads into `A x d`.
    pub fn head_mix(&mut self, p: Var, v: Var, heads: usize) -> Result<Var> {
        let (sp, sv) = (self.shape(p), self.shape(v));
        if heads == 0 || sp.0 % heads != 0 || sp.1 != sv.0 || sv.1 % heads != 0 {
            return Err(shape_err("head_mix", sp, sv));
        }
        let (a, b, d) = (sp.0 / heads, sp.1, sv.1);
        let dh = d / heads;
        let mut m = Matrix::zeros(a, d);
        for h in 0..heads {
            strided_gemm(
                1.0,
                a, b, dh,
                (&self.value(p).data, h * a * b, b, 1),
                (&self.value(v).data, h * dh, d, 1),
                (&mut m.data, h * dh, d, 1),
            );
        }
        let ng = self.ng(&[p, v]);
        Ok(self.push(m, Op::HeadMix(p, v, heads), ng))
    }

    /// `x[r, idx[r]]` as a column.
    pub fn pick(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let (rows, cols) = self.shape(x);
        if idx.len() != rows || idx.iter().any(|&i| i >= cols) {
            return Err(Error::Shape(format!("pick of {} indices from {rows}x{cols}", idx.len())));
        }
        let data = idx.iter().enumerate().map(|(r, &c)| self.value(x).get(r, c)).collect();
        let ng = self.ng(&[x]);
        Ok(self.push(Matrix { rows, cols: 1, data }, Op::Pick(x, idx.to_vec()), ng))
    }

    /// `sum_i w_i x_i` over the flattened values.
    pub fn weighted_sum(&mut self, x: Var, w: &[f64]) -> Result<Var> {
        let v = self.value(x);
        if w.len() != v.len() {
            return Err(Error::Shape(format!("weighted_sum of {} weights over {} values", w.len(), v.len())));
        }
        let s = v.data.iter().zip(w).map(|(a, b)| a * b).sum();
        let ng = self.ng(&[x]);
        Ok(self.push(Matrix::scalar(s), Op::WeightedSum(x, w.to_vec()), ng))
    }

    /// Row-wise `sum_j p_j log p_j` for log-probabilities `l`.
    pub fn neg_entropy_rows(&mut self, l: Var) -> Var {
        let v = self.value(l);
        let data = (0..v.rows)
            .map(|r| v.row(r).iter().map(|&x| x.exp() * x).sum())
            .collect();
        let m = Matrix { rows: v.rows, cols: 1, data };
        let ng = self.ng(&[l]);
        self.push(m, Op::NegEntropyRows(l), ng)
    }

    /// Gradients of the scalar `loss`, seeded with `seed`.
    pub fn backward(&self, loss: Var, seed: f64) -> Gradients {
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::filled(1, 1, seed));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.needs_grad {
                self.propagate(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    /// Adds `scale` times the parameter gradients into `out`.
    pub fn accumulate(&self, grads: &Gradients, scale: f64, out: &mut Grads) {
        for &(node, id) in &self.param_nodes {
            if let Some(Some(g)) = grads.grads.get(node) {
                let dst = &mut out.values[id.0];
                for (a, b) in dst.data.iter_mut().zip(&g.data) {
                    *a += scale * b;
                }
            }
        }
    }

    fn propagate(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let val = &self.nodes[i].value;
        let needs = |v: Var| self.nodes[v.0].needs_grad;
        let acc = |v: Var, m: Matrix, grads: &mut [Option<Matrix>]| {
            match &mut grads[v.0] {
                Some(e) => e.add_assign(&m),
                slot => *slot = Some(m),
            }
        };
        let zeros_of = |v: Var| {
            let s = self.nodes[v.0].value.shape();
            Matrix::zeros(s.0, s.1)
        };
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if needs(*a) {
                    let mut da = zeros_of(*a);
                    gemm(1.0, g, false, self.value(*b), true, &mut da);
                    acc(*a, da, grads);
                }
                if needs(*b) {
                    let mut db = zeros_of(*b);
                    gemm(1.0, self.value(*a), true, g, false, &mut db);
                    acc(*b, db, grads);
                }
            }
            Op::MatMulBT(a, b) => {
                if needs(*a) {
                    let mut da = zeros_of(*a);
                    gemm(1.0, g, false, self.value(*b), false, &mut da);
                    acc(*a, da, grads);
                }
                if needs(*b) {
                    let mut db = zeros_of(*b);
                    gemm(1.0, g, true, self.value(*a), false, &mut db);
                    acc(*b, db, grads);
                }
            }
            Op::Add(a, b) => {
                if needs(*a) {
                    acc(*a, g.clone(), grads);
                }
                if needs(*b) {
                    acc(*b, g.clone(), grads);
                }
            }
            Op::Sub(a, b) => {
                if needs(*a) {
                    acc(*a, g.clone(), grads);
                }
                if needs(*b) {
                    let mut m = g.clone();
                    m.scale_assign(-1.0);
                    acc(*b, m, grads);
                }
            }
            Op::Mul(a, b) => {
                if needs(*a) {
                    acc(*a, hadamard(g, self.value(*b)), grads);
                }
                if needs(*b) {
                    acc(*b, hadamard(g, self.value(*a)), grads);
                }
            }
            Op::AddRow(x, r) => {
                if needs(*x) {
                    acc(*x, g.clone(), grads);
                }
                if needs(*r) {
                    acc(*r, col_sums(g), grads);
                }
            }
            Op::MulRow(x, r) => {
                let rv = self.value(*r);
                if needs(*x) {
                    let mut m = g.clone();
                    for k in 0..m.rows {
                        for (a, b) in m.row_mut(k).iter_mut().zip(&rv.data) {
                            *a *= b;
                        }
                    }
                    acc(*x, m, grads);
                }
                if needs(*r) {
                    acc(*r, col_sums(&hadamard(g, self.value(*x))), grads);
                }
            }
            Op::AddConst(x) => acc(*x, g.clone(), grads),
            Op::Scale(x, s) => {
                let mut m = g.clone();
                m.scale_assign(*s);
                acc(*x, m, grads);
            }
            Op::Relu(x) => {
                let mut m = g.clone();
                for (a, &y) in m.data.iter_mut().zip(&val.data) {
                    if y <= 0.0 {
                        *a = 0.0;
                    }
                }
                acc(*x, m, grads);
            }
            Op::Tanh(x) => {
                let mut m = g.clone();
                for (a, &y) in m.data.iter_mut().zip(&val.data) {
                    *a *= 1.0 - y * y;
                }
                acc(*x, m, grads);
            }
            Op::SoftmaxRows(x) => {
                let mut m = g.clone();
                for r in 0..m.rows {
                    let y = val.row(r);
                    let dot: f64 = m.row(r).iter().zip(y).map(|(a, b)| a * b).sum();
                    for (a, &p) in m.row_mut(r).iter_mut().zip(y) {
                        *a = p * (*a - dot);
                    }
                }
                acc(*x, m, grads);
            }
            Op::LogSoftmaxRows(x) => {
                let mut m = g.clone();
                for r in 0..m.rows {
                    let total: f64 = m.row(r).iter().sum();
                    for (a, &l) in m.row_mut(r).iter_mut().zip(val.row(r)) {
                        *a -= l.exp() * total;
                    }
                }
                acc(*x, m, grads);
            }
            Op::InstanceNorm(x, denom, std) => {
                let (rows, cols) = val.shape();
                let n = rows as f64;
                let mut m = Matrix::zeros(rows, cols);
                for c in 0..cols {
                    let s = denom[c];
                    let gmean = (0..rows).map(|r| g.get(r, c)).sum::<f64>() / n;
                    // y = (x - mu) / s, so x - mu = y * s.
                    let dl_ds = -(0..rows).map(|r| g.get(r, c) * val.get(r, c)).sum::<f64>() / s;
                    let ds_dx = if std[c] > 0.0 { s / (n * std[c]) } else { 0.0 };
                    for r in 0..rows {
                        let y = val.get(r, c);
                        m.set(r, c, (g.get(r, c) - gmean) / s + dl_ds * y * ds_dx);
                    }
                }
                acc(*x, m, grads);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let w = self.shape(p).1;
                    if needs(p) {
                        let mut m = Matrix::zeros(g.rows, w);
                        for r in 0..g.rows {
                            m.row_mut(r).copy_from_slice(&g.row(r)[off..off + w]);
                        }
                        acc(p, m, grads);
                    }
                    off += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let (h, w) = self.shape(p);
                    if needs(p) {
                        let m = Matrix { rows: h, cols: w, data: g.data[off * w..(off + h) * w].to_vec() };
                        acc(p, m, grads);
                    }
                    off += h;
                }
            }
            Op::SliceCols(x, start) => {
                let mut m = zeros_of(*x);
                for r in 0..g.rows {
                    m.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                }
                acc(*x, m, grads);
            }
            Op::GatherRows(x, idx) => {
                let mut m = zeros_of(*x);
                for (k, &r) in idx.iter().enumerate() {
                    for (a, b) in m.row_mut(r).iter_mut().zip(g.row(k)) {
                        *a += b;
                    }
                }
                acc(*x, m, grads);
            }
            Op::Reshape(x) => {
                let s = self.shape(*x);
                acc(*x, Matrix { rows: s.0, cols: s.1, data: g.data.clone() }, grads);
            }
            Op::SumAll(x) => {
                let s = self.shape(*x);
                acc(*x, Matrix::filled(s.0, s.1, g.data[0]), grads);
            }
            Op::MeanRows(x) => {
                let s = self.shape(*x);
                let mut m = Matrix::zeros(s.0, s.1);
                for r in 0..s.0 {
                    for (a, b) in m.row_mut(r).iter_mut().zip(&g.data) {
                        *a = b / s.0 as f64;
                    }
                }
                acc(*x, m, grads);
            }
            Op::HeadScores(q, k, heads, scale) => {
                let (sq, sk) = (self.shape(*q), self.shape(*k));
                let dh = sq.1 / heads;
                let (a, b) = (sq.0, sk.0);
                if needs(*q) {
                    let mut dq = zeros_of(*q);
                    for h in 0..*heads {
                        strided_gemm(
                            *scale,
                            a, b, dh,
                            (&g.data, h * a * b, b, 1),
                            (&self.value(*k).data, h * dh, sk.1, 1),
                            (&mut dq.data, h * dh, sq.1, 1),
                        );
                    }
                    acc(*q, dq, grads);
                }
                if needs(*k) {
                    let mut dk = zeros_of(*k);
                    for h in 0..*heads {
                        strided_gemm(
                            *scale,
                            b, a, dh,
                            (&g.data, h * a * b, 1, b),
                            (&self.value(*q).data, h * dh, sq.1, 1),
                            (&mut dk.data, h * dh, sk.1, 1),
                        );
                    }
                    acc(*k, dk, grads);
                }
            }
            Op::HeadMix(p, v, heads) => {
                let (sp, sv) = (self.shape(*p), self.shape(*v));
                let (a, b, d) = (sp.0 / heads, sp.1, sv.1);
                let dh = d / heads;
                if needs(*p) {
                    let mut dp = zeros_of(*p);
                    for h in 0..*heads {
                        strided_gemm(
                            1.0,
                            a, dh, b,
                            (&g.data, h * dh, d, 1),
                            (&self.value(*v).data, h * dh, 1, d),
                            (&mut dp.data, h * a * b, b, 1),
                        );
                    }
                    acc(*p, dp, grads);
                }
                if needs(*v) {
                    let mut dv = zeros_of(*v);
                    for h in 0..*heads {
                        strided_gemm(
                            1.0,
                            b, a, dh,
                            (&self.value(*p).data, h * a * b, 1, b),
                            (&g.data, h * dh, d, 1),
                            (&mut dv.data, h * dh, d, 1),
                        );
                    }
                    acc(*v, dv, grads);
                }
            }
            Op::Pick(x, idx) => {
                let mut m = zeros_of(*x);
                for (r, &c) in idx.iter().enumerate() {
                    m.set(r, c, g.data[r]);
                }
                acc(*x, m, grads);
            }
            Op::WeightedSum(x, w) => {
                let s = self.shape(*x);
                let data = w.iter().map(|b| b * g.data[0]).collect();
                acc(*x, Matrix { rows: s.0, cols: s.1, data }, grads);
            }
            Op::NegEntropyRows(l) => {
                let lv = self.value(*l);
                let mut m = zeros_of(*l);
                for r in 0..lv.rows {
                    for (a, &x) in m.row_mut(r).iter_mut().zip(lv.row(r)) {
                        *a = g.data[r] * x.exp() * (x + 1.0);
                    }
                }
                acc(*l, m, grads);
            }
        }
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

fn hadamard(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
    }
}

fn col_sums(g: &Matrix) -> Matrix {
    let mut m = Matrix::zeros(1, g.cols);
    for r in 0..g.rows {
        for (a, b) in m.data.iter_mut().zip(g.row(r)) {
            *a += b;
        }
    }
    m
}

/// `C += alpha * A * B` on strided views `(data, offset, row_stride,
/// col_stride)`; `A` is `m x k`, `B` is `k x n`, `C` is `m x n`.
#[allow(clippy::too_many_arguments)]
fn strided_gemm(
    alpha: f64,
    m: usize,
    k: usize,
    n: usize,
    a: (&[f64], usize, usize, usize),
    b: (&[f64], usize, usize, usize),
    c: (&mut [f64], usize, usize, usize),
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let last = |off: usize, rs: usize, cs: usize, r: usize, q: usize| off + (r - 1) * rs + (q - 1) * cs;
    assert!(last(a.1, a.2, a.3, m, k) < a.0.len());
    assert!(last(b.1, b.2, b.3, k, n) < b.0.len());
    assert!(last(c.1, c.2, c.3, m, n) < c.0.len());
    // SAFETY: the asserts above bound every element addressed by the
    // strided views inside their slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.0.as_ptr().add(a.1),
            a.2 as isize,
            a.3 as isize,
            b.0.as_ptr().add(b.1),
            b.2 as isize,
            b.3 as isize,
            1.0,
            c.0.as_mut_ptr().add(c.1),
            c.2 as isize,
            c.3 as isize,
        );
    }
}
