//! Minimal define-by-run reverse-mode automatic differentiation over dense
//! `f64` matrices.
//!
//! A [`Graph`] is built fresh for every sentence. Nodes are appended in
//! evaluation order, so the node list is already topologically sorted and
//! [`Graph::backward`] simply walks it in reverse. Parameter leaves borrow
//! their values from the caller, which keeps binding a large embedding table
//! free of copies.
//!
//! ```
//! use crosswise::autodiff::{Graph, Matrix};
//!
//! let x = Matrix::row(&[2.0]);
//! let mut g = Graph::new();
//! let v = g.leaf(&x);
//! let sq = g.mul(v, v).unwrap();
//! let loss = g.sum(sq).unwrap();
//! g.backward(loss).unwrap();
//! assert_eq!(g.grad(v).unwrap().data(), &[4.0]);
//! ```

use std::borrow::Cow;
use std::fmt;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix({}x{}) {:?}", self.rows, self.cols, self.data)
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// # Panics
    /// If `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    /// A 1 x n row vector.
    pub fn row(values: &[f64]) -> Self {
        Self::from_vec(1, values.len(), values.to_vec())
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_slice_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    /// Plain product without graph bookkeeping.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale_assign(&mut self, c: f64) {
        for a in &mut self.data {
            *a *= c;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A fused operation with a hand-written backward rule.
///
/// `backward` returns one gradient per input, each shaped like that input.
pub trait CustomOp {
    fn name(&self) -> &'static str;
    fn backward(&self, inputs: &[&Matrix], output: &Matrix, grad_out: &Matrix) -> Vec<Matrix>;
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Gather(Var, Vec<usize>),
    Transpose(Var),
    Reshape(Var),
    Tanh(Var),
    Sigmoid(Var),
    SoftmaxRow(Var),
    LogSoftmaxRow(Var),
    LogSumExpRow(Var),
    Sum(Var),
    Custom(Vec<Var>, Box<dyn CustomOp>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::ConcatCols(..) => "concat_cols",
            Op::ConcatRows(..) => "concat_rows",
            Op::Gather(..) => "gather_rows",
            Op::Transpose(..) => "transpose",
            Op::Reshape(..) => "reshape",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::SoftmaxRow(..) => "softmax_row",
            Op::LogSoftmaxRow(..) => "log_softmax_row",
            Op::LogSumExpRow(..) => "logsumexp_row",
            Op::Sum(..) => "sum",
            Op::Custom(_, op) => op.name(),
        }
    }
}

struct Node<'a> {
    value: Cow<'a, Matrix>,
    op: Op,
}

/// Computation graph. Parameter leaves may borrow from the caller for `'a`.
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
    grads: Vec<Option<Matrix>>,
    backward_done: bool,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

fn softmax_in_place(row: &mut [f64]) {
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

/// Numerically stable `log(sum(exp(row)))`.
pub fn logsumexp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Matrix>, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(op.name().to_string()));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Borrowed leaf, typically a parameter tensor.
    pub fn leaf(&mut self, value: &'a Matrix) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(value),
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// Owned leaf, typically an input or a constant.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last backward pass with respect to `v`, if any flowed.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.rows() {
            return Err(Error::Shape {
                op: "matmul",
                left: av.shape(),
                right: bv.shape(),
            });
        }
        let out = av.matmul(bv);
        self.push(Cow::Owned(out), Op::MatMul(a, b))
    }

    fn broadcast_binary(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Matrix> {
        let (av, bv) = (self.value(a), self.value(b));
        let same = av.shape() == bv.shape();
        let row_bcast = bv.rows() == 1 && bv.cols() == av.cols();
        if !same && !row_bcast {
            return Err(Error::Shape {
                op: name,
                left: av.shape(),
                right: bv.shape(),
            });
        }
        let mut out = av.clone();
        for r in 0..out.rows() {
            let br = if same { r } else { 0 };
            for (o, b) in out.row_slice_mut(r).iter_mut().zip(bv.row_slice(br)) {
                *o = f(*o, *b);
            }
        }
        Ok(out)
    }

    /// `a + b`; `b` may be a row vector broadcast over the rows of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary(a, b, "add", |x, y| x + y)?;
        self.push(Cow::Owned(out), Op::Add(a, b))
    }

    /// `a - b`, broadcasting like [`Graph::add`].
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary(a, b, "sub", |x, y| x - y)?;
        self.push(Cow::Owned(out), Op::Sub(a, b))
    }

    /// Elementwise product of equally shaped tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::Shape {
                op: "mul",
                left: av.shape(),
                right: bv.shape(),
            });
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Matrix::from_vec(av.rows(), av.cols(), data);
        self.push(Cow::Owned(out), Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let mut out = self.value(a).clone();
        out.scale_assign(c);
        self.push(Cow::Owned(out), Op::Scale(a, c))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::EmptySentence)?;
        let rows = self.value(first).rows();
        let mut cols = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.rows() != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    left: self.value(first).shape(),
                    right: pv.shape(),
                });
            }
            cols += pv.cols();
        }
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p).row_slice(r);
                out.row_slice_mut(r)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        self.push(Cow::Owned(out), Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::EmptySentence)?;
        let cols = self.value(first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.cols() != cols {
                return Err(Error::Shape {
                    op: "concat_rows",
                    left: self.value(first).shape(),
                    right: pv.shape(),
                });
            }
            data.extend_from_slice(pv.data());
            rows += pv.rows();
        }
        self.push(
            Cow::Owned(Matrix::from_vec(rows, cols, data)),
            Op::ConcatRows(parts.to_vec()),
        )
    }

    /// Row lookup (embedding gather). Repeated ids are allowed.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        let mut out = Matrix::zeros(ids.len(), tv.cols());
        for (r, &id) in ids.iter().enumerate() {
            if id >= tv.rows() {
                return Err(Error::Shape {
                    op: "gather_rows",
                    left: tv.shape(),
                    right: (id, 0),
                });
            }
            out.row_slice_mut(r).copy_from_slice(tv.row_slice(id));
        }
        self.push(Cow::Owned(out), Op::Gather(table, ids.to_vec()))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose();
        self.push(Cow::Owned(out), Op::Transpose(a))
    }

    /// Reinterpret the row-major data under a new shape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let av = self.value(a);
        if av.len() != rows * cols {
            return Err(Error::Shape {
                op: "reshape",
                left: av.shape(),
                right: (rows, cols),
            });
        }
        let out = Matrix::from_vec(rows, cols, av.data().to_vec());
        self.push(Cow::Owned(out), Op::Reshape(a))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64) -> Matrix {
        let av = self.value(a);
        Matrix::from_vec(
            av.rows(),
            av.cols(),
            av.data().iter().map(|&x| f(x)).collect(),
        )
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.map(a, f64::tanh);
        self.push(Cow::Owned(out), Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.map(a, |x| 1.0 / (1.0 + (-x).exp()));
        self.push(Cow::Owned(out), Op::Sigmoid(a))
    }

    pub fn softmax_row(&mut self, a: Var) -> Result<Var> {
        let mut out = self.value(a).clone();
        for r in 0..out.rows() {
            softmax_in_place(out.row_slice_mut(r));
        }
        self.push(Cow::Owned(out), Op::SoftmaxRow(a))
    }

    pub fn log_softmax_row(&mut self, a: Var) -> Result<Var> {
        let mut out = self.value(a).clone();
        for r in 0..out.rows() {
            let row = out.row_slice_mut(r);
            let lse = logsumexp(row);
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        self.push(Cow::Owned(out), Op::LogSoftmaxRow(a))
    }

    /// Row-wise log-sum-exp, `m x n -> m x 1`.
    pub fn logsumexp_row(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let data = (0..av.rows()).map(|r| logsumexp(av.row_slice(r))).collect();
        let out = Matrix::from_vec(av.rows(), 1, data);
        self.push(Cow::Owned(out), Op::LogSumExpRow(a))
    }

    /// Sum of all entries, as a 1 x 1 tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).sum();
        self.push(Cow::Owned(Matrix::row(&[s])), Op::Sum(a))
    }

    /// Register a fused op whose forward value was computed by the caller.
    pub fn custom(&mut self, inputs: &[Var], output: Matrix, op: Box<dyn CustomOp>) -> Result<Var> {
        self.push(Cow::Owned(output), Op::Custom(inputs.to_vec(), op))
    }

    pub fn zero_grad(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    /// Populate gradients of the scalar `loss` with respect to every node.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::BackwardTwice);
        }
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss(shape));
        }
        if !self.value(loss).is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        self.grads = grads;
        self.backward_done = true;
        Ok(())
    }

    fn propagate(&self, id: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[id];
        let out = &*node.value;
        let val = |v: Var| -> &Matrix { &self.nodes[v.0].value };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                accumulate(grads, *a, g.matmul(&val(*b).transpose()));
                accumulate(grads, *b, val(*a).transpose().matmul(g));
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) {
                    -1.0
                } else {
                    1.0
                };
                accumulate(grads, *a, g.clone());
                let bshape = val(*b).shape();
                let mut gb = if bshape == g.shape() {
                    g.clone()
                } else {
                    let mut s = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (acc, x) in s.data_mut().iter_mut().zip(g.row_slice(r)) {
                            *acc += x;
                        }
                    }
                    s
                };
                gb.scale_assign(sign);
                accumulate(grads, *b, gb);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let ga = zip_map(g, bv, |x, y| x * y);
                let gb = zip_map(g, av, |x, y| x * y);
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::Scale(a, c) => {
                let mut ga = g.clone();
                ga.scale_assign(*c);
                accumulate(grads, *a, ga);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let cols = val(p).cols();
                    let mut gp = Matrix::zeros(g.rows(), cols);
                    for r in 0..g.rows() {
                        gp.row_slice_mut(r)
                            .copy_from_slice(&g.row_slice(r)[off..off + cols]);
                    }
                    off += cols;
                    accumulate(grads, p, gp);
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let (rows, cols) = val(p).shape();
                    let gp = Matrix::from_vec(
                        rows,
                        cols,
                        g.data()[off * cols..(off + rows) * cols].to_vec(),
                    );
                    off += rows;
                    accumulate(grads, p, gp);
                }
            }
            Op::Gather(table, ids) => {
                let (rows, cols) = val(*table).shape();
                let slot = grads[table.0].get_or_insert_with(|| Matrix::zeros(rows, cols));
                for (r, &id) in ids.iter().enumerate() {
                    for (acc, x) in slot.row_slice_mut(id).iter_mut().zip(g.row_slice(r)) {
                        *acc += x;
                    }
                }
            }
            Op::Transpose(a) => accumulate(grads, *a, g.transpose()),
            Op::Reshape(a) => {
                let (rows, cols) = val(*a).shape();
                accumulate(grads, *a, Matrix::from_vec(rows, cols, g.data().to_vec()));
            }
            Op::Tanh(a) => accumulate(grads, *a, zip_map(g, out, |x, y| x * (1.0 - y * y))),
            Op::Sigmoid(a) => accumulate(grads, *a, zip_map(g, out, |x, y| x * y * (1.0 - y))),
            Op::SoftmaxRow(a) => {
                let mut ga = Matrix::zeros(out.rows(), out.cols());
                for r in 0..out.rows() {
                    let (y, gr) = (out.row_slice(r), g.row_slice(r));
                    let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for (c, slot) in ga.row_slice_mut(r).iter_mut().enumerate() {
                        *slot = y[c] * (gr[c] - dot);
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::LogSoftmaxRow(a) => {
                let mut ga = Matrix::zeros(out.rows(), out.cols());
                for r in 0..out.rows() {
                    let (y, gr) = (out.row_slice(r), g.row_slice(r));
                    let total: f64 = gr.iter().sum();
                    for (c, slot) in ga.row_slice_mut(r).iter_mut().enumerate() {
                        *slot = gr[c] - y[c].exp() * total;
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::LogSumExpRow(a) => {
                let av = val(*a);
                let mut ga = Matrix::zeros(av.rows(), av.cols());
                for r in 0..av.rows() {
                    let lse = out.get(r, 0);
                    let gr = g.get(r, 0);
                    for (slot, x) in ga.row_slice_mut(r).iter_mut().zip(av.row_slice(r)) {
                        *slot = gr * (x - lse).exp();
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::Sum(a) => {
                let (rows, cols) = val(*a).shape();
                accumulate(grads, *a, Matrix::filled(rows, cols, g.get(0, 0)));
            }
            Op::Custom(inputs, op) => {
                let ins: Vec<&Matrix> = inputs.iter().map(|&v| val(v)).collect();
                let gs = op.backward(&ins, out, g);
                for (&v, gv) in inputs.iter().zip(gs) {
                    accumulate(grads, v, gv);
                }
            }
        }
    }
}

fn zip_map(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Outcome of comparing analytic gradients with central differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Max relative error for each input tensor, in input order.
    pub per_input: Vec<f64>,
    pub max_rel_error: f64,
    /// Number of scalar entries probed.
    pub entries: usize,
}

impl GradCheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Denominator floor of the relative error, so entries whose gradient is
/// essentially zero are judged on absolute error instead.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Relative error `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compare reverse-mode gradients of the scalar built by `f` against central
/// finite differences with step `h`, for every entry of every input.
pub fn grad_check<F>(f: F, inputs: &[Matrix], h: f64) -> Result<GradCheckReport>
where
    F: for<'g> Fn(&mut Graph<'g>, &[Var]) -> Result<Var>,
{
    let analytic: Vec<Matrix> = {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|m| g.leaf(m)).collect();
        let loss = f(&mut g, &vars)?;
        g.backward(loss)?;
        vars.iter()
            .zip(inputs)
            .map(|(&v, m)| {
                g.grad(v)
                    .cloned()
                    .unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols()))
            })
            .collect()
    };

    let eval = |probe: &[Matrix]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = probe.iter().map(|m| g.leaf(m)).collect();
        let loss = f(&mut g, &vars)?;
        Ok(g.value(loss).get(0, 0))
    };

    let mut probe: Vec<Matrix> = inputs.to_vec();
    let mut per_input = Vec::with_capacity(inputs.len());
    let mut entries = 0;
    for t in 0..inputs.len() {
        let mut worst = 0.0f64;
        for k in 0..inputs[t].len() {
            let orig = probe[t].data()[k];
            probe[t].data_mut()[k] = orig + h;
            let plus = eval(&probe)?;
            probe[t].data_mut()[k] = orig - h;
            let minus = eval(&probe)?;
            probe[t].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(relative_error(analytic[t].data()[k], numeric));
            entries += 1;
        }
        per_input.push(worst);
    }
    let max_rel_error = per_input.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport {
        per_input,
        max_rel_error,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn softmax_of_zero_and_ln3() {
        let x = Matrix::row(&[0.0, 3f64.ln()]);
        let mut g = Graph::new();
        let v = g.leaf(&x);
        let s = g.softmax_row(v).unwrap();
        assert!(close(g.value(s).data(), &[0.25, 0.75], 1e-15));
    }

    #[test]
    fn logsumexp_of_zeros() {
        let x = Matrix::row(&[0.0, 0.0]);
        let mut g = Graph::new();
        let v = g.leaf(&x);
        let s = g.logsumexp_row(v).unwrap();
        assert!((g.value(s).get(0, 0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn identity_matmul() {
        let a = Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 9.5],
        ]);
        let i = Matrix::identity(3);
        let mut g = Graph::new();
        let (iv, av) = (g.leaf(&i), g.leaf(&a));
        let p = g.matmul(iv, av).unwrap();
        assert_eq!(g.value(p), &a);
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        let mut g = Graph::new();
        let (av, bv) = (g.leaf(&a), g.leaf(&b));
        let err = g.matmul(av, bv).unwrap_err();
        assert_eq!(
            err.to_string(),
            "shape mismatch in matmul: (2, 3) vs (2, 3)"
        );
        assert!(g.mul(av, bv).is_ok());
        let c = g.constant(Matrix::zeros(3, 2));
        assert!(matches!(g.add(av, c), Err(Error::Shape { op: "add", .. })));
    }

    #[test]
    fn sum_gradient_is_ones() {
        let x = Matrix::row(&[1.0, -2.0, 3.0]);
        let mut g = Graph::new();
        let v = g.leaf(&x);
        let s = g.sum(v).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(v).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_twice_requires_reset() {
        let x = Matrix::row(&[1.0]);
        let mut g = Graph::new();
        let v = g.leaf(&x);
        let s = g.sum(v).unwrap();
        g.backward(s).unwrap();
        assert!(matches!(g.backward(s), Err(Error::BackwardTwice)));
        g.zero_grad();
        g.backward(s).unwrap();
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let x = Matrix::row(&[1.0, 2.0]);
        let mut g = Graph::new();
        let v = g.leaf(&x);
        assert!(matches!(g.backward(v), Err(Error::NonScalarLoss((1, 2)))));
    }

    #[test]
    fn non_finite_detected() {
        let x = Matrix::row(&[f64::MAX]);
        let mut g = Graph::new();
        let v = g.leaf(&x);
        assert!(matches!(g.scale(v, 10.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn diamond_accumulates_paths() {
        // y = x*x + 3x, both branches read x: dy/dx = 2x + 3
        let x = Matrix::row(&[1.5, -2.0]);
        let mut g = Graph::new();
        let v = g.leaf(&x);
        let sq = g.mul(v, v).unwrap();
        let lin = g.scale(v, 3.0).unwrap();
        let y = g.add(sq, lin).unwrap();
        let loss = g.sum(y).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(v).unwrap().data(), &[6.0, -1.0]);
    }

    #[test]
    fn gather_scatters_repeated_ids() {
        let table = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let mut g = Graph::new();
        let t = g.leaf(&table);
        let rows = g.gather_rows(t, &[1, 1, 0]).unwrap();
        assert_eq!(g.value(rows).data(), &[3.0, 4.0, 3.0, 4.0, 1.0, 2.0]);
        let loss = g.sum(rows).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(t).unwrap().data(), &[1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn linear_function_check_is_exact_scale() {
        let w = Matrix::from_rows(&[vec![0.3, -0.2], vec![0.5, 0.1]]);
        let x = Matrix::row(&[1.0, 2.0]);
        let report = grad_check(
            |g, v| {
                let y = g.matmul(v[1], v[0])?;
                g.sum(y)
            },
            &[w, x],
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{report:?}");
    }

    struct BrokenSquare;

    impl CustomOp for BrokenSquare {
        fn name(&self) -> &'static str {
            "broken_square"
        }
        fn backward(&self, inputs: &[&Matrix], _out: &Matrix, grad_out: &Matrix) -> Vec<Matrix> {
            // should be 2x; deliberately 3x
            let x = inputs[0];
            let data = x
                .data()
                .iter()
                .zip(grad_out.data())
                .map(|(a, g)| 3.0 * a * g)
                .collect();
            vec![Matrix::from_vec(x.rows(), x.cols(), data)]
        }
    }

    #[test]
    fn corrupted_backward_is_caught() {
        let x = Matrix::row(&[0.7, -1.1]);
        let report = grad_check(
            |g, v| {
                let xv = g.value(v[0]);
                let out = Matrix::from_vec(1, 2, xv.data().iter().map(|a| a * a).collect());
                let sq = g.custom(&[v[0]], out, Box::new(BrokenSquare))?;
                g.sum(sq)
            },
            &[x],
            1e-5,
        )
        .unwrap();
        assert!(!report.passed(1e-4));
        assert!(report.max_rel_error > 0.3);
    }
}
