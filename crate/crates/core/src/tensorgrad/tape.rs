//! Define-by-run tape. Every operation appends a node holding its value and
//! the inputs needed by its backward rule; `backward` walks the nodes in
//! reverse insertion order, which is a valid topological order.

use std::borrow::Cow;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::tensor::{gelu, gelu_grad, matmul_acc, matmul_nt_acc, matmul_tn_acc, sigmoid, Tensor};

/// Additive mask value treated as minus infinity.
pub const MASK_NEG: f64 = -1e30;

/// Entries at or below this are masked.
const MASKED_BELOW: f64 = -1e29;

pub const LAYER_NORM_EPS: f64 = 1e-9;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Add(Var, Var),
    AddRowBias(Var, Var),
    Mul(Var, Var),
    ScaleRows(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Abs(Var),
    Sigmoid(Var),
    Gelu(Var),
    Relu(Var),
    Log(Var),
    Clamp(Var, f64, f64),
    MaskedSoftmax(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, rstd: Vec<f64> },
    Sum(Var),
    Mean(Var),
    EmbeddingLookup(Var, Vec<usize>),
    StepSte { x: Var, threshold: f64, temperature: f64 },
    StopGradient,
}

#[derive(Debug)]
struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Gradients of a scalar with respect to every node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`, or `None` if `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Option<Tensor> {
        self.grads[v.0]
            .as_ref()
            .map(|g| Tensor::new(self.shapes[v.0].clone(), g.clone()).expect("grad shape"))
    }

    /// Gradient for `v`, zeros when it does not influence the loss.
    pub fn get_or_zeros(&self, v: Var) -> Tensor {
        self.get(v)
            .unwrap_or_else(|| Tensor::zeros(self.shapes[v.0].clone()))
    }
}

#[derive(Debug, Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

fn shape_err(msg: String) -> Error {
    Error::ShapeMismatch(msg)
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.push_cow(Cow::Owned(value), op, requires_grad)
    }

    fn push_cow(&mut self, value: Cow<'a, Tensor>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// A trainable input.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// A constant input.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A trainable input borrowed for the lifetime of the tape.
    pub fn param_ref(&mut self, t: &'a Tensor) -> Var {
        self.push_cow(Cow::Borrowed(t), Op::Leaf, true)
    }

    /// A constant input borrowed for the lifetime of the tape.
    pub fn constant_ref(&mut self, t: &'a Tensor) -> Var {
        self.push_cow(Cow::Borrowed(t), Op::Leaf, false)
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        self.value(v).dims2()
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let xv = self.value(x);
        let data = xv.data().iter().map(|&a| f(a)).collect();
        let t = Tensor::new(xv.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(x);
        self.push(t, op, rg)
    }

    /// `a (m x k) * b (k x n)`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((m, k), (k2, n)) = (self.dims(a), self.dims(b));
        if k != k2 {
            return Err(shape_err(format!("matmul {m}x{k} by {k2}x{n}")));
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), rg))
    }

    /// `a (m x k) * b^T` for `b` of shape `n x k`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((m, k), (n, k2)) = (self.dims(a), self.dims(b));
        if k != k2 {
            return Err(shape_err(format!("matmul_nt {m}x{k} by ({n}x{k2})^T")));
        }
        let mut out = vec![0.0; m * n];
        matmul_nt_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMulNT(a, b), rg))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(shape_err(format!(
                "{what}: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    /// Adds a `1 x n` row to every row of an `m x n` matrix.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let ((m, n), (br, bc)) = (self.dims(a), self.dims(bias));
        if br != 1 || bc != n {
            return Err(shape_err(format!("bias {br}x{bc} for {m}x{n}")));
        }
        let bv = self.value(bias).data();
        let data = self
            .value(a)
            .data()
            .chunks(n)
            .flat_map(|row| row.iter().zip(bv).map(|(x, b)| x + b))
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(bias);
        Ok(self.push(t, Op::AddRowBias(a, bias), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    /// Multiplies row `i` of an `m x n` matrix by entry `i` of an `m`-vector.
    pub fn scale_rows(&mut self, a: Var, s: Var) -> Result<Var> {
        let (m, n) = self.dims(a);
        if self.value(s).len() != m {
            return Err(shape_err(format!(
                "scale_rows: {} scales for {m} rows",
                self.value(s).len()
            )));
        }
        let sv = self.value(s).data();
        let data = self
            .value(a)
            .data()
            .chunks(n)
            .zip(sv)
            .flat_map(|(row, &k)| row.iter().map(move |x| x * k))
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(s);
        Ok(self.push(t, Op::ScaleRows(a, s), rg))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        self.unary(x, |a| a * k, Op::Scale(x, k))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, |a| a + c, Op::AddScalar(x))
    }

    /// Concatenates matrices with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(shape_err("concat of nothing".into()));
        };
        let m = self.dims(first).0;
        let widths: Vec<usize> = parts.iter().map(|&p| self.dims(p).1).collect();
        if parts.iter().any(|&p| self.dims(p).0 != m) {
            return Err(shape_err("concat_cols: row counts differ".into()));
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Tensor::matrix(m, total, data)?, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Columns `start .. start + len`.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.dims(x);
        if start + len > n {
            return Err(shape_err(format!("slice {start}..{} of {n} columns", start + len)));
        }
        let xv = self.value(x).data();
        let data = (0..m)
            .flat_map(|i| xv[i * n + start..i * n + start + len].iter().copied())
            .collect();
        let rg = self.rg(x);
        Ok(self.push(Tensor::matrix(m, len, data)?, Op::SliceCols(x, start), rg))
    }

    /// Rows `start .. start + len`.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.dims(x);
        if start + len > m {
            return Err(shape_err(format!("slice {start}..{} of {m} rows", start + len)));
        }
        let data = self.value(x).data()[start * n..(start + len) * n].to_vec();
        let rg = self.rg(x);
        Ok(self.push(Tensor::matrix(len, n, data)?, Op::SliceRows(x, start), rg))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, f64::abs, Op::Abs(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        self.unary(x, gelu, Op::Gelu(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |a| a.max(0.0), Op::Relu(x))
    }

    pub fn log(&mut self, x: Var) -> Var {
        self.unary(x, f64::ln, Op::Log(x))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the open interval.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.unary(x, |a| a.clamp(lo, hi), Op::Clamp(x, lo, hi))
    }

    /// Row-wise `softmax(x + mask)`. Entries with mask at or below -1e29 get
    /// probability zero; a row with no unmasked entry is an error.
    pub fn masked_softmax(&mut self, x: Var, mask: Option<&Arc<Vec<f64>>>) -> Result<Var> {
        let (m, n) = self.dims(x);
        if let Some(mask) = mask {
            if mask.len() != m * n {
                return Err(shape_err(format!("mask of {} entries for {m}x{n}", mask.len())));
            }
        }
        let xv = self.value(x).data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &xv[i * n..(i + 1) * n];
            let mrow = mask.map(|mk| &mk[i * n..(i + 1) * n]);
            softmax_row(row, mrow, &mut out[i * n..(i + 1) * n]).ok_or(Error::AllMaskedRow(i))?;
        }
        let rg = self.rg(x);
        let t = Tensor::new(self.value(x).shape().to_vec(), out)?;
        Ok(self.push(t, Op::MaskedSoftmax(x), rg))
    }

    /// Per-row normalization followed by `gamma * xhat + beta` with
    /// `1 x n` affine parameters.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (m, n) = self.dims(x);
        if self.value(gamma).len() != n || self.value(beta).len() != n {
            return Err(shape_err(format!("layer_norm affine terms for width {n}")));
        }
        let xv = self.value(x).data();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![0.0; m * n];
        let mut rstd = vec![0.0; m];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &xv[i * n..(i + 1) * n];
            rstd[i] = normalize_row(row, &mut xhat[i * n..(i + 1) * n]).1;
            for j in 0..n {
                out[i * n + j] = xhat[i * n + j] * g[j] + b[j];
            }
        }
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        let t = Tensor::new(self.value(x).shape().to_vec(), out)?;
        Ok(self.push(
            t,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
            rg,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let s = xv.data().iter().sum::<f64>() / xv.len() as f64;
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Mean(x), rg)
    }

    /// Gathers rows of a `v x d` table.
    pub fn embedding_lookup(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let (v, d) = self.dims(table);
        if let Some(&bad) = indices.iter().find(|&&i| i >= v) {
            return Err(shape_err(format!("index {bad} into table of {v} rows")));
        }
        let tv = self.value(table).data();
        let data = indices
            .iter()
            .flat_map(|&i| tv[i * d..(i + 1) * d].iter().copied())
            .collect();
        let rg = self.rg(table);
        Ok(self.push(
            Tensor::matrix(indices.len(), d, data)?,
            Op::EmbeddingLookup(table, indices.to_vec()),
            rg,
        ))
    }

    /// Straight-through step: forward emits `u(x - threshold)` (0 when
    /// `x - threshold <= 0`, else 1), or `forward` when given; backward
    /// passes the derivative of `sigmoid((x - threshold) / temperature)`.
    pub fn step_ste(
        &mut self,
        x: Var,
        threshold: f64,
        temperature: f64,
        forward: Option<&[f64]>,
    ) -> Result<Var> {
        if !(temperature > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        let xv = self.value(x);
        let data: Vec<f64> = match forward {
            Some(f) if f.len() == xv.len() => f.to_vec(),
            Some(f) => {
                return Err(shape_err(format!("forward override of {} for {}", f.len(), xv.len())))
            }
            None => xv
                .data()
                .iter()
                .map(|&a| if a - threshold <= 0.0 { 0.0 } else { 1.0 })
                .collect(),
        };
        let t = Tensor::new(xv.shape().to_vec(), data)?;
        let rg = self.rg(x);
        Ok(self.push(
            t,
            Op::StepSte {
                x,
                threshold,
                temperature,
            },
            rg,
        ))
    }

    /// Copies the value with no gradient path.
    pub fn stop_gradient(&mut self, x: Var) -> Var {
        let t = self.value(x).clone();
        self.push(t, Op::StopGradient, false)
    }

    /// Reverse sweep from a scalar.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.backward_scaled(loss, 1.0)
    }

    /// Reverse sweep seeded with `d loss = seed`.
    pub fn backward_scaled(&self, loss: Var, seed: f64) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![seed]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        grads.resize(self.nodes.len(), None);
        for (i, g) in grads.iter_mut().enumerate() {
            if !self.nodes[i].requires_grad {
                *g = None;
            }
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn propagate(&self, node: &Node<'a>, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf | Op::StopGradient => {}
            Op::MatMul(a, b) => {
                let ((m, k), (_, n)) = (self.dims(*a), self.dims(*b));
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                // dA = G B^T, dB = A^T G
                acc(*a, &mut |s| matmul_nt_acc(g, bv, s, m, n, k));
                acc(*b, &mut |s| matmul_tn_acc(av, g, s, m, k, n));
            }
            Op::MatMulNT(a, b) => {
                let ((m, k), (n, _)) = (self.dims(*a), self.dims(*b));
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                // C = A B^T: dA = G B, dB = G^T A
                acc(*a, &mut |s| matmul_acc(g, bv, s, m, n, k));
                acc(*b, &mut |s| matmul_tn_acc(g, av, s, m, n, k));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |s| add_into(s, g));
                acc(*b, &mut |s| add_into(s, g));
            }
            Op::AddRowBias(a, bias) => {
                let n = self.dims(*a).1;
                acc(*a, &mut |s| add_into(s, g));
                acc(*bias, &mut |s| {
                    for row in g.chunks(n) {
                        add_into(s, row);
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * bv[i];
                    }
                });
                acc(*b, &mut |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * av[i];
                    }
                });
            }
            Op::ScaleRows(a, sc) => {
                let n = self.dims(*a).1;
                let (av, sv) = (self.value(*a).data(), self.value(*sc).data());
                acc(*a, &mut |s| {
                    for (i, k) in sv.iter().enumerate() {
                        for j in 0..n {
                            s[i * n + j] += g[i * n + j] * k;
                        }
                    }
                });
                acc(*sc, &mut |s| {
                    for (i, si) in s.iter_mut().enumerate() {
                        *si += super::tensor::dot(&g[i * n..(i + 1) * n], &av[i * n..(i + 1) * n]);
                    }
                });
            }
            Op::Scale(x, k) => acc(*x, &mut |s| {
                for i in 0..s.len() {
                    s[i] += g[i] * k;
                }
            }),
            Op::AddScalar(x) => acc(*x, &mut |s| add_into(s, g)),
            Op::ConcatCols(parts) => {
                let (m, total) = node.value.dims2();
                let mut offset = 0;
                for &p in parts {
                    let w = self.dims(p).1;
                    acc(p, &mut |s| {
                        for i in 0..m {
                            add_into(&mut s[i * w..(i + 1) * w], &g[i * total + offset..i * total + offset + w]);
                        }
                    });
                    offset += w;
                }
            }
            Op::SliceCols(x, start) => {
                let (m, len) = node.value.dims2();
                let n = self.dims(*x).1;
                acc(*x, &mut |s| {
                    for i in 0..m {
                        add_into(&mut s[i * n + start..i * n + start + len], &g[i * len..(i + 1) * len]);
                    }
                });
            }
            Op::SliceRows(x, start) => {
                let (len, n) = node.value.dims2();
                acc(*x, &mut |s| add_into(&mut s[start * n..(start + len) * n], g));
            }
            Op::Abs(x) => {
                let xv = self.value(*x).data();
                acc(*x, &mut |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * xv[i].signum() * (xv[i] != 0.0) as u8 as f64;
                    }
                });
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                acc(*x, &mut |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * y[i] * (1.0 - y[i]);
                    }
                });
            }
            Op::Gelu(x) => {
                let xv = self.value(*x).data();
                acc(*x, &mut |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * gelu_grad(xv[i]);
                    }
                });
            }
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                acc(*x, &mut |s| {
                    for i in 0..s.len() {
                        if xv[i] > 0.0 {
                            s[i] += g[i];
                        }
                    }
                });
            }
            Op::Log(x) => {
                let xv = self.value(*x).data();
                acc(*x, &mut |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] / xv[i];
                    }
                });
            }
            Op::Clamp(x, lo, hi) => {
                let xv = self.value(*x).data();
                acc(*x, &mut |s| {
                    for i in 0..s.len() {
                        if xv[i] > *lo && xv[i] < *hi {
                            s[i] += g[i];
                        }
                    }
                });
            }
            Op::MaskedSoftmax(x) => {
                let (m, n) = node.value.dims2();
                let p = node.value.data();
                acc(*x, &mut |s| {
                    for i in 0..m {
                        let pr = &p[i * n..(i + 1) * n];
                        let gr = &g[i * n..(i + 1) * n];
                        let inner = super::tensor::dot(pr, gr);
                        for j in 0..n {
                            s[i * n + j] += pr[j] * (gr[j] - inner);
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let (m, n) = node.value.dims2();
                let gv = self.value(*gamma).data();
                acc(*gamma, &mut |s| {
                    for i in 0..m {
                        for j in 0..n {
                            s[j] += g[i * n + j] * xhat[i * n + j];
                        }
                    }
                });
                acc(*beta, &mut |s| {
                    for row in g.chunks(n) {
                        add_into(s, row);
                    }
                });
                acc(*x, &mut |s| {
                    let mut dxhat = vec![0.0; n];
                    for i in 0..m {
                        for j in 0..n {
                            dxhat[j] = g[i * n + j] * gv[j];
                        }
                        let xh = &xhat[i * n..(i + 1) * n];
                        let sum_d: f64 = dxhat.iter().sum();
                        let sum_dx = super::tensor::dot(&dxhat, xh);
                        let k = rstd[i] / n as f64;
                        for j in 0..n {
                            s[i * n + j] += k * (n as f64 * dxhat[j] - sum_d - xh[j] * sum_dx);
                        }
                    }
                });
            }
            Op::Sum(x) => acc(*x, &mut |s| s.iter_mut().for_each(|v| *v += g[0])),
            Op::Mean(x) => {
                let len = self.value(*x).len() as f64;
                acc(*x, &mut |s| s.iter_mut().for_each(|v| *v += g[0] / len));
            }
            Op::EmbeddingLookup(table, indices) => {
                let d = self.dims(*table).1;
                acc(*table, &mut |s| {
                    for (r, &i) in indices.iter().enumerate() {
                        add_into(&mut s[i * d..(i + 1) * d], &g[r * d..(r + 1) * d]);
                    }
                });
            }
            Op::StepSte {
                x,
                threshold,
                temperature,
            } => {
                let xv = self.value(*x).data();
                acc(*x, &mut |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * sigmoid_proxy_grad(xv[i] - threshold, *temperature);
                    }
                });
            }
        }
    }
}

#[inline]
fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// `d/da sigmoid(a / temperature)`.
pub fn sigmoid_proxy_grad(a: f64, temperature: f64) -> f64 {
    let s = sigmoid(a / temperature);
    s * (1.0 - s) / temperature
}

/// Softmax of `row + mask` into `out`. Returns `None` if every entry is masked.
pub fn softmax_row(row: &[f64], mask: Option<&[f64]>, out: &mut [f64]) -> Option<()> {
    let logit = |j: usize| -> Option<f64> {
        match mask {
            Some(mk) if mk[j] <= MASKED_BELOW => None,
            Some(mk) => Some(row[j] + mk[j]),
            None => Some(row[j]),
        }
    };
    if (0..row.len()).all(|j| logit(j).is_none()) {
        return None;
    }
    let max = (0..row.len()).filter_map(logit).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        *o = logit(j).map_or(0.0, |l| (l - max).exp());
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    Some(())
}

/// Writes `(row - mean) / sqrt(var + eps)` into `out`; returns the mean and
/// the reciprocal standard deviation.
pub fn normalize_row(row: &[f64], out: &mut [f64]) -> (f64, f64) {
    let n = row.len() as f64;
    let mu = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
    let rstd = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    for (o, v) in out.iter_mut().zip(row) {
        *o = (v - mu) * rstd;
    }
    (mu, rstd)
}
