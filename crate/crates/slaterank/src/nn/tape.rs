//! Reverse-mode differentiation on a recorded tape.
//!
//! Forward values are computed eagerly as operations are recorded; each
//! [`Var`] is a handle into the tape. `backward` walks the nodes in reverse
//! creation order, propagating the gradient of a scalar output to every
//! reachable parameter leaf, and consumes the tape (one recorded computation,
//! one gradient pass, then the graph is freed).
//!
//! The catalogue is deliberately small and 2-D only. A few compound
//! conveniences (dropout, masked softmax) are built from catalogued
//! primitives rather than being ops of their own.

use rand::{Rng, RngCore};

use super::tensor::{ParamId, ParamSet, Tensor};
use super::NnError;
use crate::{cast, Real};

/// Epsilon inside layer norm's square root.
const LAYER_NORM_EPS: f64 = 1e-6;

/// Additive logit bias that removes padded positions from a softmax: the
/// shifted logits underflow to an exact 0 weight in both precisions.
pub const MASK_BIAS: f64 = -1e9;

/// Train/eval switch for stochastic layers (dropout).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    Train,
    Eval,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var(usize);

enum Op<F> {
    /// Constant input (no gradient).
    Const,
    /// Leaf bound to a parameter; gradients accumulate into the `ParamSet`.
    Param(ParamId),
    MatMul(usize, usize),
    Transpose(usize),
    Add(usize, usize),
    Sub(usize, usize),
    /// Elementwise product.
    Mul(usize, usize),
    /// Broadcast-add a `1 x d` row to every row of an `n x d` matrix.
    AddRow(usize, usize),
    Scale(usize, F),
    Relu(usize),
    Sigmoid(usize),
    Softplus(usize),
    Log(usize),
    Exp(usize),
    Sqrt(usize),
    /// Softmax over each row.
    RowSoftmax(usize),
    /// Log-sum-exp of each row, producing an `n x 1` column.
    RowLogSumExp(usize),
    /// y_k = log sum_{j >= k} exp(x_j) over an `n x 1` column.
    SuffixLogSumExp(usize),
    /// Per-row normalization with learned gain/bias (`1 x d` each).
    LayerNorm { x: usize, gamma: usize, beta: usize },
    /// Horizontal concatenation.
    ConcatCols(Vec<usize>),
    /// Column slice `[start, end)`.
    SliceCols { x: usize, start: usize, end: usize },
    /// Sum of all entries, producing a 1x1 scalar.
    ReduceSum(usize),
    /// Identity forward; multiplies the gradient by a factor on the way
    /// back. A factor of 1 is a no-op; anything else deliberately corrupts
    /// the gradient (negative control for the gradient checker).
    GradScale(usize, F),
}

struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
}

/// A recorded computation.
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
}

fn shape_err(op: &'static str, expected: String, got: (usize, usize)) -> NnError {
    NnError::ShapeMismatch {
        op,
        expected,
        got: format!("{}x{}", got.0, got.1),
    }
}

#[inline]
fn sigmoid_scalar<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

#[inline]
fn softplus_scalar<F: Real>(x: F) -> F {
    // max(x, 0) + ln(1 + exp(-|x|)): overflow-free for any finite x.
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

fn row_logsumexp<F: Real>(row: &[F]) -> F {
    let m = row.iter().cloned().fold(F::neg_infinity(), F::max);
    if !m.is_finite() {
        return m;
    }
    let sum: F = row.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, v: Var) -> Result<(), NnError> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(NnError::BackwardBeforeForward)
        }
    }

    /// Forward value of a recorded variable.
    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Records a constant; no gradient flows into it.
    pub fn constant(&mut self, t: Tensor<F>) -> Var {
        self.push(t, Op::Const)
    }

    /// Records a parameter leaf by copying its current value onto the tape.
    /// Repeated requests for the same parameter return the same node.
    pub fn param(&mut self, params: &ParamSet<F>, id: ParamId) -> Var {
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(existing) = node.op {
                if existing == id {
                    return Var(i);
                }
            }
        }
        self.push(params.value(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if ac != br {
            return Err(shape_err("matmul", format!("{ar}x{ac} * {ac}x_"), (br, bc)));
        }
        let value = self.nodes[a.0].value.matmul(&self.nodes[b.0].value);
        Ok(self.push(value, Op::MatMul(a.0, b.0)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.transpose();
        self.push(value, Op::Transpose(a.0))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary_same_shape("add", a, b, |x, y| x + y, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary_same_shape("sub", a, b, |x, y| x - y, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary_same_shape("mul", a, b, |x, y| x * y, Op::Mul(a.0, b.0))
    }

    fn binary_same_shape(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(F, F) -> F,
        op: Op<F>,
    ) -> Result<Var, NnError> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa != sb {
            return Err(shape_err(name, format!("{}x{}", sa.0, sa.1), sb));
        }
        let value = self.nodes[a.0].value.zip_map(&self.nodes[b.0].value, f);
        Ok(self.push(value, op))
    }

    /// Adds a `1 x d` row vector to every row of an `n x d` matrix
    /// (bias application).
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, NnError> {
        let (n, d) = self.shape(x);
        let rs = self.shape(row);
        if rs != (1, d) {
            return Err(shape_err("add_row", format!("1x{d}"), rs));
        }
        let mut value = self.nodes[x.0].value.clone();
        let rv = self.nodes[row.0].value.clone();
        for r in 0..n {
            for (v, &b) in value.row_mut(r).iter_mut().zip(rv.row(0)) {
                *v += b;
            }
        }
        Ok(self.push(value, Op::AddRow(x.0, row.0)))
    }

    pub fn scale(&mut self, a: Var, c: F) -> Var {
        let value = self.nodes[a.0].value.map(|x| x * c);
        self.push(value, Op::Scale(a.0, c))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(|x| x.max(F::zero()));
        self.push(value, Op::Relu(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(sigmoid_scalar);
        self.push(value, Op::Sigmoid(a.0))
    }

    /// ln(1 + e^x), computed without overflow for large |x|.
    pub fn softplus(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(softplus_scalar);
        self.push(value, Op::Softplus(a.0))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(|x| x.ln());
        self.push(value, Op::Log(a.0))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(|x| x.exp());
        self.push(value, Op::Exp(a.0))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(|x| x.sqrt());
        self.push(value, Op::Sqrt(a.0))
    }

    /// Softmax over each row, with max-subtraction for stability. An
    /// optional additive bias (same shape, typically 0 / [`MASK_BIAS`])
    /// is applied to the logits first; biased-out entries underflow to an
    /// exact zero weight.
    pub fn row_softmax(&mut self, a: Var, bias: Option<&Tensor<F>>) -> Result<Var, NnError> {
        let logits = match bias {
            Some(b) => {
                if b.shape() != self.shape(a) {
                    let (r, c) = self.shape(a);
                    return Err(shape_err("row_softmax bias", format!("{r}x{c}"), b.shape()));
                }
                let bv = self.constant(b.clone());
                self.add(a, bv)?
            }
            None => a,
        };
        let x = &self.nodes[logits.0].value;
        let mut value = x.clone();
        for r in 0..value.rows() {
            let row = value.row_mut(r);
            let m = row.iter().cloned().fold(F::neg_infinity(), F::max);
            let mut sum = F::zero();
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v = *v / sum;
            }
        }
        Ok(self.push(value, Op::RowSoftmax(logits.0)))
    }

    /// Log-sum-exp of each row; output is `n x 1`.
    pub fn row_logsumexp(&mut self, a: Var) -> Var {
        let x = &self.nodes[a.0].value;
        let mut out = Tensor::zeros(x.rows(), 1);
        for r in 0..x.rows() {
            out.set(r, 0, row_logsumexp(x.row(r)));
        }
        self.push(out, Op::RowLogSumExp(a.0))
    }

    /// Suffix log-sum-exp of an `n x 1` column:
    /// `y_k = log(exp(x_k) + ... + exp(x_n))`, computed back-to-front with
    /// pairwise stable log-add-exp.
    pub fn suffix_logsumexp(&mut self, a: Var) -> Result<Var, NnError> {
        let (n, c) = self.shape(a);
        if c != 1 {
            return Err(shape_err("suffix_logsumexp", format!("{n}x1"), (n, c)));
        }
        let x = &self.nodes[a.0].value;
        let mut out = Tensor::zeros(n, 1);
        let mut acc = F::neg_infinity();
        for k in (0..n).rev() {
            let xk = x.get(k, 0);
            acc = if acc == F::neg_infinity() {
                xk
            } else {
                let hi = xk.max(acc);
                let lo = xk.min(acc);
                hi + (lo - hi).exp().ln_1p()
            };
            out.set(k, 0, acc);
        }
        Ok(self.push(out, Op::SuffixLogSumExp(a.0)))
    }

    /// Per-row layer normalization with learned gain `gamma` and bias
    /// `beta` (both `1 x d`), ε = 1e-6 inside the square root. Variance is
    /// the population variance of the row.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var, NnError> {
        let (n, d) = self.shape(x);
        for (who, v) in [("gamma", gamma), ("beta", beta)] {
            if self.shape(v) != (1, d) {
                let _ = who;
                return Err(shape_err("layer_norm affine", format!("1x{d}"), self.shape(v)));
            }
        }
        let eps = cast::<F>(LAYER_NORM_EPS);
        let xv = self.nodes[x.0].value.clone();
        let g = self.nodes[gamma.0].value.clone();
        let b = self.nodes[beta.0].value.clone();
        let mut out = Tensor::zeros(n, d);
        let inv_d = F::one() / cast::<F>(d as f64);
        for r in 0..n {
            let row = xv.row(r);
            let mean: F = row.iter().cloned().sum::<F>() * inv_d;
            let var: F = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() * inv_d;
            let inv = F::one() / (var + eps).sqrt();
            for c in 0..d {
                let xhat = (row[c] - mean) * inv;
                out.set(r, c, g.get(0, c) * xhat + b.get(0, c));
            }
        }
        Ok(self.push(
            out,
            Op::LayerNorm {
                x: x.0,
                gamma: gamma.0,
                beta: beta.0,
            },
        ))
    }

    /// Inverted dropout: in train mode each entry is zeroed with probability
    /// `p_drop` and survivors are scaled by `1/(1-p_drop)`; eval mode (or
    /// `p_drop = 0`) is the identity.
    pub fn dropout(
        &mut self,
        x: Var,
        p_drop: f64,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<Var, NnError> {
        if !(0.0..1.0).contains(&p_drop) {
            return Err(NnError::InvalidProbability { p: p_drop });
        }
        if mode == Mode::Eval || p_drop == 0.0 {
            return Ok(x);
        }
        let (n, d) = self.shape(x);
        let keep_scale = cast::<F>(1.0 / (1.0 - p_drop));
        let mask = Tensor::from_fn(n, d, |_, _| {
            if rng.gen::<f64>() < p_drop {
                F::zero()
            } else {
                keep_scale
            }
        });
        let m = self.constant(mask);
        self.mul(x, m)
    }

    /// Horizontal concatenation of equally tall matrices.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        assert!(!parts.is_empty(), "concat_cols needs at least one part");
        let n = self.shape(parts[0]).0;
        let mut total = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            if r != n {
                return Err(shape_err("concat_cols", format!("{n}x_"), (r, c)));
            }
            total += c;
        }
        let mut out = Tensor::zeros(n, total);
        let mut offset = 0;
        for &p in parts {
            let v = &self.nodes[p.0].value;
            for r in 0..n {
                out.row_mut(r)[offset..offset + v.cols()].copy_from_slice(v.row(r));
            }
            offset += v.cols();
        }
        Ok(self.push(out, Op::ConcatCols(parts.iter().map(|p| p.0).collect())))
    }

    /// Columns `[start, end)` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var, NnError> {
        let (n, d) = self.shape(x);
        if start >= end || end > d {
            return Err(shape_err("slice_cols", format!("range within {d} cols"), (start, end)));
        }
        let v = &self.nodes[x.0].value;
        let mut out = Tensor::zeros(n, end - start);
        for r in 0..n {
            out.row_mut(r).copy_from_slice(&v.row(r)[start..end]);
        }
        Ok(self.push(out, Op::SliceCols { x: x.0, start, end }))
    }

    /// Sum of every entry; result is 1x1.
    pub fn reduce_sum(&mut self, a: Var) -> Var {
        let total: F = self.nodes[a.0].value.data().iter().cloned().sum();
        self.push(Tensor::scalar(total), Op::ReduceSum(a.0))
    }

    /// Identity in the forward pass; scales the flowing gradient by
    /// `factor` in the backward pass. `factor != 1` makes the analytic
    /// gradient deliberately wrong — used as a negative control to prove
    /// the gradient checker can fail.
    pub fn grad_scale(&mut self, a: Var, factor: F) -> Var {
        let value = self.nodes[a.0].value.clone();
        self.push(value, Op::GradScale(a.0, factor))
    }

    /// Number of recorded nodes (diagnostics).
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Reverse pass from a scalar output. Gradients accumulate into
    /// `params.grad` for every parameter leaf reachable from `output`.
    /// Consumes the tape: the recorded graph is freed afterwards.
    pub fn backward(self, output: Var, params: &mut ParamSet<F>) -> Result<(), NnError> {
        self.check(output)?;
        let out_shape = self.shape(output);
        if out_shape != (1, 1) {
            return Err(shape_err("backward", "1x1 scalar".into(), out_shape));
        }
        let out_val = self.nodes[output.0].value.item();
        if !out_val.is_finite() {
            return Err(NnError::NonFiniteLoss {
                what: format!("backward output = {out_val}"),
            });
        }

        let mut grads: Vec<Option<Tensor<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::scalar(F::one()));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Const => {}
                Op::Param(id) => {
                    params.get_mut(*id).grad.add_scaled(&g, F::one());
                }
                Op::MatMul(a, b) => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    let da = g.matmul(&bv.transpose());
                    let db = av.transpose().matmul(&g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()),
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    let av = self.nodes[*a].value.clone();
                    let bv = self.nodes[*b].value.clone();
                    accumulate(&mut grads, *a, g.zip_map(&bv, |gi, bi| gi * bi));
                    accumulate(&mut grads, *b, g.zip_map(&av, |gi, ai| gi * ai));
                }
                Op::AddRow(x, row) => {
                    let d = g.cols();
                    let mut row_grad = Tensor::zeros(1, d);
                    for r in 0..g.rows() {
                        for (acc, &gi) in row_grad.row_mut(0).iter_mut().zip(g.row(r)) {
                            *acc += gi;
                        }
                    }
                    accumulate(&mut grads, *x, g);
                    accumulate(&mut grads, *row, row_grad);
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    accumulate(&mut grads, *a, g.map(|x| x * c));
                }
                Op::Relu(a) => {
                    let xv = &self.nodes[*a].value;
                    // Subgradient 0 at exactly 0.
                    accumulate(
                        &mut grads,
                        *a,
                        g.zip_map(xv, |gi, x| if x > F::zero() { gi } else { F::zero() }),
                    );
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    accumulate(&mut grads, *a, g.zip_map(y, |gi, yi| gi * yi * (F::one() - yi)));
                }
                Op::Softplus(a) => {
                    let xv = &self.nodes[*a].value;
                    accumulate(&mut grads, *a, g.zip_map(xv, |gi, x| gi * sigmoid_scalar(x)));
                }
                Op::Log(a) => {
                    let xv = &self.nodes[*a].value;
                    accumulate(&mut grads, *a, g.zip_map(xv, |gi, x| gi / x));
                }
                Op::Exp(a) => {
                    let y = &node.value;
                    accumulate(&mut grads, *a, g.zip_map(y, |gi, yi| gi * yi));
                }
                Op::Sqrt(a) => {
                    let y = &node.value;
                    // Subgradient 0 at x = 0 (y = 0) to keep perfect fits finite.
                    let two = cast::<F>(2.0);
                    accumulate(
                        &mut grads,
                        *a,
                        g.zip_map(y, |gi, yi| {
                            if yi == F::zero() {
                                F::zero()
                            } else {
                                gi / (two * yi)
                            }
                        }),
                    );
                }
                Op::RowSoftmax(a) => {
                    let p = &node.value;
                    let mut dx = Tensor::zeros(p.rows(), p.cols());
                    for r in 0..p.rows() {
                        let dot: F = g
                            .row(r)
                            .iter()
                            .zip(p.row(r))
                            .map(|(&gi, &pi)| gi * pi)
                            .sum();
                        for c in 0..p.cols() {
                            dx.set(r, c, p.get(r, c) * (g.get(r, c) - dot));
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::RowLogSumExp(a) => {
                    let xv = &self.nodes[*a].value;
                    let y = &node.value;
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for r in 0..xv.rows() {
                        let gr = g.get(r, 0);
                        let yr = y.get(r, 0);
                        for c in 0..xv.cols() {
                            dx.set(r, c, gr * (xv.get(r, c) - yr).exp());
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::SuffixLogSumExp(a) => {
                    let xv = &self.nodes[*a].value;
                    let y = &node.value;
                    let n = xv.rows();
                    // dL/dx_j = sum_{k <= j} g_k * exp(x_j - y_k); every
                    // exponent is <= 0 because x_j belongs to suffix k.
                    let mut dx = Tensor::zeros(n, 1);
                    for j in 0..n {
                        let xj = xv.get(j, 0);
                        let mut acc = F::zero();
                        for k in 0..=j {
                            acc += g.get(k, 0) * (xj - y.get(k, 0)).exp();
                        }
                        dx.set(j, 0, acc);
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::LayerNorm { x, gamma, beta } => {
                    let xv = &self.nodes[*x].value;
                    let gv = &self.nodes[*gamma].value;
                    let (n, d) = xv.shape();
                    let inv_d = F::one() / cast::<F>(d as f64);
                    let eps = cast::<F>(LAYER_NORM_EPS);
                    let mut dx = Tensor::zeros(n, d);
                    let mut dgamma = Tensor::zeros(1, d);
                    let mut dbeta = Tensor::zeros(1, d);
                    for r in 0..n {
                        let row = xv.row(r);
                        let mean: F = row.iter().cloned().sum::<F>() * inv_d;
                        let var: F =
                            row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() * inv_d;
                        let inv = F::one() / (var + eps).sqrt();
                        // g' = upstream ⊙ gamma; two row means give dx.
                        let mut mean_gp = F::zero();
                        let mut mean_gp_xhat = F::zero();
                        for c in 0..d {
                            let xhat = (row[c] - mean) * inv;
                            let gi = g.get(r, c);
                            let gp = gi * gv.get(0, c);
                            mean_gp += gp;
                            mean_gp_xhat += gp * xhat;
                            dgamma.set(0, c, dgamma.get(0, c) + gi * xhat);
                            dbeta.set(0, c, dbeta.get(0, c) + gi);
                        }
                        mean_gp *= inv_d;
                        mean_gp_xhat *= inv_d;
                        for c in 0..d {
                            let xhat = (row[c] - mean) * inv;
                            let gp = g.get(r, c) * gv.get(0, c);
                            dx.set(r, c, inv * (gp - mean_gp - xhat * mean_gp_xhat));
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *gamma, dgamma);
                    accumulate(&mut grads, *beta, dbeta);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let pc = self.nodes[p].value.cols();
                        let mut dp = Tensor::zeros(g.rows(), pc);
                        for r in 0..g.rows() {
                            dp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + pc]);
                        }
                        accumulate(&mut grads, p, dp);
                        offset += pc;
                    }
                }
                Op::SliceCols { x, start, end } => {
                    let (n, d) = self.nodes[*x].value.shape();
                    let mut dx = Tensor::zeros(n, d);
                    for r in 0..n {
                        dx.row_mut(r)[*start..*end].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::ReduceSum(a) => {
                    let (n, d) = self.nodes[*a].value.shape();
                    let gs = g.item();
                    accumulate(&mut grads, *a, Tensor::from_fn(n, d, |_, _| gs));
                }
                Op::GradScale(a, factor) => {
                    let f = *factor;
                    accumulate(&mut grads, *a, g.map(|x| x * f));
                }
            }
        }
        Ok(())
    }
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

fn accumulate<F: Real>(grads: &mut [Option<Tensor<F>>], idx: usize, delta: Tensor<F>) {
    match &mut grads[idx] {
        Some(existing) => existing.add_scaled(&delta, F::one()),
        slot @ None => *slot = Some(delta),
    }
}
