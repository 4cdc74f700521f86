//! Tape-based reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so the tape is already a
//! topological order and `backward` is a single reverse sweep. Parameter
//! leaves borrow their tensors; nothing is copied until a gradient exists.

use std::borrow::Cow;

use super::ops;
use super::tensor::{Element, Tensor};
use super::NumericsError;

/// Predicted probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]`.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    MatMul(NodeId, NodeId),
    Bmm { a: NodeId, b: NodeId, transpose_b: bool },
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddTiled(NodeId, NodeId),
    Scale(NodeId, T),
    Relu(NodeId),
    Sigmoid(NodeId),
    SoftmaxRows(NodeId),
    NormalizeRowsRaw { x: NodeId, eps: T },
    Conv2d { input: NodeId, kernels: NodeId, stride: (usize, usize) },
    TransposeBlocks { x: NodeId, batch: usize, rows: usize, cols: usize },
    SwapMiddleAxes { x: NodeId, dims: [usize; 4] },
    Reshape(NodeId),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceRows { x: NodeId, start: usize },
    Sum(NodeId),
    Bce { y_hat: NodeId, target: T },
}

struct Node<'p, T: Element> {
    op: Op<T>,
    value: Cow<'p, Tensor<T>>,
    needs_grad: bool,
}

/// A differentiable computation recorded on a tape.
pub struct Graph<'p, T: Element = f64> {
    nodes: Vec<Node<'p, T>>,
    kinks: u64,
}

impl<T: Element> Default for Graph<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0100_0000_01b3;

impl<'p, T: Element> Graph<'p, T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            kinks: FNV_OFFSET,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Fingerprint of every branch taken at a non-differentiable point (relu
    /// masks, floored denominators, loss clamps). Two evaluations with equal
    /// fingerprints lie on the same smooth piece.
    pub fn kink_signature(&self) -> u64 {
        self.kinks
    }

    fn note_kinks(&mut self, bits: impl Iterator<Item = bool>) {
        let mut h = self.kinks;
        for b in bits {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        self.kinks = h;
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>, parents: &[NodeId]) -> Result<NodeId, NumericsError> {
        value.ensure_finite("op output")?;
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            op,
            value: Cow::Owned(value),
            needs_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn leaf(&mut self, value: Cow<'p, Tensor<T>>, needs_grad: bool) -> Result<NodeId, NumericsError> {
        value.ensure_finite("leaf")?;
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            needs_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Differentiable leaf borrowing an existing tensor.
    pub fn param(&mut self, t: &'p Tensor<T>) -> Result<NodeId, NumericsError> {
        self.leaf(Cow::Borrowed(t), true)
    }

    pub fn param_owned(&mut self, t: Tensor<T>) -> Result<NodeId, NumericsError> {
        self.leaf(Cow::Owned(t), true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Result<NodeId, NumericsError> {
        self.leaf(Cow::Owned(t), false)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    fn v(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let out = ops::matmul(self.v(a), self.v(b))?;
        self.push(Op::MatMul(a, b), out, &[a, b])
    }

    pub fn bmm(&mut self, a: NodeId, b: NodeId, transpose_b: bool) -> Result<NodeId, NumericsError> {
        let out = ops::bmm(self.v(a), self.v(b), transpose_b)?;
        self.push(Op::Bmm { a, b, transpose_b }, out, &[a, b])
    }

    /// `x · w + bias` with the bias broadcast over rows.
    pub fn affine(&mut self, x: NodeId, w: NodeId, bias: Option<NodeId>) -> Result<NodeId, NumericsError> {
        let y = self.matmul(x, w)?;
        match bias {
            Some(b) => self.add_tiled(y, b),
            None => Ok(y),
        }
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let out = ops::add(self.v(a), self.v(b))?;
        self.push(Op::Add(a, b), out, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let out = ops::mul(self.v(a), self.v(b))?;
        self.push(Op::Mul(a, b), out, &[a, b])
    }

    pub fn add_tiled(&mut self, x: NodeId, y: NodeId) -> Result<NodeId, NumericsError> {
        let out = ops::add_tiled(self.v(x), self.v(y))?;
        self.push(Op::AddTiled(x, y), out, &[x, y])
    }

    pub fn scale(&mut self, x: NodeId, s: T) -> Result<NodeId, NumericsError> {
        let out = ops::scale(self.v(x), s);
        self.push(Op::Scale(x, s), out, &[x])
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        let out = ops::relu(self.v(x));
        let mask: Vec<bool> = self.v(x).data().iter().map(|v| *v > T::zero()).collect();
        self.note_kinks(mask.into_iter());
        self.push(Op::Relu(x), out, &[x])
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        let out = ops::sigmoid(self.v(x));
        self.push(Op::Sigmoid(x), out, &[x])
    }

    pub fn act(&mut self, x: NodeId, kind: ops::Activation) -> Result<NodeId, NumericsError> {
        match kind {
            ops::Activation::Relu => self.relu(x),
            ops::Activation::Sigmoid => self.sigmoid(x),
        }
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        let out = ops::softmax_rows(self.v(x))?;
        self.push(Op::SoftmaxRows(x), out, &[x])
    }

    /// Divides each row by its own sum, with the sum floored at `eps` in magnitude.
    pub fn normalize_rows_raw(&mut self, x: NodeId, eps: T) -> Result<NodeId, NumericsError> {
        let out = ops::normalize_rows_raw(self.v(x), eps)?;
        let c = *self.v(x).shape().last().unwrap_or(&1);
        let floored: Vec<bool> = self
            .v(x)
            .data()
            .chunks(c)
            .map(|row| ops::floored_denominator(row.iter().fold(T::zero(), |a, v| a + *v), eps).1)
            .collect();
        self.note_kinks(floored.into_iter());
        self.push(Op::NormalizeRowsRaw { x, eps }, out, &[x])
    }

    pub fn conv2d_strided(
        &mut self,
        input: NodeId,
        kernels: NodeId,
        stride: (usize, usize),
    ) -> Result<NodeId, NumericsError> {
        let out = ops::conv2d_strided(self.v(input), self.v(kernels), stride)?;
        self.push(Op::Conv2d { input, kernels, stride }, out, &[input, kernels])
    }

    pub fn transpose_blocks(
        &mut self,
        x: NodeId,
        batch: usize,
        rows: usize,
        cols: usize,
    ) -> Result<NodeId, NumericsError> {
        let out = ops::transpose_blocks(self.v(x), batch, rows, cols)?;
        self.push(Op::TransposeBlocks { x, batch, rows, cols }, out, &[x])
    }

    /// `(a, b, c, d)` view to `(a, c, b, d)`.
    pub fn swap_middle_axes(&mut self, x: NodeId, dims: [usize; 4]) -> Result<NodeId, NumericsError> {
        let out = ops::swap_middle_axes(self.v(x), dims)?;
        self.push(Op::SwapMiddleAxes { x, dims }, out, &[x])
    }

    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        let (r, c) = self.v(x).dims2()?;
        let t = self.transpose_blocks(x, 1, r, c)?;
        self.reshape(t, &[c, r])
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId, NumericsError> {
        let out = self.v(x).reshape(shape)?;
        self.push(Op::Reshape(x), out, &[x])
    }

    pub fn flatten(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        let n = self.v(x).len();
        self.reshape(x, &[1, n])
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, NumericsError> {
        let values: Vec<&Tensor<T>> = parts.iter().map(|p| self.v(*p)).collect();
        let out = ops::concat_cols(&values)?;
        self.push(Op::ConcatCols(parts.to_vec()), out, parts)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId, NumericsError> {
        let values: Vec<&Tensor<T>> = parts.iter().map(|p| self.v(*p)).collect();
        let out = ops::concat_rows(&values)?;
        self.push(Op::ConcatRows(parts.to_vec()), out, parts)
    }

    pub fn slice_rows(&mut self, x: NodeId, start: usize, end: usize) -> Result<NodeId, NumericsError> {
        let out = ops::slice_rows(self.v(x), start, end)?;
        self.push(Op::SliceRows { x, start }, out, &[x])
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        let out = Tensor::scalar(ops::sum(self.v(x)));
        self.push(Op::Sum(x), out, &[x])
    }

    /// Binary cross-entropy of a probability against a `{0,1}` target.
    pub fn bce(&mut self, y_hat: NodeId, target: T) -> Result<NodeId, NumericsError> {
        let p = self.scalar_of(y_hat)?;
        let (loss, clamped) = bce_value(p, target);
        self.note_kinks(std::iter::once(clamped));
        self.push(Op::Bce { y_hat, target }, Tensor::scalar(loss), &[y_hat])
    }

    fn scalar_of(&self, id: NodeId) -> Result<T, NumericsError> {
        let v = self.v(id);
        if v.len() == 1 {
            Ok(v.data()[0])
        } else {
            Err(NumericsError::NonScalarRoot(v.shape().to_vec()))
        }
    }

    /// Gradients of the scalar `root` with respect to every node on the tape.
    pub fn backward(&self, root: NodeId) -> Result<Gradients<T>, NumericsError> {
        let root_value = self.v(root);
        if root_value.len() != 1 {
            return Err(NumericsError::NonScalarRoot(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![T::one()]);
        for i in (0..=root.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn backprop_node(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (n, k) = (self.v(*a).shape()[0], self.v(*a).shape()[1]);
                let p = self.v(*b).shape()[1];
                if let Some(ga) = self.slot(grads, *a) {
                    T::gemm(n, p, k, g, (p, 1), self.v(*b).data(), (1, p), T::one(), ga, (k, 1));
                }
                if let Some(gb) = self.slot(grads, *b) {
                    T::gemm(k, n, p, self.v(*a).data(), (1, k), g, (p, 1), T::one(), gb, (p, 1));
                }
            }
            Op::Bmm { a, b, transpose_b } => {
                let [batch, n, k] = self.v(*a).shape()[..] else { unreachable!() };
                let p = node.value.shape()[2];
                let a_val = self.v(*a).data();
                let b_val = self.v(*b).data();
                if let Some(ga) = self.slot(grads, *a) {
                    for bi in 0..batch {
                        let gi = &g[bi * n * p..(bi + 1) * n * p];
                        let bv = &b_val[bi * k * p..(bi + 1) * k * p];
                        // b block is k×p, or p×k when transposed.
                        let b_strides = if *transpose_b { (k, 1) } else { (1, p) };
                        T::gemm(n, p, k, gi, (p, 1), bv, b_strides, T::one(), &mut ga[bi * n * k..(bi + 1) * n * k], (k, 1));
                    }
                }
                if let Some(gb) = self.slot(grads, *b) {
                    for bi in 0..batch {
                        let gi = &g[bi * n * p..(bi + 1) * n * p];
                        let av = &a_val[bi * n * k..(bi + 1) * n * k];
                        let gbi = &mut gb[bi * k * p..(bi + 1) * k * p];
                        if *transpose_b {
                            T::gemm(p, n, k, gi, (1, p), av, (k, 1), T::one(), gbi, (k, 1));
                        } else {
                            T::gemm(k, n, p, av, (1, k), gi, (p, 1), T::one(), gbi, (p, 1));
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for id in [*a, *b] {
                    if let Some(gx) = self.slot(grads, id) {
                        axpy(gx, g);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.v(*a).data(), self.v(*b).data());
                if let Some(ga) = self.slot(grads, *a) {
                    for ((o, gi), bi) in ga.iter_mut().zip(g).zip(bv) {
                        *o = *o + *gi * *bi;
                    }
                }
                if let Some(gb) = self.slot(grads, *b) {
                    for ((o, gi), ai) in gb.iter_mut().zip(g).zip(av) {
                        *o = *o + *gi * *ai;
                    }
                }
            }
            Op::AddTiled(x, y) => {
                if let Some(gx) = self.slot(grads, *x) {
                    axpy(gx, g);
                }
                if let Some(gy) = self.slot(grads, *y) {
                    let n = gy.len();
                    for (j, gi) in g.iter().enumerate() {
                        gy[j % n] = gy[j % n] + *gi;
                    }
                }
            }
            Op::Scale(x, s) => {
                if let Some(gx) = self.slot(grads, *x) {
                    for (o, gi) in gx.iter_mut().zip(g) {
                        *o = *o + *gi * *s;
                    }
                }
            }
            Op::Relu(x) => {
                let xv = self.v(*x).data();
                if let Some(gx) = self.slot(grads, *x) {
                    for ((o, gi), xi) in gx.iter_mut().zip(g).zip(xv) {
                        if *xi > T::zero() {
                            *o = *o + *gi;
                        }
                    }
                }
            }
            Op::Sigmoid(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    for ((o, gi), y) in gx.iter_mut().zip(g).zip(out) {
                        *o = *o + *gi * *y * (T::one() - *y);
                    }
                }
            }
            Op::SoftmaxRows(x) => {
                let c = *node.value.shape().last().unwrap_or(&1);
                if let Some(gx) = self.slot(grads, *x) {
                    for ((orow, grow), yrow) in gx.chunks_mut(c).zip(g.chunks(c)).zip(out.chunks(c)) {
                        let dot = grow.iter().zip(yrow).fold(T::zero(), |a, (gi, yi)| a + *gi * *yi);
                        for ((o, gi), yi) in orow.iter_mut().zip(grow).zip(yrow) {
                            *o = *o + *yi * (*gi - dot);
                        }
                    }
                }
            }
            Op::NormalizeRowsRaw { x, eps } => {
                let c = *node.value.shape().last().unwrap_or(&1);
                let xv = self.v(*x).data();
                if let Some(gx) = self.slot(grads, *x) {
                    for ((orow, grow), (xrow, yrow)) in gx
                        .chunks_mut(c)
                        .zip(g.chunks(c))
                        .zip(xv.chunks(c).zip(out.chunks(c)))
                    {
                        let s = xrow.iter().fold(T::zero(), |a, v| a + *v);
                        let (den, floored) = ops::floored_denominator(s, *eps);
                        let shift = if floored {
                            T::zero()
                        } else {
                            grow.iter().zip(yrow).fold(T::zero(), |a, (gi, yi)| a + *gi * *yi) / den
                        };
                        for (o, gi) in orow.iter_mut().zip(grow) {
                            *o = *o + *gi / den - shift;
                        }
                    }
                }
            }
            Op::Conv2d { input, kernels, stride } => self.backprop_conv(*input, *kernels, *stride, node, g, grads),
            Op::SwapMiddleAxes { x, dims } => {
                if let Some(gx) = self.slot(grads, *x) {
                    let [a, b, c, d] = *dims;
                    let back = ops::swap_middle_axes(&Tensor::new(vec![g.len()], g.to_vec()).expect("length"), [a, c, b, d])
                        .expect("dims checked on the forward pass");
                    axpy(gx, back.data());
                }
            }
            Op::TransposeBlocks { x, batch, rows, cols } => {
                if let Some(gx) = self.slot(grads, *x) {
                    for b in 0..*batch {
                        let base = b * rows * cols;
                        for c in 0..*cols {
                            for r in 0..*rows {
                                let dst = base + r * cols + c;
                                gx[dst] = gx[dst] + g[base + c * rows + r];
                            }
                        }
                    }
                }
            }
            Op::Reshape(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    axpy(gx, g);
                }
            }
            Op::ConcatCols(parts) => {
                let (rows, total) = (node.value.shape()[0], node.value.shape()[1]);
                let mut offset = 0;
                for p in parts {
                    let c = self.v(*p).shape()[1];
                    if let Some(gp) = self.slot(grads, *p) {
                        for r in 0..rows {
                            axpy(&mut gp[r * c..(r + 1) * c], &g[r * total + offset..r * total + offset + c]);
                        }
                    }
                    offset += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = self.v(*p).len();
                    if let Some(gp) = self.slot(grads, *p) {
                        axpy(gp, &g[offset..offset + n]);
                    }
                    offset += n;
                }
            }
            Op::SliceRows { x, start } => {
                let cols = node.value.shape()[1];
                if let Some(gx) = self.slot(grads, *x) {
                    axpy(&mut gx[start * cols..start * cols + g.len()], g);
                }
            }
            Op::Sum(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    for o in gx.iter_mut() {
                        *o = *o + g[0];
                    }
                }
            }
            Op::Bce { y_hat, target } => {
                let p = self.v(*y_hat).data()[0];
                let lo = T::from_f64(BCE_CLAMP);
                if let Some(gp) = self.slot(grads, *y_hat) {
                    if p > lo && p < T::one() - lo {
                        let d = -*target / p + (T::one() - *target) / (T::one() - p);
                        gp[0] = gp[0] + g[0] * d;
                    }
                }
            }
        }
    }

    fn backprop_conv(
        &self,
        input: NodeId,
        kernels: NodeId,
        stride: (usize, usize),
        node: &Node<'p, T>,
        g: &[T],
        grads: &mut [Option<Vec<T>>],
    ) {
        let in_shape = self.v(input).shape();
        let (b, c_in, h, w) = match *in_shape {
            [c, h, w] => (1, c, h, w),
            [b, c, h, w] => (b, c, h, w),
            _ => unreachable!(),
        };
        let [c_out, _, kh, kw] = self.v(kernels).shape()[..] else { unreachable!() };
        let out_shape = node.value.shape();
        let (oh, ow) = (out_shape[out_shape.len() - 2], out_shape[out_shape.len() - 1]);
        let x = self.v(input).data();
        let k = self.v(kernels).data();
        if self.nodes[input.0].needs_grad {
            let mut gx = vec![T::zero(); x.len()];
            for bi in 0..b {
                for co in 0..c_out {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let go = g[((bi * c_out + co) * oh + oy) * ow + ox];
                            for ci in 0..c_in {
                                for dy in 0..kh {
                                    let x_row = ((bi * c_in + ci) * h + oy * stride.0 + dy) * w + ox * stride.1;
                                    let k_row = ((co * c_in + ci) * kh + dy) * kw;
                                    for dx in 0..kw {
                                        gx[x_row + dx] = gx[x_row + dx] + go * k[k_row + dx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if let Some(slot) = self.slot(grads, input) {
                axpy(slot, &gx);
            }
        }
        if let Some(gk) = self.slot(grads, kernels) {
            for bi in 0..b {
                for co in 0..c_out {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let go = g[((bi * c_out + co) * oh + oy) * ow + ox];
                            for ci in 0..c_in {
                                for dy in 0..kh {
                                    let x_row = ((bi * c_in + ci) * h + oy * stride.0 + dy) * w + ox * stride.1;
                                    let k_row = ((co * c_in + ci) * kh + dy) * kw;
                                    for dx in 0..kw {
                                        gk[k_row + dx] = gk[k_row + dx] + go * x[x_row + dx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Vec<T>>], id: NodeId) -> Option<&'g mut Vec<T>> {
        let node = &self.nodes[id.0];
        if !node.needs_grad {
            return None;
        }
        Some(grads[id.0].get_or_insert_with(|| vec![T::zero(); node.value.len()]))
    }
}

fn axpy<T: Element>(dst: &mut [T], src: &[T]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = *d + *s;
    }
}

/// Clamped binary cross-entropy and whether the clamp was active.
pub fn bce_value<T: Element>(p: T, target: T) -> (T, bool) {
    let lo = T::from_f64(BCE_CLAMP);
    let hi = T::one() - lo;
    let clamped = p < lo || p > hi;
    let q = p.max(lo).min(hi);
    (-(target * q.ln() + (T::one() - target) * (T::one() - q).ln()), clamped)
}

/// Result of a backward sweep.
pub struct Gradients<T: Element> {
    grads: Vec<Option<Vec<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Element> Gradients<T> {
    /// Gradient for `id`; zeros when the node was not reached.
    pub fn get(&self, id: NodeId) -> Tensor<T> {
        let shape = &self.shapes[id.0];
        match &self.grads[id.0] {
            Some(g) => Tensor::new(shape.clone(), g.clone()).expect("gradient matches node shape"),
            None => Tensor::zeros(shape),
        }
    }

    pub fn reached(&self, id: NodeId) -> bool {
        self.grads[id.0].is_some()
    }

    /// Adds the gradient of `id` into `dst`, leaving `dst` untouched when unreached.
    pub fn accumulate_into(&self, id: NodeId, dst: &mut Tensor<T>) {
        if let Some(g) = &self.grads[id.0] {
            axpy(dst.data_mut(), g);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn linear_sum_gradient_is_broadcast_input() {
        let w = t(&[3, 2], &[0.1, -0.2, 0.3, 0.4, -0.5, 0.6]);
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 3], &[1.0, 2.0, 3.0])).unwrap();
        let wn = g.param(&w).unwrap();
        let y = g.matmul(x, wn).unwrap();
        let s = g.sum(y).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(wn).data(), &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        assert!(!grads.reached(x));
    }

    #[test]
    fn sigmoid_at_zero_has_quarter_slope() {
        let z = Tensor::scalar(0.0);
        let mut g = Graph::new();
        let zn = g.param(&z).unwrap();
        let s = g.sigmoid(zn).unwrap();
        let y = g.scale(s, 3.0).unwrap();
        assert_eq!(g.value(s).data()[0], 0.5);
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(zn).data()[0], 0.75);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::zeros(&[2, 2])).unwrap();
        assert!(matches!(g.backward(x), Err(NumericsError::NonScalarRoot(_))));
    }

    #[test]
    fn unreached_parameters_get_zero() {
        let a = Tensor::scalar(2.0);
        let b = Tensor::scalar(5.0);
        let mut g = Graph::new();
        let an = g.param(&a).unwrap();
        let bn = g.param(&b).unwrap();
        let y = g.scale(an, 2.0).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(bn).data(), &[0.0]);
        assert_eq!(grads.get(an).data(), &[2.0]);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut g = Graph::<f64>::new();
        assert!(g.constant(Tensor::scalar(f64::NAN)).is_err());
    }

    #[test]
    fn bce_closed_forms() {
        assert!((bce_value(0.5f64, 1.0).0 - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_value(0.5f64, 0.0).0 - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_value(0.9f64, 1.0).0 - 0.105_360_515_657_826_3).abs() < 1e-12);
        assert!(bce_value(1.0 - 1e-12f64, 1.0).0 < 1e-6);
        assert!(bce_value(0.0f64, 1.0).0.is_finite());
    }
}
