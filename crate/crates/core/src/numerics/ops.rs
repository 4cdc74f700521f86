//! Forward kernels. Each function is pure: inputs are borrowed and a fresh
//! tensor is returned. The autodiff [`Graph`](super::Graph) calls these for its
//! forward values.

use super::tensor::{Element, Tensor};
use super::NumericsError;

fn mismatch(msg: impl Into<String>) -> NumericsError {
    NumericsError::ShapeMismatch(msg.into())
}

/// Splits a rank-3 (`C×H×W`) or rank-4 (`B×C×H×W`) shape into `(B, C, H, W)`.
fn batched_image_dims(shape: &[usize]) -> Result<(usize, usize, usize, usize), NumericsError> {
    match *shape {
        [c, h, w] => Ok((1, c, h, w)),
        [b, c, h, w] => Ok((b, c, h, w)),
        _ => Err(mismatch(format!("conv input must be rank 3 or 4, got {shape:?}"))),
    }
}

/// Output extents of an unpadded strided convolution, or an error when the
/// kernel does not tile the input exactly.
pub fn conv_output_dims(
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    (sh, sw): (usize, usize),
) -> Result<(usize, usize), NumericsError> {
    if kh == 0 || kw == 0 || sh == 0 || sw == 0 || kh > h || kw > w {
        return Err(mismatch(format!(
            "kernel {kh}x{kw} stride {sh}x{sw} does not fit input {h}x{w}"
        )));
    }
    if !(h - kh).is_multiple_of(sh) || !(w - kw).is_multiple_of(sw) {
        return Err(mismatch(format!(
            "kernel {kh}x{kw} with stride {sh}x{sw} does not tile input {h}x{w} exactly"
        )));
    }
    Ok(((h - kh) / sh + 1, (w - kw) / sw + 1))
}

/// Strided 2-D cross-correlation without padding.
///
/// `input` is `C_in×H×W` or `B×C_in×H×W`; `kernels` is `C_out×C_in×kh×kw`.
/// Every output element accumulates channel-major, then over `kh`, then `kw`,
/// starting from zero.
pub fn conv2d_strided<T: Element>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    stride: (usize, usize),
) -> Result<Tensor<T>, NumericsError> {
    let (b, c_in, h, w) = batched_image_dims(input.shape())?;
    let [c_out, kc, kh, kw] = kernels.shape()[..] else {
        return Err(mismatch("kernels must be rank 4"));
    };
    if kc != c_in {
        return Err(mismatch(format!("kernel expects {kc} channels, input has {c_in}")));
    }
    let (oh, ow) = conv_output_dims(h, w, kh, kw, stride)?;
    let x = input.data();
    let taps = c_in * kh * kw;
    // Kernels laid out tap-major so each tap updates all output channels at
    // once; every channel still sums its taps in the documented order.
    let mut kt = vec![T::zero(); taps * c_out];
    for (co, kernel) in kernels.data().chunks_exact(taps).enumerate() {
        for (tap, v) in kernel.iter().enumerate() {
            kt[tap * c_out + co] = *v;
        }
    }
    let mut out = vec![T::zero(); b * c_out * oh * ow];
    let mut acc = vec![T::zero(); c_out];
    for bi in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                acc.iter_mut().for_each(|a| *a = T::zero());
                let mut tap = 0;
                for ci in 0..c_in {
                    for dy in 0..kh {
                        let iy = oy * stride.0 + dy;
                        let x_row = ((bi * c_in + ci) * h + iy) * w + ox * stride.1;
                        for xv in &x[x_row..x_row + kw] {
                            let k_row = &kt[tap * c_out..(tap + 1) * c_out];
                            for (a, kv) in acc.iter_mut().zip(k_row) {
                                *a = *a + *xv * *kv;
                            }
                            tap += 1;
                        }
                    }
                }
                for (co, a) in acc.iter().enumerate() {
                    out[((bi * c_out + co) * oh + oy) * ow + ox] = *a;
                }
            }
        }
    }
    let shape = if input.rank() == 3 {
        vec![c_out, oh, ow]
    } else {
        vec![b, c_out, oh, ow]
    };
    Tensor::new(shape, out)
}

pub fn matmul<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, NumericsError> {
    let (n, k) = a.dims2()?;
    let (k2, p) = b.dims2()?;
    if k != k2 {
        return Err(mismatch(format!("matmul {n}x{k} by {k2}x{p}")));
    }
    let mut out = vec![T::zero(); n * p];
    T::gemm(n, k, p, a.data(), (k, 1), b.data(), (p, 1), T::zero(), &mut out, (p, 1));
    Tensor::new(vec![n, p], out)
}

/// `x · W + bias`, with `bias` broadcast over rows.
pub fn affine<T: Element>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<Tensor<T>, NumericsError> {
    let out = matmul(x, w)?;
    match bias {
        Some(b) => add_tiled(&out, b),
        None => Ok(out),
    }
}

/// Batched product `(B,n,k)·(B,k,p)`, or `(B,n,k)·(B,p,k)ᵀ` when `transpose_b`.
pub fn bmm<T: Element>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    transpose_b: bool,
) -> Result<Tensor<T>, NumericsError> {
    let [ba, n, k] = a.shape()[..] else {
        return Err(mismatch("bmm lhs must be rank 3"));
    };
    let [bb, r1, r2] = b.shape()[..] else {
        return Err(mismatch("bmm rhs must be rank 3"));
    };
    let (kb, p) = if transpose_b { (r2, r1) } else { (r1, r2) };
    if ba != bb || k != kb {
        return Err(mismatch(format!(
            "bmm {:?} by {:?} (transpose_b={transpose_b})",
            a.shape(),
            b.shape()
        )));
    }
    let b_strides = if transpose_b { (1, k) } else { (p, 1) };
    let mut out = vec![T::zero(); ba * n * p];
    for i in 0..ba {
        T::gemm(
            n,
            k,
            p,
            &a.data()[i * n * k..(i + 1) * n * k],
            (k, 1),
            &b.data()[i * k * p..(i + 1) * k * p],
            b_strides,
            T::zero(),
            &mut out[i * n * p..(i + 1) * n * p],
            (p, 1),
        );
    }
    Tensor::new(vec![ba, n, p], out)
}

fn zip_map<T: Element>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Result<Tensor<T>, NumericsError> {
    if a.shape() != b.shape() {
        return Err(mismatch(format!("elementwise {:?} vs {:?}", a.shape(), b.shape())));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn add<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, NumericsError> {
    zip_map(a, b, |x, y| x + y)
}

pub fn mul<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, NumericsError> {
    zip_map(a, b, |x, y| x * y)
}

/// `x + tile(y)`: `y` is repeated end to end over the flat data of `x`.
/// Covers row-bias broadcast and per-block offsets.
pub fn add_tiled<T: Element>(x: &Tensor<T>, y: &Tensor<T>) -> Result<Tensor<T>, NumericsError> {
    if y.is_empty() || !x.len().is_multiple_of(y.len()) {
        return Err(mismatch(format!("cannot tile {:?} over {:?}", y.shape(), x.shape())));
    }
    let n = y.len();
    let data = x
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| *v + y.data()[i % n])
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

pub fn scale<T: Element>(x: &Tensor<T>, s: T) -> Tensor<T> {
    Tensor::from_fn(x.shape(), |i| x.data()[i] * s)
}

pub fn relu<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    Tensor::from_fn(x.shape(), |i| x.data()[i].max(T::zero()))
}

pub fn sigmoid_scalar<T: Element>(v: T) -> T {
    // Split on sign so exp never overflows.
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    Tensor::from_fn(x.shape(), |i| sigmoid_scalar(x.data()[i]))
}

/// Activation selector for [`act`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

pub fn act<T: Element>(x: &Tensor<T>, kind: Activation) -> Tensor<T> {
    match kind {
        Activation::Relu => relu(x),
        Activation::Sigmoid => sigmoid(x),
    }
}

fn last_dim<T: Element>(x: &Tensor<T>) -> Result<usize, NumericsError> {
    match x.shape().last() {
        Some(&c) if c > 0 => Ok(c),
        _ => Err(mismatch("row op needs a non-empty last dimension")),
    }
}

/// Softmax over the last dimension.
pub fn softmax_rows<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>, NumericsError> {
    let c = last_dim(x)?;
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(c) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// Denominator used by [`normalize_rows_raw`]: the row sum, pushed away from
/// zero to magnitude `eps` (keeping its sign; zero counts as positive).
pub fn floored_denominator<T: Element>(sum: T, eps: T) -> (T, bool) {
    if sum.abs() >= eps {
        (sum, false)
    } else if sum < T::zero() {
        (-eps, true)
    } else {
        (eps, true)
    }
}

/// Divides every row by its own (floored) sum: `x / Σx`.
pub fn normalize_rows_raw<T: Element>(x: &Tensor<T>, eps: T) -> Result<Tensor<T>, NumericsError> {
    let c = last_dim(x)?;
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(c) {
        let sum = row.iter().fold(T::zero(), |a, v| a + *v);
        let (den, _) = floored_denominator(sum, eps);
        for v in row.iter_mut() {
            *v = *v / den;
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// Transposes each `rows×cols` block of a `(B, rows, cols)` view.
pub fn transpose_blocks<T: Element>(
    x: &Tensor<T>,
    batch: usize,
    rows: usize,
    cols: usize,
) -> Result<Tensor<T>, NumericsError> {
    if batch * rows * cols != x.len() {
        return Err(mismatch(format!(
            "cannot view {:?} as {batch}x{rows}x{cols}",
            x.shape()
        )));
    }
    let d = x.data();
    let mut out = Vec::with_capacity(d.len());
    for b in 0..batch {
        let base = b * rows * cols;
        for c in 0..cols {
            for r in 0..rows {
                out.push(d[base + r * cols + c]);
            }
        }
    }
    Tensor::new(vec![batch, cols, rows], out)
}

/// Views `x` as `(a, b, c, d)` and exchanges the two middle axes, giving
/// `(a, c, b, d)`.
pub fn swap_middle_axes<T: Element>(x: &Tensor<T>, dims: [usize; 4]) -> Result<Tensor<T>, NumericsError> {
    let [a, b, c, d] = dims;
    if a * b * c * d != x.len() {
        return Err(mismatch(format!("cannot view {:?} as {dims:?}", x.shape())));
    }
    let src = x.data();
    let mut out = Vec::with_capacity(src.len());
    for i in 0..a {
        for k in 0..c {
            for j in 0..b {
                let at = ((i * b + j) * c + k) * d;
                out.extend_from_slice(&src[at..at + d]);
            }
        }
    }
    Tensor::new(vec![a, c, b, d], out)
}

pub fn transpose<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>, NumericsError> {
    let (r, c) = x.dims2()?;
    transpose_blocks(x, 1, r, c)?.into_reshape(&[c, r])
}

pub fn concat_cols<T: Element>(parts: &[&Tensor<T>]) -> Result<Tensor<T>, NumericsError> {
    let first = parts.first().ok_or_else(|| mismatch("concat of nothing"))?;
    let (rows, _) = first.dims2()?;
    let mut total = 0;
    for p in parts {
        let (r, c) = p.dims2()?;
        if r != rows {
            return Err(mismatch(format!("concat_cols rows {r} vs {rows}")));
        }
        total += c;
    }
    let mut out = Vec::with_capacity(rows * total);
    for r in 0..rows {
        for p in parts {
            let c = p.shape()[1];
            out.extend_from_slice(&p.data()[r * c..(r + 1) * c]);
        }
    }
    Tensor::new(vec![rows, total], out)
}

pub fn concat_rows<T: Element>(parts: &[&Tensor<T>]) -> Result<Tensor<T>, NumericsError> {
    let first = parts.first().ok_or_else(|| mismatch("concat of nothing"))?;
    let (_, cols) = first.dims2()?;
    let mut rows = 0;
    let mut out = Vec::new();
    for p in parts {
        let (r, c) = p.dims2()?;
        if c != cols {
            return Err(mismatch(format!("concat_rows cols {c} vs {cols}")));
        }
        rows += r;
        out.extend_from_slice(p.data());
    }
    Tensor::new(vec![rows, cols], out)
}

pub fn slice_rows<T: Element>(
    x: &Tensor<T>,
    start: usize,
    end: usize,
) -> Result<Tensor<T>, NumericsError> {
    let (rows, cols) = x.dims2()?;
    if start > end || end > rows {
        return Err(mismatch(format!("rows {start}..{end} of {rows}")));
    }
    Tensor::new(vec![end - start, cols], x.data()[start * cols..end * cols].to_vec())
}

/// Row-major flatten to a `1×n` matrix.
pub fn flatten<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    Tensor::new(vec![1, x.len()], x.data().to_vec()).expect("length preserved")
}

pub fn sum<T: Element>(x: &Tensor<T>) -> T {
    x.data().iter().fold(T::zero(), |a, v| a + *v)
}
