//! Forward and backward kernels. All take and return plain tensors/buffers;
//! the tape in [`super::tape`] wires them together.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Tolerance on target row sums for [`softmax_xent`].
pub const TARGET_ROW_SUM_TOL: f64 = 1e-9;

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2("matmul")?;
    let (k2, n) = b.dims2("matmul")?;
    if k != k2 {
        return Err(Error::shape(
            "matmul",
            format!("inner dimensions differ: {m}x{k} by {k2}x{n}"),
        ));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = ad[i * k + p];
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// Returns `(g·bᵀ, aᵀ·g)` for `out = a·b`.
pub fn matmul_backward(a: &Tensor, b: &Tensor, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    let (ad, bd) = (a.data(), b.data());
    let mut da = vec![0.0; m * k];
    let mut db = vec![0.0; k * n];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &bd[p * n..(p + 1) * n];
            da[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
            let aip = ad[i * k + p];
            for (d, &gv) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                *d += aip * gv;
            }
        }
    }
    (da, db)
}

/// Adds `bias[j]` to column `j` of an `N×M` matrix.
pub fn add_row_bias(x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (_, m) = x.dims2("add_bias")?;
    if bias.numel() != m {
        return Err(Error::shape(
            "add_bias",
            format!("bias has {} values for width {m}", bias.numel()),
        ));
    }
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(m) {
        for (v, b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

pub fn add_row_bias_backward(width: usize, g: &[f64]) -> Vec<f64> {
    let mut db = vec![0.0; width];
    for row in g.chunks(width) {
        for (d, v) in db.iter_mut().zip(row) {
            *d += v;
        }
    }
    db
}

/// 3×3 cross-correlation, stride 1, zero padding 1: `N×C×H×W` by `O×C×3×3`
/// gives `N×O×H×W`.
pub fn conv2d(x: &Tensor, kernel: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4("conv2d")?;
    let (o, kc, kh, kw) = kernel.dims4("conv2d")?;
    if (kh, kw) != (3, 3) {
        return Err(Error::shape(
            "conv2d",
            format!("kernel must be 3x3, got {kh}x{kw}"),
        ));
    }
    if kc != c {
        return Err(Error::shape(
            "conv2d",
            format!("input has {c} channels, kernel expects {kc}"),
        ));
    }
    let hw = h * w;
    let (xd, kd) = (x.data(), kernel.data());
    let mut out = vec![0.0; n * o * hw];
    for ni in 0..n {
        for oi in 0..o {
            let dst = &mut out[(ni * o + oi) * hw..(ni * o + oi + 1) * hw];
            for ci in 0..c {
                let src = &xd[(ni * c + ci) * hw..(ni * c + ci + 1) * hw];
                let kbase = (oi * c + ci) * 9;
                for ky in 0..3 {
                    for kx in 0..3 {
                        let wv = kd[kbase + ky * 3 + kx];
                        for_each_tap(h, w, ky, kx, |di, si| dst[di] += wv * src[si]);
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, o, h, w], out)
}

/// Gradients `(dx, dkernel)` of [`conv2d`].
pub fn conv2d_backward(
    x: &Tensor,
    kernel: &Tensor,
    g: &[f64],
    need_dx: bool,
) -> (Option<Vec<f64>>, Vec<f64>) {
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let o = kernel.shape()[0];
    let hw = h * w;
    let (xd, kd) = (x.data(), kernel.data());
    let mut dx = need_dx.then(|| vec![0.0; xd.len()]);
    let mut dk = vec![0.0; kd.len()];
    for ni in 0..n {
        for oi in 0..o {
            let gsl = &g[(ni * o + oi) * hw..(ni * o + oi + 1) * hw];
            for ci in 0..c {
                let xoff = (ni * c + ci) * hw;
                let src = &xd[xoff..xoff + hw];
                let kbase = (oi * c + ci) * 9;
                for ky in 0..3 {
                    for kx in 0..3 {
                        let mut acc = 0.0;
                        for_each_tap(h, w, ky, kx, |di, si| acc += gsl[di] * src[si]);
                        dk[kbase + ky * 3 + kx] += acc;
                        if let Some(dx) = dx.as_mut() {
                            let wv = kd[kbase + ky * 3 + kx];
                            let dst = &mut dx[xoff..xoff + hw];
                            for_each_tap(h, w, ky, kx, |di, si| dst[si] += wv * gsl[di]);
                        }
                    }
                }
            }
        }
    }
    (dx, dk)
}

/// Visits `(output index, input index)` pairs of one 3×3 kernel tap under
/// zero padding 1.
#[inline]
fn for_each_tap(h: usize, w: usize, ky: usize, kx: usize, mut f: impl FnMut(usize, usize)) {
    let y_lo = usize::from(ky == 0);
    let y_hi = if ky == 2 { h - 1 } else { h };
    let x_lo = usize::from(kx == 0);
    let x_hi = if kx == 2 { w - 1 } else { w };
    for yy in y_lo..y_hi {
        let sy = yy + ky - 1;
        for xx in x_lo..x_hi {
            f(yy * w + xx, sy * w + xx + kx - 1);
        }
    }
}

/// Adds `bias[o]` to every spatial position of channel `o`.
pub fn add_channel_bias(x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (_, c, h, w) = x.dims4("add_channel_bias")?;
    if bias.numel() != c {
        return Err(Error::shape(
            "add_channel_bias",
            format!("bias has {} values for {c} channels", bias.numel()),
        ));
    }
    let hw = h * w;
    let mut out = x.data().to_vec();
    for (i, plane) in out.chunks_mut(hw).enumerate() {
        let b = bias.data()[i % c];
        plane.iter_mut().for_each(|v| *v += b);
    }
    Tensor::new(x.shape().to_vec(), out)
}

pub fn add_channel_bias_backward(shape: &[usize], g: &[f64]) -> Vec<f64> {
    let c = shape[1];
    let hw = shape[2] * shape[3];
    let mut db = vec![0.0; c];
    for (i, plane) in g.chunks(hw).enumerate() {
        db[i % c] += plane.iter().sum::<f64>();
    }
    db
}

pub fn relu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// Subgradient convention: the derivative at exactly 0 is 0.
pub fn relu_backward(x: &Tensor, g: &[f64]) -> Vec<f64> {
    x.data()
        .iter()
        .zip(g)
        .map(|(&v, &gv)| if v > 0.0 { gv } else { 0.0 })
        .collect()
}

/// 2×2 non-overlapping max pool. Also returns, for each output element, the
/// flat input index it came from; ties go to the first element in row-major
/// order within the window.
pub fn maxpool2(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (n, c, h, w) = x.dims4("maxpool2")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(
            "maxpool2",
            format!("spatial dims must be even, got {h}x{w}"),
        ));
    }
    let (oh, ow) = (h / 2, w / 2);
    let xd = x.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut arg = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + (2 * oy) * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if xd[idx] > xd[best] {
                        best = idx;
                    }
                }
                out.push(xd[best]);
                arg.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![n, c, oh, ow], out)?, arg))
}

pub fn maxpool2_backward(input_len: usize, argmax: &[usize], g: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; input_len];
    for (&i, &gv) in argmax.iter().zip(g) {
        dx[i] += gv;
    }
    dx
}

/// Collapses all trailing axes: `N×…` to `N×(rest)`.
pub fn flatten(x: &Tensor) -> Tensor {
    let n = x.rows();
    let rest = x.row_len();
    x.clone().reshape(vec![n, rest]).expect("same numel")
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let (_, c) = logits.dims2("softmax")?;
    let mut out = logits.data().to_vec();
    for row in out.chunks_mut(c) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Tensor::new(logits.shape().to_vec(), out)
}

/// Batch-mean cross entropy of `softmax(logits)` against a soft target:
/// `mean_n( -Σ_k target_k · log softmax(o)_k )`, evaluated through
/// log-sum-exp. Returns the loss and the softmax probabilities; the gradient
/// with respect to the logits is `(probs - target) / N`.
pub fn softmax_xent(logits: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    let (n, c) = logits.dims2("softmax_xent")?;
    if target.shape() != logits.shape() {
        return Err(Error::shape(
            "softmax_xent",
            format!("target {:?} vs logits {:?}", target.shape(), logits.shape()),
        ));
    }
    if c < 2 {
        return Err(Error::shape("softmax_xent", "need at least two classes"));
    }
    logits.ensure_finite(|| "softmax_xent logits".into())?;
    for (i, row) in target.data().chunks(c).enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > TARGET_ROW_SUM_TOL || row.iter().any(|&t| t < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "target row {i} is not a distribution (sum {s})"
            )));
        }
    }
    let mut probs = Vec::with_capacity(n * c);
    let mut total = 0.0;
    for (orow, trow) in logits.data().chunks(c).zip(target.data().chunks(c)) {
        let max = orow.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + orow.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        let mut row_loss = 0.0;
        for (&o, &t) in orow.iter().zip(trow) {
            if t != 0.0 {
                row_loss -= t * (o - lse);
            }
            probs.push((o - lse).exp());
        }
        total += row_loss;
    }
    Ok((total / n as f64, Tensor::new(vec![n, c], probs)?))
}

pub fn softmax_xent_backward(probs: &Tensor, target: &Tensor, g: f64) -> Vec<f64> {
    let n = probs.rows() as f64;
    probs
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| g * (p - t) / n)
        .collect()
}

/// `out_i = λ·x_i + (1-λ)·x_{pairing[i]}` along the leading axis.
pub fn mix_rows(x: &Tensor, pairing: &[usize], lambda: f64) -> Result<Tensor> {
    if pairing.len() != x.rows() {
        return Err(Error::shape(
            "mix_rows",
            format!("pairing of length {} for {} rows", pairing.len(), x.rows()),
        ));
    }
    let w = x.row_len();
    let mut out = Vec::with_capacity(x.numel());
    for (i, &j) in pairing.iter().enumerate() {
        if j >= x.rows() {
            return Err(Error::shape("mix_rows", format!("pair index {j} out of range")));
        }
        let (a, b) = (x.row(i), x.row(j));
        out.extend(a.iter().zip(b).map(|(&u, &v)| lambda * u + (1.0 - lambda) * v));
    }
    debug_assert_eq!(out.len(), pairing.len() * w);
    Tensor::new(x.shape().to_vec(), out)
}

pub fn mix_rows_backward(width: usize, pairing: &[usize], lambda: f64, g: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; g.len()];
    for (i, &j) in pairing.iter().enumerate() {
        let gi = &g[i * width..(i + 1) * width];
        for (d, &v) in dx[i * width..(i + 1) * width].iter_mut().zip(gi) {
            *d += lambda * v;
        }
        for (d, &v) in dx[j * width..(j + 1) * width].iter_mut().zip(gi) {
            *d += (1.0 - lambda) * v;
        }
    }
    dx
}
