//! Dense building blocks with explicit backward passes.
//!
//! Activations are row-major `rows × features` matrices. Every backward takes
//! the cache its forward produced and returns input and parameter gradients.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use crate::Real;

pub const LN_EPS: f64 = 1e-6;
pub const BN_EPS: f64 = 1e-5;

/// `x · w + b`.
pub fn linear<T: Real>(x: &ArrayView2<T>, w: &Array2<T>, b: Option<&Array1<T>>) -> Array2<T> {
    let mut y = x.dot(w);
    if let Some(b) = b {
        y += b;
    }
    y
}

/// Gradients of `x · w + b`: returns `dx` and accumulates into `dw`, `db`.
pub fn linear_backward<T: Real>(
    x: &ArrayView2<T>,
    w: &Array2<T>,
    dy: &ArrayView2<T>,
    dw: &mut Array2<T>,
    db: Option<&mut Array1<T>>,
) -> Array2<T> {
    ndarray::linalg::general_mat_mul(T::one(), &x.t(), dy, T::one(), dw);
    if let Some(db) = db {
        *db += &dy.sum_axis(Axis(0));
    }
    dy.dot(&w.t())
}

pub struct LayerNormCache<T> {
    pub xhat: Array2<T>,
    pub rstd: Array1<T>,
}

pub fn layer_norm<T: Real>(
    x: &ArrayView2<T>,
    gamma: &Array1<T>,
    beta: &Array1<T>,
) -> (Array2<T>, LayerNormCache<T>) {
    let d = T::of(x.ncols() as f64);
    let eps = T::of(LN_EPS);
    let mut xhat = x.to_owned();
    let mut rstd = Array1::zeros(x.nrows());
    for (mut row, r) in xhat.rows_mut().into_iter().zip(rstd.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|&v| v * v).sum::<T>() / d;
        *r = T::one() / (var + eps).sqrt();
        let rr = *r;
        row.mapv_inplace(|v| v * rr);
    }
    let y = &xhat * gamma + beta;
    (y, LayerNormCache { xhat, rstd })
}

pub fn layer_norm_backward<T: Real>(
    dy: &ArrayView2<T>,
    cache: &LayerNormCache<T>,
    gamma: &Array1<T>,
    dgamma: &mut Array1<T>,
    dbeta: &mut Array1<T>,
) -> Array2<T> {
    *dgamma += &(dy * &cache.xhat).sum_axis(Axis(0));
    *dbeta += &dy.sum_axis(Axis(0));
    let d = T::of(dy.ncols() as f64);
    let mut dx = dy * gamma;
    for ((mut row, xh), &r) in dx
        .rows_mut()
        .into_iter()
        .zip(cache.xhat.rows())
        .zip(&cache.rstd)
    {
        let mean_d = row.sum() / d;
        let mean_dx = row.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>() / d;
        Zip::from(&mut row)
            .and(&xh)
            .for_each(|v, &h| *v = r * (*v - mean_d - h * mean_dx));
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Tanh-approximated GELU.
pub fn gelu<T: Real>(x: T) -> T {
    let half = T::of(0.5);
    let u = T::of(GELU_C) * (x + T::of(GELU_A) * x * x * x);
    half * x * (T::one() + u.tanh())
}

pub fn gelu_grad<T: Real>(x: T) -> T {
    let half = T::of(0.5);
    let u = T::of(GELU_C) * (x + T::of(GELU_A) * x * x * x);
    let t = u.tanh();
    let du = T::of(GELU_C) * (T::one() + T::of(3.0 * GELU_A) * x * x);
    half * (T::one() + t) + half * x * (T::one() - t * t) * du
}

/// Row-wise softmax with max subtraction, in place.
pub fn softmax_rows<T: Real>(m: &mut Array2<T>) {
    for mut row in m.rows_mut() {
        let max = row.fold(T::neg_infinity(), |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// 1×3 convolution input layout: each row `(patch, t)` becomes
/// `[x(t-1), x(t), x(t+1)]` with zero padding at the patch ends.
pub fn im2col3<T: Real>(x: &ArrayView2<T>, n: usize) -> Array2<T> {
    let (rows, c) = x.dim();
    let mut col = Array2::zeros((rows, 3 * c));
    for r in 0..rows {
        let t = r % n;
        if t > 0 {
            col.slice_mut(s![r, 0..c]).assign(&x.row(r - 1));
        }
        col.slice_mut(s![r, c..2 * c]).assign(&x.row(r));
        if t + 1 < n {
            col.slice_mut(s![r, 2 * c..3 * c]).assign(&x.row(r + 1));
        }
    }
    col
}

/// Adjoint of [`im2col3`].
pub fn col2im3<T: Real>(dcol: &ArrayView2<T>, n: usize) -> Array2<T> {
    let rows = dcol.nrows();
    let c = dcol.ncols() / 3;
    let mut dx = Array2::zeros((rows, c));
    for r in 0..rows {
        let t = r % n;
        let mut row = dx.row_mut(r);
        row += &dcol.slice(s![r, c..2 * c]);
        if t + 1 < n {
            row += &dcol.slice(s![r + 1, 0..c]);
        }
        if t > 0 {
            row += &dcol.slice(s![r - 1, 2 * c..3 * c]);
        }
    }
    dx
}

pub struct BatchNormCache<T> {
    pub xhat: Array2<T>,
    pub rstd: Array1<T>,
}

/// Per-channel batch statistics (biased variance) over all rows.
pub fn batch_stats<T: Real>(x: &ArrayView2<T>) -> (Array1<T>, Array1<T>) {
    let n = T::of(x.nrows() as f64);
    let mean = x.sum_axis(Axis(0)) / n;
    let centered = x - &mean;
    let var = (&centered * &centered).sum_axis(Axis(0)) / n;
    (mean, var)
}

pub fn batch_norm_apply<T: Real>(
    x: &ArrayView2<T>,
    mean: &Array1<T>,
    var: &Array1<T>,
    gamma: &Array1<T>,
    beta: &Array1<T>,
) -> (Array2<T>, BatchNormCache<T>) {
    let eps = T::of(BN_EPS);
    let rstd = var.mapv(|v| T::one() / (v + eps).sqrt());
    let xhat = (x - mean) * &rstd;
    let y = &xhat * gamma + beta;
    (y, BatchNormCache { xhat, rstd })
}

/// Max over each consecutive group of `n` rows. Ties resolve to the lowest row.
pub fn max_pool_groups<T: Real>(x: &ArrayView2<T>, n: usize) -> (Array2<T>, Vec<usize>) {
    let (rows, c) = x.dim();
    let groups = rows / n;
    let mut out = Array2::zeros((groups, c));
    let mut arg = vec![0usize; groups * c];
    for g in 0..groups {
        for ch in 0..c {
            let mut best = g * n;
            let mut best_v = x[[best, ch]];
            for r in g * n + 1..(g + 1) * n {
                if x[[r, ch]] > best_v {
                    best_v = x[[r, ch]];
                    best = r;
                }
            }
            out[[g, ch]] = best_v;
            arg[g * c + ch] = best;
        }
    }
    (out, arg)
}

pub fn max_pool_backward<T: Real>(dy: &ArrayView2<T>, arg: &[usize], rows: usize) -> Array2<T> {
    let (groups, c) = dy.dim();
    let mut dx = Array2::zeros((rows, c));
    for g in 0..groups {
        for ch in 0..c {
            dx[[arg[g * c + ch], ch]] += dy[[g, ch]];
        }
    }
    dx
}

pub fn relu<T: Real>(x: &Array2<T>) -> Array2<T> {
    x.mapv(|v| if v > T::zero() { v } else { T::zero() })
}

/// Zero `dy` wherever the pre-activation was not positive.
pub fn relu_backward<T: Real>(dy: &mut Array2<T>, pre: &Array2<T>) {
    Zip::from(dy).and(pre).for_each(|d, &p| {
        if p <= T::zero() {
            *d = T::zero();
        }
    });
}

pub fn dot<T: Real>(a: &ArrayView1<T>, b: &ArrayView1<T>) -> T {
    a.dot(b)
}

/// Order-sensitive fingerprint of the piecewise-linear branch choices
/// (ReLU masks, pooling winners) taken by a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BranchSignature(pub u64);

impl BranchSignature {
    pub fn mix(&mut self, v: u64) {
        let mut h = self.0 ^ v.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 29)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        self.0 = h ^ (h >> 32);
    }

    pub fn mix_mask<T: Real>(&mut self, pre: &Array2<T>) {
        let mut word = 0u64;
        for (i, &v) in pre.iter().enumerate() {
            word = (word << 1) | (v > T::zero()) as u64;
            if i % 64 == 63 {
                self.mix(word);
                word = 0;
            }
        }
        self.mix(word);
    }

    pub fn mix_indices(&mut self, idx: &[usize]) {
        for &i in idx {
            self.mix(i as u64);
        }
    }
}
