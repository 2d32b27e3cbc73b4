//! Per-layer forwards and backwards. Feature maps are channel-major
//! matrices (one row per channel, one column per time step); dense layers
//! work on plain vectors.

use crate::mathcore::{Matrix, Rng};

/// Batch-norm intermediates a backward pass needs, plus the running-stat
/// update a train-mode forward proposes.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub x_hat: Vec<Matrix>,
    pub inv_std: Vec<f64>,
    pub new_running_mean: Vec<f64>,
    pub new_running_var: Vec<f64>,
}

/// Train-mode batch norm: per-channel statistics pooled over every sample
/// and time step in the batch, biased variance, and a momentum update of
/// the running estimates.
pub fn batchnorm_train(
    batch: &[Matrix],
    gamma: &[f64],
    beta: &[f64],
    running_mean: &[f64],
    running_var: &[f64],
    momentum: f64,
    eps: f64,
) -> (Vec<Matrix>, BnCache) {
    let channels = gamma.len();
    let time = batch[0].cols();
    let count = (batch.len() * time) as f64;

    let mut mean = vec![0.0; channels];
    let mut var = vec![0.0; channels];
    for x in batch {
        for c in 0..channels {
            for &v in x.row(c) {
                mean[c] += v;
            }
        }
    }
    for m in &mut mean {
        *m /= count;
    }
    for x in batch {
        for c in 0..channels {
            for &v in x.row(c) {
                let d = v - mean[c];
                var[c] += d * d;
            }
        }
    }
    for v in &mut var {
        *v /= count;
    }

    let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();

    let mut x_hat = Vec::with_capacity(batch.len());
    let mut out = Vec::with_capacity(batch.len());
    for x in batch {
        let mut hat = Matrix::zeros(channels, time);
        let mut y = Matrix::zeros(channels, time);
        for c in 0..channels {
            for t in 0..time {
                let h = (x.get(c, t) - mean[c]) * inv_std[c];
                hat.set(c, t, h);
                y.set(c, t, gamma[c] * h + beta[c]);
            }
        }
        x_hat.push(hat);
        out.push(y);
    }

    let new_running_mean: Vec<f64> = running_mean
        .iter()
        .zip(&mean)
        .map(|(&r, &b)| momentum * r + (1.0 - momentum) * b)
        .collect();
    let new_running_var: Vec<f64> = running_var
        .iter()
        .zip(&var)
        .map(|(&r, &b)| momentum * r + (1.0 - momentum) * b)
        .collect();

    (
        out,
        BnCache {
            x_hat,
            inv_std,
            new_running_mean,
            new_running_var,
        },
    )
}

/// Inference batch norm: normalize with the stored running statistics.
pub fn batchnorm_inference(
    batch: &[Matrix],
    gamma: &[f64],
    beta: &[f64],
    running_mean: &[f64],
    running_var: &[f64],
    eps: f64,
) -> Vec<Matrix> {
    let channels = gamma.len();
    batch
        .iter()
        .map(|x| {
            let mut y = Matrix::zeros(channels, x.cols());
            for c in 0..channels {
                let inv = 1.0 / (running_var[c] + eps).sqrt();
                for t in 0..x.cols() {
                    y.set(c, t, gamma[c] * (x.get(c, t) - running_mean[c]) * inv + beta[c]);
                }
            }
            y
        })
        .collect()
}

/// Backward through train-mode batch norm. Returns (dgamma, dbeta, dx).
pub fn batchnorm_backward(
    cache: &BnCache,
    gamma: &[f64],
    grads: &[Matrix],
) -> (Vec<f64>, Vec<f64>, Vec<Matrix>) {
    let channels = gamma.len();
    let time = grads[0].cols();
    let count = (grads.len() * time) as f64;

    let mut dgamma = vec![0.0; channels];
    let mut dbeta = vec![0.0; channels];
    let mut sum_dxhat = vec![0.0; channels];
    let mut sum_dxhat_xhat = vec![0.0; channels];
    for (g, hat) in grads.iter().zip(&cache.x_hat) {
        for c in 0..channels {
            for t in 0..time {
                let gv = g.get(c, t);
                let hv = hat.get(c, t);
                dgamma[c] += gv * hv;
                dbeta[c] += gv;
                let dxh = gv * gamma[c];
                sum_dxhat[c] += dxh;
                sum_dxhat_xhat[c] += dxh * hv;
            }
        }
    }

    let dx = grads
        .iter()
        .zip(&cache.x_hat)
        .map(|(g, hat)| {
            let mut d = Matrix::zeros(channels, time);
            for c in 0..channels {
                for t in 0..time {
                    let dxh = g.get(c, t) * gamma[c];
                    let v = cache.inv_std[c]
                        * (dxh - (sum_dxhat[c] + hat.get(c, t) * sum_dxhat_xhat[c]) / count);
                    d.set(c, t, v);
                }
            }
            d
        })
        .collect();

    (dgamma, dbeta, dx)
}

/// Dot product kept in four running sums so the multiply-adds pipeline
/// instead of serializing on one accumulator.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut sums = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        sums[0] += xa[0] * xb[0];
        sums[1] += xa[1] * xb[1];
        sums[2] += xa[2] * xb[2];
        sums[3] += xa[3] * xb[3];
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (sums[0] + sums[1]) + (sums[2] + sums[3]) + tail
}

/// Output-column range that keeps tap `k` inside the input, as
/// (first output column, one past the last, first input column).
#[inline]
fn tap_span(k: usize, pad_left: usize, time: usize) -> (usize, usize, usize) {
    let t_lo = pad_left.saturating_sub(k);
    let t_hi = (time + pad_left).saturating_sub(k).min(time);
    (t_lo, t_hi, t_lo + k - pad_left)
}

/// 1-D convolution with same padding: output keeps the input length.
/// Even kernels pad one extra sample on the right. The inner loops run
/// over contiguous time slices, one per kernel tap, which is what keeps
/// the training loop fast.
pub fn conv1d_forward(x: &Matrix, w: &[f64], b: &[f64], filters: usize, kernel: usize) -> Matrix {
    let (c_in, time) = (x.rows(), x.cols());
    let pad_left = (kernel - 1) / 2;
    let mut out = Matrix::zeros(filters, time);
    for f in 0..filters {
        out.row_mut(f).fill(b[f]);
        for c in 0..c_in {
            let base = (f * c_in + c) * kernel;
            let x_row = x.row(c);
            let out_row = out.row_mut(f);
            for k in 0..kernel {
                let (t_lo, t_hi, s_lo) = tap_span(k, pad_left, time);
                if t_lo >= t_hi {
                    continue;
                }
                let wv = w[base + k];
                let xs = &x_row[s_lo..s_lo + (t_hi - t_lo)];
                for (o, &xv) in out_row[t_lo..t_hi].iter_mut().zip(xs) {
                    *o += wv * xv;
                }
            }
        }
    }
    out
}

/// Backward through same-padded convolution. Returns (dw, db, dx).
pub fn conv1d_backward(
    x: &Matrix,
    w: &[f64],
    g: &Matrix,
    filters: usize,
    kernel: usize,
) -> (Vec<f64>, Vec<f64>, Matrix) {
    let (c_in, time) = (x.rows(), x.cols());
    let pad_left = (kernel - 1) / 2;
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; filters];
    let mut dx = Matrix::zeros(c_in, time);
    for f in 0..filters {
        let g_row = g.row(f);
        db[f] = g_row.iter().sum();
        for c in 0..c_in {
            let base = (f * c_in + c) * kernel;
            let x_row = x.row(c);
            for k in 0..kernel {
                let (t_lo, t_hi, s_lo) = tap_span(k, pad_left, time);
                if t_lo >= t_hi {
                    continue;
                }
                let xs = &x_row[s_lo..s_lo + (t_hi - t_lo)];
                dw[base + k] += dot(&g_row[t_lo..t_hi], xs);
            }
        }
    }
    for c in 0..c_in {
        let dx_row = dx.row_mut(c);
        for f in 0..filters {
            let base = (f * c_in + c) * kernel;
            let g_row = g.row(f);
            for k in 0..kernel {
                let (t_lo, t_hi, s_lo) = tap_span(k, pad_left, time);
                if t_lo >= t_hi {
                    continue;
                }
                let wv = w[base + k];
                let gs = &g_row[t_lo..t_hi];
                for (d, &gv) in dx_row[s_lo..s_lo + (t_hi - t_lo)].iter_mut().zip(gs) {
                    *d += wv * gv;
                }
            }
        }
    }
    (dw, db, dx)
}

/// PReLU with one learned slope per channel: x if x >= 0, alpha[c] * x below.
pub fn prelu_forward(pre: &Matrix, alpha: &[f64]) -> Matrix {
    let mut out = Matrix::zeros(pre.rows(), pre.cols());
    for c in 0..pre.rows() {
        for t in 0..pre.cols() {
            let v = pre.get(c, t);
            out.set(c, t, if v >= 0.0 { v } else { alpha[c] * v });
        }
    }
    out
}

/// Backward through PReLU. Returns (dalpha, dx).
pub fn prelu_backward(pre: &Matrix, alpha: &[f64], g: &Matrix) -> (Vec<f64>, Matrix) {
    let mut dalpha = vec![0.0; alpha.len()];
    let mut dx = Matrix::zeros(pre.rows(), pre.cols());
    for c in 0..pre.rows() {
        for t in 0..pre.cols() {
            let v = pre.get(c, t);
            let gv = g.get(c, t);
            if v >= 0.0 {
                dx.set(c, t, gv);
            } else {
                dalpha[c] += gv * v;
                dx.set(c, t, gv * alpha[c]);
            }
        }
    }
    (dalpha, dx)
}

/// Non-overlapping max pooling along time; a trailing partial window is
/// dropped. Ties resolve to the earliest time step. Returns the pooled map
/// and, per output cell, the input column the maximum came from.
pub fn maxpool_forward(x: &Matrix, pool: usize) -> (Matrix, Vec<usize>) {
    let t_out = x.cols() / pool;
    let mut out = Matrix::zeros(x.rows(), t_out);
    let mut argmax = vec![0usize; x.rows() * t_out];
    for c in 0..x.rows() {
        for j in 0..t_out {
            let mut best = x.get(c, j * pool);
            let mut best_t = j * pool;
            for k in 1..pool {
                let v = x.get(c, j * pool + k);
                if v > best {
                    best = v;
                    best_t = j * pool + k;
                }
            }
            out.set(c, j, best);
            argmax[c * t_out + j] = best_t;
        }
    }
    (out, argmax)
}

pub fn maxpool_backward(argmax: &[usize], in_cols: usize, g: &Matrix) -> Matrix {
    let mut dx = Matrix::zeros(g.rows(), in_cols);
    for c in 0..g.rows() {
        for j in 0..g.cols() {
            let t = argmax[c * g.cols() + j];
            dx.set(c, t, dx.get(c, t) + g.get(c, j));
        }
    }
    dx
}

/// Non-overlapping average pooling along time; trailing remainder dropped.
pub fn avgpool_forward(x: &Matrix, pool: usize) -> Matrix {
    let t_out = x.cols() / pool;
    let mut out = Matrix::zeros(x.rows(), t_out);
    for c in 0..x.rows() {
        for j in 0..t_out {
            let mut acc = 0.0;
            for k in 0..pool {
                acc += x.get(c, j * pool + k);
            }
            out.set(c, j, acc / pool as f64);
        }
    }
    out
}

pub fn avgpool_backward(pool: usize, in_cols: usize, g: &Matrix) -> Matrix {
    let mut dx = Matrix::zeros(g.rows(), in_cols);
    for c in 0..g.rows() {
        for j in 0..g.cols() {
            let share = g.get(c, j) / pool as f64;
            for k in 0..pool {
                dx.set(c, j * pool + k, share);
            }
        }
    }
    dx
}

/// Spatial dropout mask: whole channels are zeroed together and survivors
/// are rescaled so the expected activation is unchanged.
pub fn spatial_dropout_mask(rng: &mut Rng, channels: usize, rate: f64) -> Vec<f64> {
    let scale = 1.0 / (1.0 - rate);
    (0..channels)
        .map(|_| if rng.uniform() < rate { 0.0 } else { scale })
        .collect()
}

pub fn apply_channel_mask(x: &Matrix, mask: &[f64]) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for c in 0..x.rows() {
        for t in 0..x.cols() {
            out.set(c, t, x.get(c, t) * mask[c]);
        }
    }
    out
}

/// Max over time per channel. Ties resolve to the earliest time step.
pub fn global_max_pool(x: &Matrix) -> (Vec<f64>, Vec<usize>) {
    let mut out = vec![0.0; x.rows()];
    let mut argmax = vec![0usize; x.rows()];
    for c in 0..x.rows() {
        let row = x.row(c);
        let mut best = row[0];
        let mut best_t = 0;
        for (t, &v) in row.iter().enumerate().skip(1) {
            if v > best {
                best = v;
                best_t = t;
            }
        }
        out[c] = best;
        argmax[c] = best_t;
    }
    (out, argmax)
}

pub fn global_max_pool_backward(argmax: &[usize], in_cols: usize, g: &[f64]) -> Matrix {
    let mut dx = Matrix::zeros(g.len(), in_cols);
    for (c, (&t, &gv)) in argmax.iter().zip(g).enumerate() {
        dx.set(c, t, gv);
    }
    dx
}

/// Fully connected layer on a vector: y = W x + b, W row-major (out x in).
pub fn dense_forward(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let out_dim = b.len();
    let in_dim = x.len();
    let mut y = b.to_vec();
    for o in 0..out_dim {
        y[o] += dot(&w[o * in_dim..(o + 1) * in_dim], x);
    }
    y
}

/// Backward through a dense layer. Returns (dw, db, dx).
pub fn dense_backward(x: &[f64], w: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let in_dim = x.len();
    let mut dw = vec![0.0; w.len()];
    let mut dx = vec![0.0; in_dim];
    for (o, &gv) in g.iter().enumerate() {
        for i in 0..in_dim {
            dw[o * in_dim + i] += gv * x[i];
            dx[i] += gv * w[o * in_dim + i];
        }
    }
    (dw, g.to_vec(), dx)
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

pub fn relu_backward(pre: &[f64], g: &[f64]) -> Vec<f64> {
    pre.iter()
        .zip(g)
        .map(|(&p, &gv)| if p > 0.0 { gv } else { 0.0 })
        .collect()
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / total).collect()
}

/// Backward through softmax given dL/dp: ds_j = p_j (g_j - sum_k g_k p_k).
pub fn softmax_backward(probs: &[f64], g: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(g).map(|(&p, &gv)| p * gv).sum();
    probs.iter().zip(g).map(|(&p, &gv)| p * (gv - dot)).collect()
}
