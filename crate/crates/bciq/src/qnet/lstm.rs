//! LSTM over a full sequence. The cell follows the classic gate equations:
//!
//! ```text
//! f_t = sigmoid(W_f [h_{t-1}, x_t] + b_f)
//! i_t = sigmoid(W_i [h_{t-1}, x_t] + b_i)
//! c~_t = tanh(W_c [h_{t-1}, x_t] + b_c)
//! C_t = f_t * C_{t-1} + i_t * c~_t
//! o_t = sigmoid(W_o [h_{t-1}, x_t] + b_o)
//! h_t = o_t * tanh(C_t)
//! ```
//!
//! Weights are stored with the input and recurrent halves split: `wx` is
//! (4U x F) and `wh` is (4U x U), both row-major, with the gate blocks
//! stacked in the order f, i, c~ (candidate), o. State starts at zero.

use super::layers::dot;
use crate::mathcore::Matrix;

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Everything the backward pass needs, one column per time step.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub f: Matrix,
    pub i: Matrix,
    pub g: Matrix,
    pub o: Matrix,
    pub cell: Matrix,
    pub tanh_cell: Matrix,
    pub h: Matrix,
}

/// Run the cell over all time steps of `x` (features x time). Returns the
/// full hidden-state sequence (units x time) and the cache.
pub fn lstm_forward(x: &Matrix, wx: &[f64], wh: &[f64], b: &[f64], units: usize) -> (Matrix, LstmCache) {
    let features = x.rows();
    let time = x.cols();
    let u = units;

    let mut cache = LstmCache {
        f: Matrix::zeros(u, time),
        i: Matrix::zeros(u, time),
        g: Matrix::zeros(u, time),
        o: Matrix::zeros(u, time),
        cell: Matrix::zeros(u, time),
        tanh_cell: Matrix::zeros(u, time),
        h: Matrix::zeros(u, time),
    };

    let mut h_prev = vec![0.0; u];
    let mut c_prev = vec![0.0; u];
    let mut xt = vec![0.0; features];
    let mut z = vec![0.0; 4 * u];

    for t in 0..time {
        for (k, v) in xt.iter_mut().enumerate() {
            *v = x.get(k, t);
        }
        // z = wx * x_t + wh * h_{t-1} + b, all four gate blocks at once.
        z.copy_from_slice(b);
        for (r, zr) in z.iter_mut().enumerate() {
            *zr += dot(&wx[r * features..(r + 1) * features], &xt);
            *zr += dot(&wh[r * u..(r + 1) * u], &h_prev);
        }

        for j in 0..u {
            let f = sigmoid(z[j]);
            let i = sigmoid(z[u + j]);
            let g = z[2 * u + j].tanh();
            let o = sigmoid(z[3 * u + j]);
            let c = f * c_prev[j] + i * g;
            let tc = c.tanh();
            let h = o * tc;
            cache.f.set(j, t, f);
            cache.i.set(j, t, i);
            cache.g.set(j, t, g);
            cache.o.set(j, t, o);
            cache.cell.set(j, t, c);
            cache.tanh_cell.set(j, t, tc);
            cache.h.set(j, t, h);
            c_prev[j] = c;
            h_prev[j] = h;
        }
    }

    (cache.h.clone(), cache)
}

/// Backpropagation through time. `dh` carries dL/dh_t for every step.
/// Returns (dwx, dwh, db, dx).
pub fn lstm_backward(
    x: &Matrix,
    cache: &LstmCache,
    wx: &[f64],
    wh: &[f64],
    dh: &Matrix,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Matrix) {
    let features = x.rows();
    let time = x.cols();
    let u = cache.h.rows();

    let mut dwx = vec![0.0; wx.len()];
    let mut dwh = vec![0.0; wh.len()];
    let mut db = vec![0.0; 4 * u];
    let mut dx = Matrix::zeros(features, time);

    let mut dh_next = vec![0.0; u];
    let mut dc_next = vec![0.0; u];
    let mut dz = vec![0.0; 4 * u];
    let mut xt = vec![0.0; features];
    let mut dxt = vec![0.0; features];
    let mut h_prev = vec![0.0; u];

    for t in (0..time).rev() {
        for (k, v) in xt.iter_mut().enumerate() {
            *v = x.get(k, t);
        }
        for (k, v) in h_prev.iter_mut().enumerate() {
            *v = if t == 0 { 0.0 } else { cache.h.get(k, t - 1) };
        }
        for j in 0..u {
            let f = cache.f.get(j, t);
            let i = cache.i.get(j, t);
            let g = cache.g.get(j, t);
            let o = cache.o.get(j, t);
            let tc = cache.tanh_cell.get(j, t);
            let c_prev = if t == 0 { 0.0 } else { cache.cell.get(j, t - 1) };

            let dht = dh.get(j, t) + dh_next[j];
            let dc = dht * o * (1.0 - tc * tc) + dc_next[j];

            dz[j] = dc * c_prev * f * (1.0 - f);
            dz[u + j] = dc * g * i * (1.0 - i);
            dz[2 * u + j] = dc * i * (1.0 - g * g);
            dz[3 * u + j] = dht * tc * o * (1.0 - o);

            dc_next[j] = dc * f;
        }

        dh_next.iter_mut().for_each(|v| *v = 0.0);
        dxt.iter_mut().for_each(|v| *v = 0.0);
        for (r, &dzr) in dz.iter().enumerate() {
            db[r] += dzr;
            if dzr == 0.0 {
                continue;
            }
            let wx_base = r * features;
            for (k, (dw, dxv)) in dwx[wx_base..wx_base + features]
                .iter_mut()
                .zip(&mut dxt)
                .enumerate()
            {
                *dw += dzr * xt[k];
                *dxv += dzr * wx[wx_base + k];
            }
            let wh_base = r * u;
            if t > 0 {
                for (dw, hv) in dwh[wh_base..wh_base + u].iter_mut().zip(&h_prev) {
                    *dw += dzr * hv;
                }
            }
            for (dh_acc, w) in dh_next.iter_mut().zip(&wh[wh_base..wh_base + u]) {
                *dh_acc += dzr * w;
            }
        }
        for (k, &v) in dxt.iter().enumerate() {
            dx.set(k, t, v);
        }
    }

    (dwx, dwh, db, dx)
}
