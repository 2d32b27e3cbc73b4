//! Whole-network forward and backward passes over a batch of feature maps.

use crate::mathcore::{Matrix, Rng};

use super::layers::{
    apply_channel_mask, avgpool_backward, avgpool_forward, batchnorm_backward,
    batchnorm_inference, batchnorm_train, conv1d_backward, conv1d_forward, dense_backward,
    dense_forward, global_max_pool, global_max_pool_backward, maxpool_backward, maxpool_forward,
    prelu_backward, prelu_forward, relu, relu_backward, softmax, softmax_backward,
    spatial_dropout_mask, BnCache,
};
use super::lstm::{lstm_backward, lstm_forward, LstmCache};
use super::params::{seg_range, QNetworkParams};
use super::{HeadKind, Mode, QNetError, QNetworkSpec};

pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPSILON: f64 = 1e-3;

/// Intermediates of one forward pass, consumed by [`backward`]. Only a
/// train-mode cache can be backpropagated.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    mode: Mode,
    bn: Option<BnCache>,
    bn_out: Vec<Matrix>,
    conv1_pre: Vec<Matrix>,
    act1: Vec<Matrix>,
    conv2_pre: Vec<Matrix>,
    mp_argmax: Vec<Vec<usize>>,
    mp_cols: usize,
    ap_in_cols: usize,
    dropout_masks: Option<Vec<Vec<f64>>>,
    lstm_in: Vec<Matrix>,
    lstm: Vec<LstmCache>,
    gmp_argmax: Vec<Vec<usize>>,
    gmp_out: Vec<Vec<f64>>,
    d1_pre: Vec<Vec<f64>>,
    d1_out: Vec<Vec<f64>>,
    d2_pre: Vec<Vec<f64>>,
    d2_out: Vec<Vec<f64>>,
    head_probs: Option<Vec<Vec<f64>>>,
}

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// The running-statistic update a train-mode pass proposes; commit it
    /// via [`QNetworkParams::commit_running_stats`]. The forward pass never
    /// mutates the parameters itself.
    pub fn running_stats_update(&self) -> Option<(&[f64], &[f64])> {
        self.bn
            .as_ref()
            .map(|b| (b.new_running_mean.as_slice(), b.new_running_var.as_slice()))
    }
}

fn ensure_finite_maps(layer: &str, maps: &[Matrix]) -> Result<(), QNetError> {
    for m in maps {
        if m.data().iter().any(|v| !v.is_finite()) {
            return Err(QNetError::NumericOverflow(layer.to_string()));
        }
    }
    Ok(())
}

fn ensure_finite_vecs(layer: &str, vecs: &[Vec<f64>]) -> Result<(), QNetError> {
    for v in vecs {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(QNetError::NumericOverflow(layer.to_string()));
        }
    }
    Ok(())
}

/// Run the network over a batch (one channel-major matrix per trial) and
/// return one Q-value row per trial plus the cache for backprop. Train mode
/// needs an rng for the dropout masks whenever the dropout rate is nonzero.
pub fn forward(
    params: &QNetworkParams,
    spec: &QNetworkSpec,
    batch: &[Matrix],
    mode: Mode,
    mut rng: Option<&mut Rng>,
) -> Result<(Vec<Vec<f64>>, ForwardCache), QNetError> {
    spec.validate()?;
    if batch.is_empty() {
        return Err(QNetError::InvalidParameter("empty batch".into()));
    }
    for (n, x) in batch.iter().enumerate() {
        if x.rows() != spec.channels_in || x.cols() != spec.time_in {
            return Err(QNetError::InvalidParameter(format!(
                "trial {n} is {}x{}, the network expects {}x{}",
                x.rows(),
                x.cols(),
                spec.channels_in,
                spec.time_in
            )));
        }
    }
    let dropout_active = mode == Mode::Train && spec.dropout_rate > 0.0;
    if dropout_active && rng.is_none() {
        return Err(QNetError::InvalidParameter(
            "train-mode forward needs an rng for dropout".into(),
        ));
    }

    let ix = *params.index();
    let gamma = params.seg(ix.bn_gamma);
    let beta = params.seg(ix.bn_beta);

    let (bn_out, bn_cache) = match mode {
        Mode::Train => {
            let (out, cache) = batchnorm_train(
                batch,
                gamma,
                beta,
                params.running_mean(),
                params.running_var(),
                BN_MOMENTUM,
                BN_EPSILON,
            );
            (out, Some(cache))
        }
        Mode::Inference => (
            batchnorm_inference(
                batch,
                gamma,
                beta,
                params.running_mean(),
                params.running_var(),
                BN_EPSILON,
            ),
            None,
        ),
    };
    ensure_finite_maps("batch_norm", &bn_out)?;

    let w1 = params.seg(ix.conv1_w);
    let b1 = params.seg(ix.conv1_b);
    let a1 = params.seg(ix.prelu1_alpha);
    let w2 = params.seg(ix.conv2_w);
    let b2 = params.seg(ix.conv2_b);
    let a2 = params.seg(ix.prelu2_alpha);

    let conv1_pre: Vec<Matrix> = bn_out
        .iter()
        .map(|x| conv1d_forward(x, w1, b1, spec.conv1_filters, spec.conv1_kernel))
        .collect();
    ensure_finite_maps("conv1", &conv1_pre)?;
    let act1: Vec<Matrix> = conv1_pre.iter().map(|p| prelu_forward(p, a1)).collect();

    let conv2_pre: Vec<Matrix> = act1
        .iter()
        .map(|x| conv1d_forward(x, w2, b2, spec.conv2_filters, spec.conv2_kernel))
        .collect();
    ensure_finite_maps("conv2", &conv2_pre)?;
    let act2: Vec<Matrix> = conv2_pre.iter().map(|p| prelu_forward(p, a2)).collect();

    let mut mp_argmax = Vec::with_capacity(batch.len());
    let mut ap_out = Vec::with_capacity(batch.len());
    let mut ap_in_cols = 0;
    for m in &act2 {
        let (pooled, argmax) = maxpool_forward(m, spec.max_pool);
        ap_in_cols = pooled.cols();
        mp_argmax.push(argmax);
        ap_out.push(avgpool_forward(&pooled, spec.avg_pool));
    }

    let (lstm_in, dropout_masks) = if dropout_active {
        let rng = rng.as_deref_mut().expect("checked above");
        let mut masks = Vec::with_capacity(batch.len());
        let mut dropped = Vec::with_capacity(batch.len());
        for m in &ap_out {
            let mask = spatial_dropout_mask(rng, spec.conv2_filters, spec.dropout_rate);
            dropped.push(apply_channel_mask(m, &mask));
            masks.push(mask);
        }
        (dropped, Some(masks))
    } else {
        (ap_out, None)
    };

    let wx = params.seg(ix.lstm_wx);
    let wh = params.seg(ix.lstm_wh);
    let bl = params.seg(ix.lstm_b);
    let mut lstm_caches = Vec::with_capacity(batch.len());
    let mut gmp_argmax = Vec::with_capacity(batch.len());
    let mut gmp_out = Vec::with_capacity(batch.len());
    for x in &lstm_in {
        let (h, cache) = lstm_forward(x, wx, wh, bl, spec.lstm_units);
        let (pooled, argmax) = global_max_pool(&h);
        lstm_caches.push(cache);
        gmp_argmax.push(argmax);
        gmp_out.push(pooled);
    }
    ensure_finite_vecs("lstm", &gmp_out)?;

    let dw1 = params.seg(ix.dense1_w);
    let db1 = params.seg(ix.dense1_b);
    let d1_pre: Vec<Vec<f64>> = gmp_out.iter().map(|x| dense_forward(x, dw1, db1)).collect();
    ensure_finite_vecs("dense1", &d1_pre)?;
    let d1_out: Vec<Vec<f64>> = d1_pre.iter().map(|p| relu(p)).collect();

    let dw2 = params.seg(ix.dense2_w);
    let db2 = params.seg(ix.dense2_b);
    let d2_pre: Vec<Vec<f64>> = d1_out.iter().map(|x| dense_forward(x, dw2, db2)).collect();
    ensure_finite_vecs("dense2", &d2_pre)?;
    let d2_out: Vec<Vec<f64>> = d2_pre.iter().map(|p| relu(p)).collect();

    let hw = params.seg(ix.head_w);
    let hb = params.seg(ix.head_b);
    let head_pre: Vec<Vec<f64>> = d2_out.iter().map(|x| dense_forward(x, hw, hb)).collect();
    ensure_finite_vecs("head", &head_pre)?;

    let (outputs, head_probs) = match spec.head {
        HeadKind::Linear => (head_pre, None),
        HeadKind::Softmax => {
            let probs: Vec<Vec<f64>> = head_pre.iter().map(|s| softmax(s)).collect();
            (probs.clone(), Some(probs))
        }
    };

    let cache = ForwardCache {
        mode,
        bn: bn_cache,
        bn_out,
        conv1_pre,
        act1,
        conv2_pre,
        mp_argmax,
        mp_cols: spec.time_in,
        ap_in_cols,
        dropout_masks,
        lstm_in,
        lstm: lstm_caches,
        gmp_argmax,
        gmp_out,
        d1_pre,
        d1_out,
        d2_pre,
        d2_out,
        head_probs,
    };
    Ok((outputs, cache))
}

/// Backpropagate dL/d(output) through a train-mode cache. Returns the full
/// gradient, aligned with the flat parameter vector, with the L1/L2 penalty
/// gradients already added on the LSTM and dense kernels.
pub fn backward(
    params: &QNetworkParams,
    spec: &QNetworkSpec,
    cache: &ForwardCache,
    output_grad: &[Vec<f64>],
) -> Result<Vec<f64>, QNetError> {
    if cache.mode != Mode::Train {
        return Err(QNetError::State(
            "backward needs a train-mode forward cache".into(),
        ));
    }
    let bn_cache = cache
        .bn
        .as_ref()
        .ok_or_else(|| QNetError::State("cache is missing batch-norm intermediates".into()))?;
    let n = cache.bn_out.len();
    if output_grad.len() != n {
        return Err(QNetError::InvalidParameter(format!(
            "{} gradient rows for a {n}-trial batch",
            output_grad.len()
        )));
    }
    if output_grad.iter().any(|g| g.len() != spec.n_actions) {
        return Err(QNetError::InvalidParameter(
            "gradient width differs from n_actions".into(),
        ));
    }

    let ix = *params.index();
    let mut grads = vec![0.0; ix.total];
    let mut d_bn_out = Vec::with_capacity(n);

    for s in 0..n {
        let g_head_pre = match spec.head {
            HeadKind::Linear => output_grad[s].clone(),
            HeadKind::Softmax => {
                let probs = cache.head_probs.as_ref().expect("softmax cache");
                softmax_backward(&probs[s], &output_grad[s])
            }
        };

        let (dw, db, g) = dense_backward(&cache.d2_out[s], params.seg(ix.head_w), &g_head_pre);
        add_into(&mut grads[seg_range(ix.head_w)], &dw);
        add_into(&mut grads[seg_range(ix.head_b)], &db);

        let g = relu_backward(&cache.d2_pre[s], &g);
        let (dw, db, g) = dense_backward(&cache.d1_out[s], params.seg(ix.dense2_w), &g);
        add_into(&mut grads[seg_range(ix.dense2_w)], &dw);
        add_into(&mut grads[seg_range(ix.dense2_b)], &db);

        let g = relu_backward(&cache.d1_pre[s], &g);
        let (dw, db, g) = dense_backward(&cache.gmp_out[s], params.seg(ix.dense1_w), &g);
        add_into(&mut grads[seg_range(ix.dense1_w)], &dw);
        add_into(&mut grads[seg_range(ix.dense1_b)], &db);

        let t2 = cache.lstm_in[s].cols();
        let g_h = global_max_pool_backward(&cache.gmp_argmax[s], t2, &g);

        let (dwx, dwh, dbl, g_lstm_in) = lstm_backward(
            &cache.lstm_in[s],
            &cache.lstm[s],
            params.seg(ix.lstm_wx),
            params.seg(ix.lstm_wh),
            &g_h,
        );
        add_into(&mut grads[seg_range(ix.lstm_wx)], &dwx);
        add_into(&mut grads[seg_range(ix.lstm_wh)], &dwh);
        add_into(&mut grads[seg_range(ix.lstm_b)], &dbl);

        let g_ap_out = match &cache.dropout_masks {
            Some(masks) => apply_channel_mask(&g_lstm_in, &masks[s]),
            None => g_lstm_in,
        };

        let g_mp_out = avgpool_backward(spec.avg_pool, cache.ap_in_cols, &g_ap_out);
        let g_act2 = maxpool_backward(&cache.mp_argmax[s], cache.mp_cols, &g_mp_out);

        let (dalpha, g_conv2_pre) =
            prelu_backward(&cache.conv2_pre[s], params.seg(ix.prelu2_alpha), &g_act2);
        add_into(&mut grads[seg_range(ix.prelu2_alpha)], &dalpha);
        let (dw, db, g_act1) = conv1d_backward(
            &cache.act1[s],
            params.seg(ix.conv2_w),
            &g_conv2_pre,
            spec.conv2_filters,
            spec.conv2_kernel,
        );
        add_into(&mut grads[seg_range(ix.conv2_w)], &dw);
        add_into(&mut grads[seg_range(ix.conv2_b)], &db);

        let (dalpha, g_conv1_pre) =
            prelu_backward(&cache.conv1_pre[s], params.seg(ix.prelu1_alpha), &g_act1);
        add_into(&mut grads[seg_range(ix.prelu1_alpha)], &dalpha);
        let (dw, db, g_bn) = conv1d_backward(
            &cache.bn_out[s],
            params.seg(ix.conv1_w),
            &g_conv1_pre,
            spec.conv1_filters,
            spec.conv1_kernel,
        );
        add_into(&mut grads[seg_range(ix.conv1_w)], &dw);
        add_into(&mut grads[seg_range(ix.conv1_b)], &db);
        d_bn_out.push(g_bn);
    }

    let (dgamma, dbeta, _) = batchnorm_backward(bn_cache, params.seg(ix.bn_gamma), &d_bn_out);
    add_into(&mut grads[seg_range(ix.bn_gamma)], &dgamma);
    add_into(&mut grads[seg_range(ix.bn_beta)], &dbeta);

    for seg in ix.regularized() {
        for i in seg_range(seg) {
            let w = params.values()[i];
            let sign = if w > 0.0 {
                1.0
            } else if w < 0.0 {
                -1.0
            } else {
                0.0
            };
            grads[i] += spec.l1 * sign + 2.0 * spec.l2 * w;
        }
    }

    Ok(grads)
}

/// The penalty the loss carries: sum of l1 * |w| + l2 * w^2 over the LSTM
/// and dense kernels.
pub fn regularization_loss(params: &QNetworkParams, spec: &QNetworkSpec) -> f64 {
    let mut total = 0.0;
    for seg in params.index().regularized() {
        for &w in params.seg(seg) {
            total += spec.l1 * w.abs() + spec.l2 * w * w;
        }
    }
    total
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qnet::params::QNetworkParams;
    use crate::qnet::QNetworkSpec;

    fn random_batch(rng: &mut Rng, spec: &QNetworkSpec, n: usize) -> Vec<Matrix> {
        (0..n)
            .map(|_| {
                let mut m = Matrix::zeros(spec.channels_in, spec.time_in);
                for r in 0..spec.channels_in {
                    for c in 0..spec.time_in {
                        m.set(r, c, rng.normal());
                    }
                }
                m
            })
            .collect()
    }

    #[test]
    fn every_parameter_gradient_matches_central_finite_differences() {
        let spec = QNetworkSpec::tiny_for_tests();
        let mut init_rng = Rng::new(101);
        let params = QNetworkParams::init(&spec, &mut init_rng);
        let batch = random_batch(&mut init_rng, &spec, 3);

        // Fixed projection makes the scalar loss sensitive to every output.
        let mut proj_rng = Rng::new(707);
        let proj: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..spec.n_actions).map(|_| proj_rng.normal()).collect())
            .collect();

        // Dropout masks must be identical across evaluations, so every
        // forward uses a freshly seeded rng.
        let loss = |p: &QNetworkParams| -> f64 {
            let mut mask_rng = Rng::new(31337);
            let (out, _) = forward(p, &spec, &batch, Mode::Train, Some(&mut mask_rng)).unwrap();
            let data: f64 = out
                .iter()
                .zip(&proj)
                .map(|(o, g)| o.iter().zip(g).map(|(a, b)| a * b).sum::<f64>())
                .sum();
            data + regularization_loss(p, &spec)
        };

        let mut mask_rng = Rng::new(31337);
        let (_, cache) = forward(&params, &spec, &batch, Mode::Train, Some(&mut mask_rng)).unwrap();
        let analytic = backward(&params, &spec, &cache, &proj).unwrap();
        assert_eq!(analytic.len(), params.values().len());

        let h = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..params.values().len() {
            let mut plus = params.clone();
            plus.values_mut()[i] += h;
            let mut minus = params.clone();
            minus.values_mut()[i] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-4);
            let rel = ((analytic[i] - numeric) / denom).abs();
            worst = worst.max(rel);
            assert!(
                rel < 1e-4,
                "param {i}: analytic {} vs numeric {numeric} (rel {rel:.2e})",
                analytic[i]
            );
        }
        // The whole check is only meaningful if the gradients are nontrivial.
        assert!(analytic.iter().any(|&g| g.abs() > 1e-3));
        assert!(worst < 1e-4);
    }

    #[test]
    fn inference_is_deterministic_and_ignores_dropout() {
        let spec = QNetworkSpec::tiny_for_tests();
        let mut rng = Rng::new(5);
        let params = QNetworkParams::init(&spec, &mut rng);
        let batch = random_batch(&mut rng, &spec, 4);

        let (a, cache) = forward(&params, &spec, &batch, Mode::Inference, None).unwrap();
        let (b, _) = forward(&params, &spec, &batch, Mode::Inference, None).unwrap();
        assert_eq!(a, b, "inference must be bit-for-bit reproducible");
        assert!(cache.running_stats_update().is_none());

        // Train mode with dropout produces a different activation path.
        let mut mask_rng = Rng::new(99);
        let (c, cache) = forward(&params, &spec, &batch, Mode::Train, Some(&mut mask_rng)).unwrap();
        assert!(cache.running_stats_update().is_some());
        assert_ne!(a, c);
    }

    #[test]
    fn train_mode_with_dropout_requires_an_rng() {
        let spec = QNetworkSpec::tiny_for_tests();
        let mut rng = Rng::new(6);
        let params = QNetworkParams::init(&spec, &mut rng);
        let batch = random_batch(&mut rng, &spec, 2);
        let err = forward(&params, &spec, &batch, Mode::Train, None).unwrap_err();
        assert!(matches!(err, QNetError::InvalidParameter(_)));

        let mut no_dropout = spec.clone();
        no_dropout.dropout_rate = 0.0;
        assert!(forward(&params, &no_dropout, &batch, Mode::Train, None).is_ok());
    }

    #[test]
    fn zero_parameters_produce_zero_q_values() {
        let spec = QNetworkSpec::tiny_for_tests();
        let mut rng = Rng::new(8);
        let mut params = QNetworkParams::init(&spec, &mut rng);
        params.values_mut().iter_mut().for_each(|v| *v = 0.0);
        let batch = random_batch(&mut rng, &spec, 2);
        let (out, _) = forward(&params, &spec, &batch, Mode::Inference, None).unwrap();
        assert!(out.iter().flatten().all(|&q| q == 0.0));
    }

    #[test]
    fn softmax_head_rows_sum_to_one() {
        let mut spec = QNetworkSpec::tiny_for_tests();
        spec.head = HeadKind::Softmax;
        let mut rng = Rng::new(9);
        let params = QNetworkParams::init(&spec, &mut rng);
        let batch = random_batch(&mut rng, &spec, 3);
        let (out, _) = forward(&params, &spec, &batch, Mode::Inference, None).unwrap();
        for row in &out {
            let total: f64 = row.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn zero_output_gradient_leaves_only_the_penalty_terms() {
        let spec = QNetworkSpec::tiny_for_tests();
        let mut rng = Rng::new(10);
        let params = QNetworkParams::init(&spec, &mut rng);
        let batch = random_batch(&mut rng, &spec, 2);
        let mut mask_rng = Rng::new(1);
        let (_, cache) = forward(&params, &spec, &batch, Mode::Train, Some(&mut mask_rng)).unwrap();
        let zeros = vec![vec![0.0; spec.n_actions]; 2];
        let grads = backward(&params, &spec, &cache, &zeros).unwrap();

        let ix = *params.index();
        let regularized: Vec<std::ops::Range<usize>> =
            ix.regularized().iter().map(|&s| seg_range(s)).collect();
        for (i, &g) in grads.iter().enumerate() {
            if let Some(_) = regularized.iter().find(|r| r.contains(&i)) {
                let w = params.values()[i];
                let expect = spec.l1 * w.signum() + 2.0 * spec.l2 * w;
                assert!(
                    (g - expect).abs() < 1e-15,
                    "kernel grad {i} should be the pure penalty"
                );
            } else {
                assert_eq!(g, 0.0, "non-kernel grad {i} should vanish");
            }
        }
    }

    #[test]
    fn backward_rejects_an_inference_cache() {
        let spec = QNetworkSpec::tiny_for_tests();
        let mut rng = Rng::new(12);
        let params = QNetworkParams::init(&spec, &mut rng);
        let batch = random_batch(&mut rng, &spec, 2);
        let (_, cache) = forward(&params, &spec, &batch, Mode::Inference, None).unwrap();
        let g = vec![vec![1.0; spec.n_actions]; 2];
        assert!(matches!(
            backward(&params, &spec, &cache, &g),
            Err(QNetError::State(_))
        ));
    }

    #[test]
    fn overflow_reports_the_offending_layer() {
        let spec = QNetworkSpec::tiny_for_tests();
        let mut rng = Rng::new(13);
        let mut params = QNetworkParams::init(&spec, &mut rng);
        let ix = *params.index();
        for i in seg_range(ix.conv1_w) {
            params.values_mut()[i] = 1e200;
        }
        for i in seg_range(ix.conv2_w) {
            params.values_mut()[i] = 1e200;
        }
        let batch = random_batch(&mut rng, &spec, 2);
        let err = forward(&params, &spec, &batch, Mode::Inference, None).unwrap_err();
        match err {
            QNetError::NumericOverflow(layer) => assert_eq!(layer, "conv2"),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn wrong_input_shape_is_named_in_the_error() {
        let spec = QNetworkSpec::tiny_for_tests();
        let mut rng = Rng::new(14);
        let params = QNetworkParams::init(&spec, &mut rng);
        let batch = vec![Matrix::zeros(spec.channels_in, spec.time_in + 1)];
        let err = forward(&params, &spec, &batch, Mode::Inference, None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("trial 0"), "unhelpful message: {msg}");
    }

    #[test]
    fn committing_running_stats_changes_inference() {
        let spec = QNetworkSpec::tiny_for_tests();
        let mut rng = Rng::new(15);
        let mut params = QNetworkParams::init(&spec, &mut rng);
        let mut batch = random_batch(&mut rng, &spec, 8);
        // Shift the inputs so the batch statistics are far from the
        // initialized running stats (mean 0, var 1).
        for m in &mut batch {
            for r in 0..spec.channels_in {
                for c in 0..spec.time_in {
                    m.set(r, c, m.get(r, c) * 3.0 + 5.0);
                }
            }
        }

        let (before, _) = forward(&params, &spec, &batch, Mode::Inference, None).unwrap();
        let mut mask_rng = Rng::new(2);
        let (_, cache) = forward(&params, &spec, &batch, Mode::Train, Some(&mut mask_rng)).unwrap();
        let (mean, var) = cache.running_stats_update().unwrap();
        let (mean, var) = (mean.to_vec(), var.to_vec());
        params.commit_running_stats(&mean, &var).unwrap();
        let (after, _) = forward(&params, &spec, &batch, Mode::Inference, None).unwrap();
        assert_ne!(before, after);
        assert!(params.running_mean().iter().all(|&m| m > 0.0));
    }

    #[test]
    fn regularization_loss_is_the_documented_sum() {
        let spec = QNetworkSpec::tiny_for_tests();
        let mut rng = Rng::new(16);
        let params = QNetworkParams::init(&spec, &mut rng);
        let mut expect = 0.0;
        for seg in params.index().regularized() {
            for &w in params.seg(seg) {
                expect += 0.01 * w.abs() + 0.01 * w * w;
            }
        }
        assert!((regularization_loss(&params, &spec) - expect).abs() < 1e-15);
        assert!(expect > 0.0);

        // Biases, batch norm, and PReLU slopes contribute nothing.
        let mut only_exempt = params.clone();
        for seg in only_exempt.index().regularized() {
            let r = seg_range(seg);
            only_exempt.values_mut()[r].iter_mut().for_each(|v| *v = 0.0);
        }
        assert_eq!(regularization_loss(&only_exempt, &spec), 0.0);
    }
}
