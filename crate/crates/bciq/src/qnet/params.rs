use serde::{Deserialize, Serialize};

use crate::mathcore::Rng;

use super::{QNetError, QNetworkSpec};

/// Half-open slice of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub offset: usize,
    pub len: usize,
}

impl Segment {
    fn next(offset: &mut usize, len: usize) -> Segment {
        let s = Segment {
            offset: *offset,
            len,
        };
        *offset += len;
        s
    }
}

/// Offsets of every trainable tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamIndex {
    pub bn_gamma: Segment,
    pub bn_beta: Segment,
    pub conv1_w: Segment,
    pub conv1_b: Segment,
    pub prelu1_alpha: Segment,
    pub conv2_w: Segment,
    pub conv2_b: Segment,
    pub prelu2_alpha: Segment,
    pub lstm_wx: Segment,
    pub lstm_wh: Segment,
    pub lstm_b: Segment,
    pub dense1_w: Segment,
    pub dense1_b: Segment,
    pub dense2_w: Segment,
    pub dense2_b: Segment,
    pub head_w: Segment,
    pub head_b: Segment,
    pub total: usize,
}

impl ParamIndex {
    pub fn new(spec: &QNetworkSpec) -> ParamIndex {
        let c0 = spec.channels_in;
        let (f1, k1) = (spec.conv1_filters, spec.conv1_kernel);
        let (f2, k2) = (spec.conv2_filters, spec.conv2_kernel);
        let u = spec.lstm_units;
        let [d1, d2] = spec.dense_sizes;
        let a = spec.n_actions;

        let mut off = 0;
        let index = ParamIndex {
            bn_gamma: Segment::next(&mut off, c0),
            bn_beta: Segment::next(&mut off, c0),
            conv1_w: Segment::next(&mut off, f1 * c0 * k1),
            conv1_b: Segment::next(&mut off, f1),
            prelu1_alpha: Segment::next(&mut off, f1),
            conv2_w: Segment::next(&mut off, f2 * f1 * k2),
            conv2_b: Segment::next(&mut off, f2),
            prelu2_alpha: Segment::next(&mut off, f2),
            lstm_wx: Segment::next(&mut off, 4 * u * f2),
            lstm_wh: Segment::next(&mut off, 4 * u * u),
            lstm_b: Segment::next(&mut off, 4 * u),
            dense1_w: Segment::next(&mut off, d1 * u),
            dense1_b: Segment::next(&mut off, d1),
            dense2_w: Segment::next(&mut off, d2 * d1),
            dense2_b: Segment::next(&mut off, d2),
            head_w: Segment::next(&mut off, a * d2),
            head_b: Segment::next(&mut off, a),
            total: 0,
        };
        ParamIndex {
            total: off,
            ..index
        }
    }

    /// Kernel segments carrying the L1/L2 penalty: LSTM input and recurrent
    /// kernels plus the three dense kernels. Biases, batch-norm, and PReLU
    /// slopes are exempt.
    pub fn regularized(&self) -> [Segment; 5] {
        [
            self.lstm_wx,
            self.lstm_wh,
            self.dense1_w,
            self.dense2_w,
            self.head_w,
        ]
    }
}

/// All network state: the flat trainable vector plus batch-norm running
/// statistics (updated by committing a train-mode forward, not by the
/// optimizer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetworkParams {
    values: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
    index: ParamIndex,
}

impl QNetworkParams {
    /// Fresh parameters: He-uniform conv/dense kernels, Glorot-uniform LSTM
    /// kernels, forget-gate bias 1, PReLU slopes 0.25, identity batch-norm.
    pub fn init(spec: &QNetworkSpec, rng: &mut Rng) -> QNetworkParams {
        let index = ParamIndex::new(spec);
        let mut values = vec![0.0; index.total];

        for v in &mut values[seg_range(index.bn_gamma)] {
            *v = 1.0;
        }
        for v in &mut values[seg_range(index.prelu1_alpha)] {
            *v = 0.25;
        }
        for v in &mut values[seg_range(index.prelu2_alpha)] {
            *v = 0.25;
        }

        let he = |fan_in: usize| (6.0 / fan_in as f64).sqrt();
        let glorot = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();

        let mut fill = |seg: Segment, limit: f64, rng: &mut Rng| {
            for v in &mut values[seg_range(seg)] {
                *v = rng.uniform_in(-limit, limit);
            }
        };
        fill(
            index.conv1_w,
            he(spec.channels_in * spec.conv1_kernel),
            rng,
        );
        fill(
            index.conv2_w,
            he(spec.conv1_filters * spec.conv2_kernel),
            rng,
        );
        fill(
            index.lstm_wx,
            glorot(spec.conv2_filters, 4 * spec.lstm_units),
            rng,
        );
        fill(
            index.lstm_wh,
            glorot(spec.lstm_units, 4 * spec.lstm_units),
            rng,
        );
        fill(index.dense1_w, he(spec.lstm_units), rng);
        fill(index.dense2_w, he(spec.dense_sizes[0]), rng);
        fill(index.head_w, he(spec.dense_sizes[1]), rng);

        // Forget-gate bias block starts the cell remembering.
        let u = spec.lstm_units;
        for v in &mut values[index.lstm_b.offset..index.lstm_b.offset + u] {
            *v = 1.0;
        }

        QNetworkParams {
            values,
            running_mean: vec![0.0; spec.channels_in],
            running_var: vec![1.0; spec.channels_in],
            index,
        }
    }

    pub fn index(&self) -> &ParamIndex {
        &self.index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn seg(&self, s: Segment) -> &[f64] {
        &self.values[seg_range(s)]
    }

    pub fn running_mean(&self) -> &[f64] {
        &self.running_mean
    }

    pub fn running_var(&self) -> &[f64] {
        &self.running_var
    }

    /// Adopt the running statistics a train-mode forward produced.
    pub fn commit_running_stats(
        &mut self,
        mean: &[f64],
        var: &[f64],
    ) -> Result<(), QNetError> {
        if mean.len() != self.running_mean.len() || var.len() != self.running_var.len() {
            return Err(QNetError::InvalidParameter(format!(
                "running stats of {} channels committed to a {}-channel network",
                mean.len(),
                self.running_mean.len()
            )));
        }
        if var.iter().any(|&v| v < 0.0) {
            return Err(QNetError::InvalidParameter(
                "negative running variance".into(),
            ));
        }
        self.running_mean.copy_from_slice(mean);
        self.running_var.copy_from_slice(var);
        Ok(())
    }
}

pub(crate) fn seg_range(s: Segment) -> std::ops::Range<usize> {
    s.offset..s.offset + s.len
}
