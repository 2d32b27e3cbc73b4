use serde::{Deserialize, Serialize};

use super::MathError;

/// Dense real matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Build a matrix from row-major data. Fails if the length does not match
    /// or any entry is non-finite.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MathError> {
        if data.len() != rows * cols {
            return Err(MathError::DimensionMismatch(format!(
                "expected {} entries for {}x{}, got {}",
                rows * cols,
                rows,
                cols,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(MathError::InvalidData("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MathError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(MathError::DimensionMismatch("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// `self * other`, accumulating along rows for cache locality.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, MathError> {
        if self.cols != other.rows {
            return Err(MathError::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = out.row_mut(i);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    /// `self * v` for a column vector `v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, MathError> {
        if v.len() != self.cols {
            return Err(MathError::DimensionMismatch(format!(
                "{}x{} * vec[{}]",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }
}

/// Symmetric positive semi-definite matrix.
///
/// Construction symmetrizes the input after checking that the asymmetry is
/// within `1e-12 * max|entry|`; PSD-ness is a contract of the producing
/// operations (covariance, sums of covariances) rather than re-verified here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SpdMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self, MathError> {
        if data.len() != dim * dim {
            return Err(MathError::DimensionMismatch(format!(
                "expected {} entries for {dim}x{dim}, got {}",
                dim * dim,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(MathError::InvalidData("non-finite matrix entry".into()));
        }
        let max_abs = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * max_abs.max(1e-300);
        let mut m = Self { dim, data };
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = m.get(i, j);
                let b = m.get(j, i);
                if (a - b).abs() > tol {
                    return Err(MathError::InvalidData(format!(
                        "not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                let avg = 0.5 * (a + b);
                m.set(i, j, avg);
                m.set(j, i, avg);
            }
        }
        Ok(m)
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self, MathError> {
        if m.rows() != m.cols() {
            return Err(MathError::DimensionMismatch(format!(
                "{}x{} is not square",
                m.rows(),
                m.cols()
            )));
        }
        Self::new(m.rows(), m.data().to_vec())
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrix(&Matrix::identity(dim)).expect("identity is symmetric")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn as_matrix(&self) -> Matrix {
        Matrix {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }

    /// Elementwise sum of two matrices of equal dimension.
    pub fn add(&self, other: &SpdMatrix) -> Result<SpdMatrix, MathError> {
        if self.dim != other.dim {
            return Err(MathError::DimensionMismatch(format!(
                "{} vs {}",
                self.dim, other.dim
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(SpdMatrix {
            dim: self.dim,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> SpdMatrix {
        SpdMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Shrink toward the scaled identity: `(1-lambda) * A + lambda * (trace/dim) * I`.
    ///
    /// Keeps the trace unchanged and lifts the smallest eigenvalue, so
    /// rank-deficient covariance matrices stay invertible after whitening.
    pub fn shrink(&self, lambda: f64) -> SpdMatrix {
        let target = self.trace() / self.dim as f64;
        let mut out = self.scale(1.0 - lambda);
        for i in 0..self.dim {
            let v = out.get(i, i) + lambda * target;
            out.set(i, i, v);
        }
        out
    }

    /// `v' * A * v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            let ri: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
            acc += v[i] * ri;
        }
        acc
    }
}

/// Sample covariance of a channels-by-samples matrix.
///
/// Rows are mean-centered, then `C = Xc * Xc' / (samples - 1)`. With
/// `normalize_trace` the result is divided by its trace, removing per-trial
/// amplitude scale (standard practice before averaging trial covariances).
pub fn covariance(x: &Matrix, normalize_trace: bool) -> Result<SpdMatrix, MathError> {
    let channels = x.rows();
    let samples = x.cols();
    if channels < 1 {
        return Err(MathError::DegenerateInput("no channels".into()));
    }
    if samples < 2 {
        return Err(MathError::DegenerateInput(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    if !x.data().iter().all(|v| v.is_finite()) {
        return Err(MathError::InvalidData("non-finite signal entry".into()));
    }

    let mut centered = x.clone();
    for r in 0..channels {
        let row = centered.row_mut(r);
        let mean = row.iter().sum::<f64>() / samples as f64;
        for v in row.iter_mut() {
            *v -= mean;
        }
    }

    let inv = 1.0 / (samples as f64 - 1.0);
    let mut cov = vec![0.0; channels * channels];
    for i in 0..channels {
        for j in i..channels {
            let dot: f64 = centered
                .row(i)
                .iter()
                .zip(centered.row(j))
                .map(|(a, b)| a * b)
                .sum();
            let v = dot * inv;
            cov[i * channels + j] = v;
            cov[j * channels + i] = v;
        }
    }

    let mut c = SpdMatrix::new(channels, cov)?;
    if normalize_trace {
        let t = c.trace();
        if t <= 0.0 {
            return Err(MathError::DegenerateInput(
                "zero-variance input, cannot trace-normalize".into(),
            ));
        }
        c = c.scale(1.0 / t);
    }
    Ok(c)
}
