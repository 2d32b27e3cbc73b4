use serde::{Deserialize, Serialize};

use super::{Matrix, MathError, SpdMatrix};

const MAX_SWEEPS: usize = 100;
const OFF_NORM_TOL: f64 = 1e-12;

/// Eigenvalues sorted descending, with eigenvectors as the aligned columns of
/// `eigenvectors` (column `i` pairs with `eigenvalues[i]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.column(i)
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps rotate away every off-diagonal element in turn until the
/// off-diagonal Frobenius norm drops below `1e-12 * ||A||_F`. Eigenpairs are
/// returned sorted by descending eigenvalue with orthonormal eigenvectors.
pub fn jacobi_eigh(a: &SpdMatrix) -> Result<EigenDecomposition, MathError> {
    let n = a.dim();
    let mut m = a.as_matrix();
    let mut v = Matrix::identity(n);
    let norm = m.frobenius_norm();

    if n == 1 {
        return Ok(EigenDecomposition {
            eigenvalues: vec![m.get(0, 0)],
            eigenvectors: v,
        });
    }

    let target = OFF_NORM_TOL * norm.max(f64::MIN_POSITIVE);
    let mut converged = norm == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        if off_diagonal_norm(&m) < target {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&m) >= target {
        return Err(MathError::Convergence {
            sweeps: MAX_SWEEPS,
            off_norm: off_diagonal_norm(&m),
        });
    }

    // Sort descending, carrying columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, dst, v.get(r, src));
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    })
}

fn off_diagonal_norm(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = m.get(i, j);
                acc += v * v;
            }
        }
    }
    acc.sqrt()
}

/// One Jacobi rotation zeroing element (p, q), applied symmetrically to `m`
/// and accumulated into the eigenvector matrix `v`.
fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = m.get(p, q);
    if apq == 0.0 {
        return;
    }
    let app = m.get(p, p);
    let aqq = m.get(q, q);
    let theta = (aqq - app) / (2.0 * apq);
    // Numerically stable tangent of the rotation angle.
    let t = if theta.abs() > 1e150 {
        1.0 / (2.0 * theta)
    } else {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);

    let n = m.rows();
    m.set(p, p, app - t * apq);
    m.set(q, q, aqq + t * apq);
    m.set(p, q, 0.0);
    m.set(q, p, 0.0);
    for i in 0..n {
        if i != p && i != q {
            let aip = m.get(i, p);
            let aiq = m.get(i, q);
            let new_ip = aip - s * (aiq + tau * aip);
            let new_iq = aiq + s * (aip - tau * aiq);
            m.set(i, p, new_ip);
            m.set(p, i, new_ip);
            m.set(i, q, new_iq);
            m.set(q, i, new_iq);
        }
    }
    for i in 0..n {
        let vip = v.get(i, p);
        let viq = v.get(i, q);
        v.set(i, p, vip - s * (viq + tau * vip));
        v.set(i, q, viq + s * (vip - tau * viq));
    }
}

/// Generalized symmetric eigenproblem `A w = lambda B w` via whitening.
///
/// `B = U L U'` is eigendecomposed, `W = L^{-1/2} U'` whitens it, and the
/// ordinary problem `W A W'` is solved. Returned vectors are the rows of
/// `V' W`, which satisfy the generalized problem and are normalized so that
/// `w' B w = 1` per filter. Eigenvalues descend.
pub fn generalized_eigh(
    a: &SpdMatrix,
    b: &SpdMatrix,
) -> Result<EigenDecomposition, MathError> {
    let n = a.dim();
    if b.dim() != n {
        return Err(MathError::DimensionMismatch(format!(
            "A is {n}x{n}, B is {}x{}",
            b.dim(),
            b.dim()
        )));
    }
    let bd = jacobi_eigh(b)?;
    let max_ev = bd.eigenvalues[0].max(0.0);
    let min_ev = *bd.eigenvalues.last().unwrap();
    if min_ev <= 1e-12 * max_ev.max(f64::MIN_POSITIVE) {
        return Err(MathError::Singular(format!(
            "B eigenvalue range [{min_ev:.3e}, {max_ev:.3e}] cannot be whitened"
        )));
    }

    // W = L^{-1/2} U'  (rows scaled by inverse sqrt eigenvalues)
    let mut w = bd.eigenvectors.transpose();
    for (i, ev) in bd.eigenvalues.iter().enumerate() {
        let s = 1.0 / ev.sqrt();
        for v in w.row_mut(i) {
            *v *= s;
        }
    }

    let s = w.matmul(&a.as_matrix())?.matmul(&w.transpose())?;
    let sd = jacobi_eigh(&SpdMatrix::from_matrix(&symmetrize(&s))?)?;

    // Filters are rows of V' W; they satisfy A w = lambda B w with w' B w = 1.
    let filters = sd.eigenvectors.transpose().matmul(&w)?;
    Ok(EigenDecomposition {
        eigenvalues: sd.eigenvalues,
        eigenvectors: filters.transpose(),
    })
}

/// Average away round-off asymmetry from `W A W'`.
fn symmetrize(m: &Matrix) -> Matrix {
    let n = m.rows();
    let mut out = m.clone();
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (m.get(i, j) + m.get(j, i));
            out.set(i, j, avg);
            out.set(j, i, avg);
        }
    }
    out
}
