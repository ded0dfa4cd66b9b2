//! Small dense linear algebra used by the local fits.
//!
//! Everything here operates on matrices with at most a few dozen rows and
//! columns (the largest fit is 28 unknowns), so the routines favour exactness
//! and determinism over blocking or clever estimators.

use nalgebra::{DMatrix, DMatrixView, DVector, Matrix2, Matrix3x2, Vector2};
use thiserror::Error;

/// Gradients with a norm below this are treated as exactly zero when
/// choosing the rotation angle of the Jacobian SVD.
pub const ZERO_GRADIENT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("singular triangular system: zero pivot in row {row}")]
    Singular { row: usize },
}

/// Reduced QR factors of an `m x n` matrix with `m >= n`.
#[derive(Debug, Clone)]
pub struct QrFactors {
    /// `m x n`, orthonormal columns.
    pub q: DMatrix<f64>,
    /// `n x n`, upper triangular with a nonnegative diagonal.
    pub r: DMatrix<f64>,
}

/// Householder QR with the convention `R[k][k] >= 0`.
///
/// Columns that are already zero below the diagonal produce a zero pivot and
/// are left alone; rank deficiency is detected by the caller through
/// [`cond1_upper_triangular`].
pub fn householder_qr(a: &DMatrix<f64>) -> QrFactors {
    let (m, n) = a.shape();
    assert!(m >= n, "householder_qr needs m >= n (got {m} x {n})");

    let mut work = a.clone();
    // Householder vectors, stored with their squared norms. `None` marks an
    // identity reflection.
    let mut reflectors: Vec<Option<(Vec<f64>, f64)>> = Vec::with_capacity(n);

    for k in 0..n {
        let mut v: Vec<f64> = (k..m).map(|i| work[(i, k)]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            reflectors.push(None);
            continue;
        }
        for j in k..n {
            let dot: f64 = v.iter().enumerate().map(|(t, vi)| vi * work[(k + t, j)]).sum();
            let scale = 2.0 * dot / vtv;
            for (t, vi) in v.iter().enumerate() {
                work[(k + t, j)] -= scale * vi;
            }
        }
        // Entries below the pivot are zero in exact arithmetic.
        work[(k, k)] = alpha;
        for i in (k + 1)..m {
            work[(i, k)] = 0.0;
        }
        reflectors.push(Some((v, vtv)));
    }

    // Accumulate Q = H_0 H_1 ... H_{n-1} applied to the first n columns of I.
    let mut q = DMatrix::<f64>::zeros(m, n);
    for j in 0..n {
        q[(j, j)] = 1.0;
    }
    for k in (0..n).rev() {
        if let Some((v, vtv)) = &reflectors[k] {
            for j in 0..n {
                let dot: f64 = v.iter().enumerate().map(|(t, vi)| vi * q[(k + t, j)]).sum();
                let scale = 2.0 * dot / vtv;
                for (t, vi) in v.iter().enumerate() {
                    q[(k + t, j)] -= scale * vi;
                }
            }
        }
    }

    let mut r = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            r[(i, j)] = work[(i, j)];
        }
    }
    for k in 0..n {
        if r[(k, k)] < 0.0 {
            for j in k..n {
                r[(k, j)] = -r[(k, j)];
            }
            for i in 0..m {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }

    QrFactors { q, r }
}

/// Back substitution for `R x = y`.
pub fn solve_upper(r: DMatrixView<'_, f64>, y: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    let n = r.nrows();
    debug_assert_eq!(r.ncols(), n);
    debug_assert_eq!(y.len(), n);
    let mut x = DVector::<f64>::zeros(n);
    for i in (0..n).rev() {
        let diag = r[(i, i)];
        if diag == 0.0 {
            return Err(LinalgError::Singular { row: i });
        }
        let mut acc = y[i];
        for j in (i + 1)..n {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / diag;
    }
    Ok(x)
}

/// `||R||_1 * ||R^-1||_1` for an upper triangular `R`.
///
/// The inverse norm is computed exactly, one triangular solve per column.
/// Returns `f64::INFINITY` when a diagonal entry is exactly zero.
pub fn cond1_upper_triangular(r: DMatrixView<'_, f64>) -> f64 {
    let n = r.nrows();
    if (0..n).any(|i| r[(i, i)] == 0.0) {
        return f64::INFINITY;
    }
    let norm_r = (0..n)
        .map(|j| (0..=j).map(|i| r[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);

    let mut norm_inv = 0.0_f64;
    let mut col = vec![0.0; n];
    for j in 0..n {
        // Column j of R^-1 is zero below row j.
        col.iter_mut().for_each(|c| *c = 0.0);
        for i in (0..=j).rev() {
            let mut acc = if i == j { 1.0 } else { 0.0 };
            for t in (i + 1)..=j {
                acc -= r[(i, t)] * col[t];
            }
            col[i] = acc / r[(i, i)];
        }
        norm_inv = norm_inv.max(col[..=j].iter().map(|c| c.abs()).sum());
    }
    let cond = norm_r * norm_inv;
    if cond.is_finite() {
        cond.max(1.0)
    } else {
        f64::INFINITY
    }
}

/// Eigendecomposition of a symmetric 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen2 {
    /// Larger eigenvalue.
    pub lambda1: f64,
    /// Smaller eigenvalue.
    pub lambda2: f64,
    /// Orthogonal matrix whose columns are the eigenvectors of `lambda1`
    /// and `lambda2`, in that order.
    pub vectors: Matrix2<f64>,
}

/// Closed-form eigendecomposition of a symmetric 2x2 matrix.
///
/// Only the upper off-diagonal entry is read. The larger-magnitude
/// eigenvalue is formed without cancellation and the other one recovered
/// from the determinant.
pub fn eig_sym2(m: &Matrix2<f64>) -> SymEigen2 {
    let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    let half_trace = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let disc = half_diff.hypot(b);

    let big = if half_trace >= 0.0 { half_trace + disc } else { half_trace - disc };
    let small = if big != 0.0 { (a * d - b * b) / big } else { 0.0 };
    let (lambda1, lambda2) = if big >= small { (big, small) } else { (small, big) };

    // Rotation angle of the eigenvector belonging to the larger eigenvalue.
    let theta = 0.5 * (2.0 * b).atan2(a - d);
    let (s, c) = theta.sin_cos();
    let vectors = Matrix2::new(c, -s, s, c);
    SymEigen2 { lambda1, lambda2, vectors }
}

/// Explicit SVD `J = U diag(ell, 1) V^T` of the height-function Jacobian
/// `J = [I_2 | grad]^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianSvd {
    pub u: Matrix3x2<f64>,
    /// Singular values `(ell, 1)`.
    pub sigma: Vector2<f64>,
    pub v: Matrix2<f64>,
    pub c: f64,
    pub s: f64,
    pub theta: f64,
    /// Area element `sqrt(1 + |grad|^2)`; also the 2-norm condition number of `J`.
    pub ell: f64,
    pub grad_norm: f64,
}

impl JacobianSvd {
    /// `U diag(sigma) V^T`.
    pub fn reconstruct(&self) -> Matrix3x2<f64> {
        self.u * Matrix2::from_diagonal(&self.sigma) * self.v.transpose()
    }

    /// Ratio of the largest to the smallest singular value.
    pub fn condition_number(&self) -> f64 {
        self.sigma[0] / self.sigma[1]
    }
}

/// The Jacobian `[I_2 | grad]^T` as a 3x2 matrix.
pub fn height_jacobian(grad: &Vector2<f64>) -> Matrix3x2<f64> {
    Matrix3x2::new(1.0, 0.0, 0.0, 1.0, grad[0], grad[1])
}

pub fn jacobian_svd(grad: &Vector2<f64>) -> JacobianSvd {
    let grad_norm = grad.norm();
    let ell = (1.0 + grad.norm_squared()).sqrt();
    let (c, s, theta) = if grad_norm < ZERO_GRADIENT_TOL {
        (1.0, 0.0, 0.0)
    } else {
        (grad[0] / grad_norm, grad[1] / grad_norm, grad[1].atan2(grad[0]))
    };
    let u = Matrix3x2::new(c / ell, -s, s / ell, c, grad_norm / ell, 0.0);
    let v = Matrix2::new(c, -s, s, c);
    JacobianSvd { u, sigma: Vector2::new(ell, 1.0), v, c, s, theta, ell, grad_norm }
}
