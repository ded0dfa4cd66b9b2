//! Weighted least-squares fitting of local height functions.
//!
//! At a vertex `x0` with approximate normal `m`, neighbors are expressed in a
//! right-handed frame `Q = [t1 | t2 | m]` as `(u, v, f) = Q^T (x - x0)`, and
//! the Taylor coefficients `c_jk = d^(j+k) f / du^j dv^k (0)` are fitted from
//!
//! ```text
//! sum_{j+k <= d} c_jk u^j v^k / (j! k!) ~= f
//! ```
//!
//! Columns are ordered by total degree, and within a degree from `(p, 0)`
//! down to `(0, p)`. Rows are weighted, columns scaled to unit norm, and the
//! system is solved by QR. When the triangular factor is ill-conditioned the
//! highest-degree block of columns is dropped, reusing the factorization.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use thiserror::Error;

use crate::linalg::{cond1_upper_triangular, householder_qr};
use crate::mesh::{ring_neighborhood, select_fit_points, Mesh, RingLevel};

pub use crate::mesh::coefficient_count;

/// Largest supported fitting degree.
pub const MAX_DEGREE: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot build a local frame from a zero or non-finite normal")]
    DegenerateNormal,
    #[error("fit failed: only {active} positively weighted points (need at least 3)")]
    TooFewPoints { active: usize },
    #[error("fit failed: linear system is singular")]
    Singular,
}

/// Orthonormal right-handed frame `[t1 | t2 | m]` anchored at `origin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: Vector3<f64>,
    pub frame: Matrix3<f64>,
}

impl LocalFrame {
    pub fn identity() -> Self {
        LocalFrame { origin: Vector3::zeros(), frame: Matrix3::identity() }
    }

    /// The `w` axis.
    pub fn normal(&self) -> Vector3<f64> {
        self.frame.column(2).into()
    }

    /// `(u, v, f) = Q^T (x - x0)`.
    pub fn to_local(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.frame.tr_mul(&(x - self.origin))
    }

    pub fn to_global(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.frame * local + self.origin
    }

    /// Direction vectors ignore the origin.
    pub fn direction_to_local(&self, d: &Vector3<f64>) -> Vector3<f64> {
        self.frame.tr_mul(d)
    }

    pub fn direction_to_global(&self, d: &Vector3<f64>) -> Vector3<f64> {
        self.frame * d
    }
}

/// Frame with `w` along `approx_normal`.
///
/// `t1` is the normalized projection of the coordinate axis least aligned
/// with the normal, and `t2 = m x t1`.
pub fn build_local_frame(origin: Vector3<f64>, approx_normal: Vector3<f64>) -> Result<LocalFrame, FitError> {
    let norm = approx_normal.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(FitError::DegenerateNormal);
    }
    let m = approx_normal / norm;
    let axis = (0..3)
        .min_by(|&a, &b| m[a].abs().total_cmp(&m[b].abs()))
        .unwrap_or(0);
    let e = Vector3::ith(axis, 1.0);
    let t1 = (e - m * m[axis]).normalize();
    let t2 = m.cross(&t1);
    Ok(LocalFrame { origin, frame: Matrix3::from_columns(&[t1, t2, m]) })
}

pub fn to_local(frame: &LocalFrame, points: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    points.iter().map(|p| frame.to_local(p)).collect()
}

/// Fitting options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub degree: usize,
    /// Distance and normal-agreement weights; when off, every point facing
    /// the frame normal gets weight one.
    pub weighting: bool,
    pub iterative: bool,
    /// Point-count driven ring growth and condition-number degree reduction.
    pub conditioning: bool,
    pub cond_threshold: f64,
    pub ring_cap: RingLevel,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            degree: 2,
            weighting: true,
            iterative: false,
            conditioning: true,
            cond_threshold: 1e3,
            ring_cap: RingLevel::MAX,
        }
    }
}

impl FitConfig {
    pub fn with_degree(degree: usize) -> Self {
        FitConfig { degree, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if !(1..=MAX_DEGREE).contains(&self.degree) {
            return Err(FitError::InvalidConfig(format!("degree {} outside 1..={MAX_DEGREE}", self.degree)));
        }
        if !(self.cond_threshold > 1.0) {
            return Err(FitError::InvalidConfig(format!("cond_threshold {} must exceed 1", self.cond_threshold)));
        }
        Ok(())
    }
}

/// Position of `c_jk` in the coefficient vector.
pub fn coefficient_index(j: usize, k: usize) -> usize {
    let p = j + k;
    p * (p + 1) / 2 + k
}

/// `(j, k)` exponent pairs in column order.
pub fn monomial_exponents(degree: usize) -> Vec<(usize, usize)> {
    (0..=degree).flat_map(|p| (0..=p).map(move |k| (p - k, k))).collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Gradient and symmetric Hessian of a height function at the frame origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradHess {
    pub grad: Vector2<f64>,
    pub fuu: f64,
    pub fuv: f64,
    pub fvv: f64,
}

impl GradHess {
    pub fn new(grad: Vector2<f64>, hess: &Matrix2<f64>) -> Self {
        GradHess { grad, fuu: hess[(0, 0)], fuv: hess[(0, 1)], fvv: hess[(1, 1)] }
    }

    pub fn hess(&self) -> Matrix2<f64> {
        Matrix2::new(self.fuu, self.fuv, self.fuv, self.fvv)
    }
}

/// Fitted Taylor coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// `c_jk` for `j + k <= achieved_degree`, in column order.
    pub coeffs: Vec<f64>,
    pub requested_degree: usize,
    pub achieved_degree: usize,
    /// `None` when the system was assembled by the caller.
    pub ring_used: Option<RingLevel>,
    /// 1-norm condition estimate of the triangular factor that was solved.
    pub cond_estimate: f64,
    /// Number of positively weighted points.
    pub point_count: usize,
}

impl FitResult {
    pub fn coeff(&self, j: usize, k: usize) -> f64 {
        self.coeffs.get(coefficient_index(j, k)).copied().unwrap_or(0.0)
    }

    pub fn grad(&self) -> Vector2<f64> {
        Vector2::new(self.coeff(1, 0), self.coeff(0, 1))
    }

    /// Zero when the fit was reduced to degree one.
    pub fn hess(&self) -> Matrix2<f64> {
        let fuv = self.coeff(1, 1);
        Matrix2::new(self.coeff(2, 0), fuv, fuv, self.coeff(0, 2))
    }

    pub fn grad_hess(&self) -> GradHess {
        GradHess::new(self.grad(), &self.hess())
    }
}

/// Generalized Vandermonde matrix and right-hand side for local points
/// `(u, v, f)`.
pub fn assemble_vandermonde(points: &[Vector3<f64>], degree: usize) -> (DMatrix<f64>, DVector<f64>) {
    let exps = monomial_exponents(degree);
    let denom: Vec<f64> = exps.iter().map(|&(j, k)| factorial(j) * factorial(k)).collect();
    let v = DMatrix::from_fn(points.len(), exps.len(), |i, col| {
        let (j, k) = exps[col];
        let p = &points[i];
        p.x.powi(j as i32) * p.y.powi(k as i32) / denom[col]
    });
    let f = DVector::from_iterator(points.len(), points.iter().map(|p| p.z));
    (v, f)
}

/// Row weights `max(0, m_i . m_0) / (|u_i|^2 + eps)^(d/4)` with
/// `eps = sum |u_i|^2 / (100 m)`.
///
/// `normals` are the neighbors' unit normals in the local frame, so the
/// agreement with the frame normal is their third component.
pub fn compute_weights(points: &[Vector3<f64>], normals: &[Vector3<f64>], degree: usize) -> Vec<f64> {
    assert_eq!(points.len(), normals.len());
    let m = points.len();
    if m == 0 {
        return Vec::new();
    }
    let sq: Vec<f64> = points.iter().map(|p| p.x * p.x + p.y * p.y).collect();
    let eps = sq.iter().sum::<f64>() / (100.0 * m as f64);
    let exponent = degree as f64 / 4.0;
    sq.iter()
        .zip(normals)
        .map(|(&r2, n)| {
            let gamma = n.z.max(0.0);
            if gamma == 0.0 {
                0.0
            } else {
                gamma / (r2 + eps).powf(exponent)
            }
        })
        .collect()
}

/// Unit weights for points facing the frame normal, zero otherwise.
pub fn facing_mask(normals: &[Vector3<f64>]) -> Vec<f64> {
    normals.iter().map(|n| if n.z > 0.0 { 1.0 } else { 0.0 }).collect()
}

/// Column scaling `S = diag(1 / |a_j|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScaling {
    pub factors: Vec<f64>,
    /// Columns with zero norm; their factor is left at one.
    pub zero_columns: Vec<usize>,
}

pub fn column_scale(a: &DMatrix<f64>) -> ColumnScaling {
    let mut zero_columns = Vec::new();
    let factors = a
        .column_iter()
        .enumerate()
        .map(|(j, col)| {
            let norm = col.norm();
            if norm > 0.0 {
                1.0 / norm
            } else {
                zero_columns.push(j);
                1.0
            }
        })
        .collect();
    ColumnScaling { factors, zero_columns }
}

/// Pivots smaller than this fraction of the largest are treated as zero when
/// a degree-one system is rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Back substitution that skips negligible pivots (their unknowns are set to
/// zero). Only reached for degree-one systems that stay ill-conditioned.
fn solve_upper_basic(r: &DMatrix<f64>, n: usize, y: &[f64]) -> Vec<f64> {
    let max_pivot = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let tol = RANK_TOL * max_pivot;
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let diag = r[(i, i)];
        if diag.abs() <= tol {
            continue;
        }
        let mut acc = y[i];
        for j in (i + 1)..n {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / diag;
    }
    x
}

struct LsqSolution {
    coeffs: Vec<Vec<f64>>,
    degree: usize,
    cond: f64,
    active: usize,
}

fn max_degree_for(points: usize, degree: usize) -> usize {
    (1..=degree).rev().find(|&d| coefficient_count(d) <= points).unwrap_or(0)
}

/// Weighted, column-scaled QR solve with degree reduction, for several
/// right-hand sides sharing one matrix.
fn solve_weighted(
    v: &DMatrix<f64>,
    rhs: &[&DVector<f64>],
    weights: &[f64],
    degree: usize,
    conditioning: bool,
    cond_threshold: f64,
) -> Result<LsqSolution, FitError> {
    let rows: Vec<usize> = (0..v.nrows()).filter(|&i| weights[i] > 0.0).collect();
    let active = rows.len();
    if active < 3 {
        return Err(FitError::TooFewPoints { active });
    }
    let degree = max_degree_for(active, degree.min(max_degree_in(v.ncols())));
    let n = coefficient_count(degree);

    let a = DMatrix::from_fn(active, n, |i, j| weights[rows[i]] * v[(rows[i], j)]);
    let scaling = column_scale(&a);
    let mut scaled = a;
    for (j, s) in scaling.factors.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    let qr = householder_qr(&scaled);

    let mut achieved = degree;
    let mut cond;
    loop {
        let k = coefficient_count(achieved);
        cond = cond1_upper_triangular(qr.r.view((0, 0), (k, k)));
        if conditioning && cond >= cond_threshold && achieved > 1 {
            achieved -= 1;
        } else {
            break;
        }
    }
    let k = coefficient_count(achieved);
    let r = qr.r.view((0, 0), (k, k)).into_owned();
    let q = qr.q.columns(0, k);

    let mut coeffs = Vec::with_capacity(rhs.len());
    for f in rhs {
        let b = DVector::from_fn(active, |i, _| weights[rows[i]] * f[rows[i]]);
        let y = q.tr_mul(&b);
        // A finite estimate implies nonzero pivots; at degree one negligible
        // pivots are zeroed rather than failing the fit.
        if !cond.is_finite() && achieved > 1 {
            return Err(FitError::Singular);
        }
        let x = solve_upper_basic(&r, k, y.as_slice());
        let c: Vec<f64> = x.iter().zip(&scaling.factors).map(|(xi, s)| xi * s).collect();
        if c.iter().any(|ci| !ci.is_finite()) {
            return Err(FitError::Singular);
        }
        coeffs.push(c);
    }
    Ok(LsqSolution { coeffs, degree: achieved, cond, active })
}

/// Inverse of `coefficient_count` for a column count.
fn max_degree_in(columns: usize) -> usize {
    (0..=MAX_DEGREE).rev().find(|&d| coefficient_count(d) <= columns).unwrap_or(0)
}

/// Weighted least-squares solve of `V c ~= f` with the conditioning
/// safeguard.
///
/// Zero-weight rows are dropped. The degree is first lowered until the
/// number of active rows covers the unknowns; then, with conditioning on,
/// whole total-degree blocks are dropped while `cond1(R) >= threshold`.
pub fn safeguarded_solve(
    v: &DMatrix<f64>,
    f: &DVector<f64>,
    weights: &[f64],
    config: &FitConfig,
) -> Result<FitResult, FitError> {
    config.validate()?;
    let sol = solve_weighted(v, &[f], weights, config.degree, config.conditioning, config.cond_threshold)?;
    Ok(FitResult {
        coeffs: sol.coeffs.into_iter().next().unwrap_or_default(),
        requested_degree: config.degree,
        achieved_degree: sol.degree,
        ring_used: None,
        cond_estimate: sol.cond,
        point_count: sol.active,
    })
}

fn stencil(mesh: &Mesh, vertex: usize, config: &FitConfig) -> (Vec<usize>, RingLevel) {
    if config.conditioning {
        select_fit_points(mesh, vertex, config.degree, config.ring_cap)
    } else {
        let ring = RingLevel::for_degree(config.degree).min(config.ring_cap);
        (ring_neighborhood(mesh, vertex, ring), ring)
    }
}

fn row_weights(points: &[Vector3<f64>], normals: &[Vector3<f64>], config: &FitConfig) -> Vec<f64> {
    if config.weighting {
        compute_weights(points, normals, config.degree)
    } else {
        facing_mask(normals)
    }
}

/// Fits the height function at `vertex` in the frame of its approximate
/// normal.
pub fn fit_height(
    mesh: &Mesh,
    vertex: usize,
    approx_normals: &[Vector3<f64>],
    config: &FitConfig,
) -> Result<(FitResult, LocalFrame), FitError> {
    config.validate()?;
    let frame = build_local_frame(mesh.vertex(vertex), approx_normals[vertex])?;
    let (ids, ring) = stencil(mesh, vertex, config);
    let points: Vec<Vector3<f64>> = ids.iter().map(|&i| frame.to_local(&mesh.vertex(i))).collect();
    let normals: Vec<Vector3<f64>> = ids.iter().map(|&i| frame.direction_to_local(&approx_normals[i])).collect();
    let weights = row_weights(&points, &normals, config);
    let (v, f) = assemble_vandermonde(&points, config.degree);
    let mut fit = safeguarded_solve(&v, &f, &weights, config)?;
    fit.ring_used = Some(ring);
    Ok((fit, frame))
}

/// Second pass that fits neighbor normals, read as height-function
/// gradients `(-alpha/gamma, -beta/gamma)`, to obtain the Hessian.
///
/// Both gradient components are fitted with the same degree-`d` Vandermonde
/// matrix and weights; the mixed derivative is the average of the two
/// cross terms. The gradient is taken from `position_fit`.
pub fn iterative_fit(
    mesh: &Mesh,
    vertex: usize,
    frame: &LocalFrame,
    position_fit: &FitResult,
    fitted_normals: &[Vector3<f64>],
    config: &FitConfig,
) -> Result<GradHess, FitError> {
    config.validate()?;
    let ids = match position_fit.ring_used {
        Some(ring) => ring_neighborhood(mesh, vertex, ring),
        None => stencil(mesh, vertex, config).0,
    };
    let points: Vec<Vector3<f64>> = ids.iter().map(|&i| frame.to_local(&mesh.vertex(i))).collect();
    let normals: Vec<Vector3<f64>> =
        ids.iter().map(|&i| frame.direction_to_local(&fitted_normals[i])).collect();
    let weights = row_weights(&points, &normals, config);

    let slope = |component: usize| {
        DVector::from_iterator(
            normals.len(),
            normals.iter().map(|n| if n.z > 0.0 { -n[component] / n.z } else { 0.0 }),
        )
    };
    let (fu, fv) = (slope(0), slope(1));
    let (v, _) = assemble_vandermonde(&points, config.degree);
    let sol = solve_weighted(&v, &[&fu, &fv], &weights, config.degree, config.conditioning, config.cond_threshold)?;
    let (a, b) = (&sol.coeffs[0], &sol.coeffs[1]);
    let fuv = 0.5 * (a[coefficient_index(0, 1)] + b[coefficient_index(1, 0)]);
    Ok(GradHess {
        grad: position_fit.grad(),
        fuu: a[coefficient_index(1, 0)],
        fuv,
        fvv: b[coefficient_index(0, 1)],
    })
}
