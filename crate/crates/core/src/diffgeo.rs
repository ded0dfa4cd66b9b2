//! Surface quantities from the gradient and Hessian of a height function.
//!
//! For `f(u, v)` in a frame `Q`, with `l = sqrt(1 + |grad f|^2)`:
//!
//! * normal (local) `(-f_u, -f_v, 1) / l`;
//! * shape operator in an orthonormal tangent basis, built from the explicit
//!   SVD of the Jacobian, so it is symmetric by construction;
//! * curvature tensor `C = P^T H P / l` with `P` the pseudo-inverse of the
//!   Jacobian, and `C_g = Q C Q^T`.
//!
//! Curvatures are signed with respect to the frame's `+w` side: a surface
//! bending away from the normal (a sphere seen from outside) has negative
//! curvature.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x2, Vector2, Vector3};
use thiserror::Error;

use crate::fitting::{GradHess, LocalFrame};
use crate::linalg::{eig_sym2, height_jacobian, jacobian_svd};

/// Smallest admissible `w` component of the normal in a target frame.
pub const FRAME_GAMMA_MIN: f64 = 1e-10;

/// Relative gap below which principal directions are considered arbitrary.
pub const UMBILIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffGeoError {
    #[error("target frame is nearly tangent to the surface (normal w-component {gamma:e})")]
    FrameDegenerate { gamma: f64 },
}

fn symmetrize2(m: &Matrix2<f64>) -> Matrix2<f64> {
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    Matrix2::new(m[(0, 0)], off, off, m[(1, 1)])
}

fn symmetrize3(m: &Matrix3<f64>) -> Matrix3<f64> {
    0.5 * (m + m.transpose())
}

/// First and second fundamental matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrices {
    pub first: Matrix2<f64>,
    pub second: Matrix2<f64>,
    /// `det(first) = 1 + |grad|^2`.
    pub g: f64,
    pub ell: f64,
}

pub fn fundamental_matrices(grad: &Vector2<f64>, hess: &Matrix2<f64>) -> FundamentalMatrices {
    let j = height_jacobian(grad);
    let g = 1.0 + grad.norm_squared();
    let ell = g.sqrt();
    FundamentalMatrices { first: j.transpose() * j, second: hess / ell, g, ell }
}

/// Unit normal in local and global coordinates.
pub fn normal_from_gradient(grad: &Vector2<f64>, q: &Matrix3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let ell = (1.0 + grad.norm_squared()).sqrt();
    let local = Vector3::new(-grad[0], -grad[1], 1.0) / ell;
    (local, q * local)
}

/// Shape operator in the orthonormal tangent basis `U` (local coordinates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeOperator2 {
    pub w: Matrix2<f64>,
    pub basis: Matrix3x2<f64>,
    /// `|W12 - W21|` before symmetrization.
    pub asymmetry: f64,
}

pub fn symmetric_shape_operator(grad: &Vector2<f64>, hess: &Matrix2<f64>) -> ShapeOperator2 {
    let svd = jacobian_svd(grad);
    let (c, s, ell) = (svd.c, svd.s, svd.ell);
    let m = Matrix2::new(c / ell, s / ell, -s, c);
    let raw = m * symmetrize2(hess) * m.transpose() / ell;
    ShapeOperator2 { w: symmetrize2(&raw), basis: svd.u, asymmetry: (raw[(0, 1)] - raw[(1, 0)]).abs() }
}

/// Principal curvatures (signed, `kappa1 >= kappa2`) and directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Principal {
    pub kappa1: f64,
    pub kappa2: f64,
    pub dir1: Vector3<f64>,
    pub dir2: Vector3<f64>,
    /// The curvatures nearly coincide, so the directions carry no information.
    pub umbilic: bool,
}

fn largest_component_positive(v: Vector3<f64>) -> bool {
    let i = v.iamax();
    v[i] >= 0.0
}

/// Orients `dir1` so its largest-magnitude component is positive and sets
/// `dir2 = normal x dir1`, making `(dir1, dir2, normal)` right-handed.
fn orient(dir1: Vector3<f64>, normal: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let dir1 = if largest_component_positive(dir1) { dir1 } else { -dir1 };
    (dir1, normal.cross(&dir1))
}

fn is_umbilic(kappa1: f64, kappa2: f64) -> bool {
    (kappa1 - kappa2).abs() < UMBILIC_TOL * kappa1.abs().max(1.0)
}

/// Eigen-decomposition of the shape operator; directions in local
/// coordinates.
pub fn principal(shape: &ShapeOperator2) -> Principal {
    let eig = eig_sym2(&shape.w);
    let dirs = shape.basis * eig.vectors;
    let normal = shape.basis.column(0).cross(&shape.basis.column(1));
    let (dir1, dir2) = orient(dirs.column(0).into(), &normal);
    Principal { kappa1: eig.lambda1, kappa2: eig.lambda2, dir1, dir2, umbilic: is_umbilic(eig.lambda1, eig.lambda2) }
}

/// Pseudo-inverse `(J^T J)^{-1} J^T` of the Jacobian, in closed form.
pub fn jacobian_pseudo_inverse(grad: &Vector2<f64>) -> Matrix2x3<f64> {
    let (fu, fv) = (grad[0], grad[1]);
    let g = 1.0 + fu * fu + fv * fv;
    Matrix2x3::new(1.0 + fv * fv, -fu * fv, fu, -fu * fv, 1.0 + fu * fu, fv) / g
}

/// Curvature tensor in local and global coordinates.
pub fn curvature_tensor(grad: &Vector2<f64>, hess: &Matrix2<f64>, q: &Matrix3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    let ell = (1.0 + grad.norm_squared()).sqrt();
    let p = jacobian_pseudo_inverse(grad);
    let local = symmetrize3(&(p.transpose() * symmetrize2(hess) * p / ell));
    let global = symmetrize3(&(q * local * q.transpose()));
    (local, global)
}

/// Mean and Gaussian curvature.
pub fn mean_gaussian(grad: &Vector2<f64>, hess: &Matrix2<f64>) -> (f64, f64) {
    let g = 1.0 + grad.norm_squared();
    let ell = g.sqrt();
    let h = symmetrize2(hess);
    let kappa_h = h.trace() / (2.0 * ell) - grad.dot(&(h * grad)) / (2.0 * ell * g);
    let kappa_g = h.determinant() / (g * g);
    (kappa_h, kappa_g)
}

/// Re-expresses the gradient and Hessian of a height function in another
/// frame anchored at the same surface point.
pub fn transfer_frame(
    grad: &Vector2<f64>,
    hess: &Matrix2<f64>,
    q_from: &Matrix3<f64>,
    q_to: &Matrix3<f64>,
) -> Result<GradHess, DiffGeoError> {
    let (_, normal) = normal_from_gradient(grad, q_from);
    let (_, tensor) = curvature_tensor(grad, hess, q_from);
    let abc = q_to.tr_mul(&normal);
    let gamma = abc.z;
    if !(gamma > FRAME_GAMMA_MIN) {
        return Err(DiffGeoError::FrameDegenerate { gamma });
    }
    let new_grad = Vector2::new(-abc.x / gamma, -abc.y / gamma);
    let jac = q_to * height_jacobian(&new_grad);
    let new_hess = symmetrize2(&(jac.transpose() * tensor * jac / gamma));
    Ok(GradHess::new(new_grad, &new_hess))
}

/// The classical, generally nonsymmetric Weingarten matrix `G^{-1} B`.
pub fn classical_weingarten(grad: &Vector2<f64>, hess: &Matrix2<f64>) -> Matrix2<f64> {
    let fm = fundamental_matrices(grad, hess);
    let inv = fm.first.try_inverse().expect("first fundamental matrix has determinant >= 1");
    inv * fm.second
}

/// Every differential quantity at one vertex, in global coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexDiff {
    pub normal: Vector3<f64>,
    pub kappa1: f64,
    pub kappa2: f64,
    pub dir1: Vector3<f64>,
    pub dir2: Vector3<f64>,
    pub kappa_h: f64,
    pub kappa_g: f64,
    pub tensor: Matrix3<f64>,
    pub umbilic: bool,
}

impl VertexDiff {
    pub fn from_grad_hess(gh: &GradHess, frame: &LocalFrame) -> Self {
        let hess = gh.hess();
        let (_, normal) = normal_from_gradient(&gh.grad, &frame.frame);
        let pr = principal(&symmetric_shape_operator(&gh.grad, &hess));
        let (dir1, dir2) = orient(frame.frame * pr.dir1, &normal);
        let (kappa_h, kappa_g) = mean_gaussian(&gh.grad, &hess);
        let (_, tensor) = curvature_tensor(&gh.grad, &hess, &frame.frame);
        VertexDiff {
            normal,
            kappa1: pr.kappa1,
            kappa2: pr.kappa2,
            dir1,
            dir2,
            kappa_h,
            kappa_g,
            tensor,
            umbilic: pr.umbilic,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    fn close2(a: &Matrix2<f64>, b: &Matrix2<f64>, tol: f64) -> bool {
        (a - b).abs().max() <= tol
    }

    fn rel_err3(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn normal_examples() {
        let (l, g) = normal_from_gradient(&Vector2::zeros(), &Matrix3::identity());
        assert_eq!((l, g), (Vector3::z(), Vector3::z()));
        let (l, _) = normal_from_gradient(&Vector2::new(3.0, 4.0), &Matrix3::identity());
        assert!((l - Vector3::new(-3.0, -4.0, 1.0) / 26f64.sqrt()).norm() < 1e-15);
    }

    #[test]
    fn fundamental_matrices_example() {
        let grad = Vector2::new(0.3, -1.2);
        let hess = Matrix2::new(1.0, 0.2, 0.2, -0.5);
        let fm = fundamental_matrices(&grad, &hess);
        assert!((fm.first.determinant() - fm.g).abs() < 1e-13);
        assert!(close2(&fm.second, &(hess / fm.ell), 1e-13));
    }

    #[test]
    fn shape_operator_at_zero_gradient_is_hessian() {
        let h = Matrix2::new(2.0, 0.0, 0.0, 1.0);
        assert_eq!(symmetric_shape_operator(&Vector2::zeros(), &h).w, h);
    }

    /// Upper unit hemisphere `z = sqrt(1 - u^2 - v^2)` at `u = 0.6, v = 0`.
    fn sphere_point() -> (Vector2<f64>, Matrix2<f64>) {
        (Vector2::new(-0.75, 0.0), Matrix2::new(-1.953125, 0.0, 0.0, -1.25))
    }

    #[test]
    fn sphere_patch_is_umbilic() {
        let (grad, hess) = sphere_point();
        let pr = principal(&symmetric_shape_operator(&grad, &hess));
        assert!((pr.kappa1 + 1.0).abs() < 1e-14 && (pr.kappa2 + 1.0).abs() < 1e-14);
        assert!(pr.umbilic);
        let (kh, kg) = mean_gaussian(&grad, &hess);
        assert!((kh + 1.0).abs() < 1e-14);
        assert!((kg - 1.0).abs() < 1e-14);
    }

    #[test]
    fn principal_examples() {
        let shape = ShapeOperator2 {
            w: Matrix2::new(2.0, 0.0, 0.0, 1.0),
            basis: Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0),
            asymmetry: 0.0,
        };
        let pr = principal(&shape);
        assert_eq!((pr.kappa1, pr.kappa2), (2.0, 1.0));
        assert_eq!(pr.dir1, Vector3::x());
        assert_eq!(pr.dir2, Vector3::y());
        assert!(!pr.umbilic);

        let pr = principal(&ShapeOperator2 { w: Matrix2::identity(), ..shape });
        assert_eq!((pr.kappa1, pr.kappa2), (1.0, 1.0));
        assert!(pr.dir1.dot(&pr.dir2).abs() < 1e-15);
        assert!(pr.umbilic);
    }

    #[test]
    fn mean_gaussian_examples() {
        assert_eq!(mean_gaussian(&Vector2::zeros(), &Matrix2::new(2.0, 0.0, 0.0, 0.0)), (1.0, 0.0));
        assert_eq!(mean_gaussian(&Vector2::zeros(), &Matrix2::identity()), (1.0, 1.0));
    }

    #[test]
    fn tensor_at_zero_gradient() {
        let (c, cg) = curvature_tensor(&Vector2::zeros(), &Matrix2::identity(), &Matrix3::identity());
        assert_eq!(c, Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0)));
        assert_eq!(cg, c);
    }

    #[test]
    fn transfer_identity_and_to_normal_frame() {
        let grad = Vector2::new(0.4, -0.3);
        let hess = Matrix2::new(1.5, -0.2, -0.2, 0.7);
        let q = Rotation3::from_euler_angles(0.3, -0.2, 1.1).into_inner();
        let same = transfer_frame(&grad, &hess, &q, &q).unwrap();
        assert!((same.grad - grad).norm() < 1e-14);
        assert!(close2(&same.hess(), &hess, 1e-13));

        let (_, n) = normal_from_gradient(&grad, &q);
        let target = crate::fitting::build_local_frame(Vector3::zeros(), n).unwrap().frame;
        let at_normal = transfer_frame(&grad, &hess, &q, &target).unwrap();
        assert!(at_normal.grad.norm() < 1e-12);
    }

    #[test]
    fn transfer_rejects_tangent_frame() {
        let q_to = Rotation3::from_euler_angles(std::f64::consts::FRAC_PI_2, 0.0, 0.0).into_inner();
        let err = transfer_frame(&Vector2::zeros(), &Matrix2::identity(), &Matrix3::identity(), &q_to);
        assert!(matches!(err, Err(DiffGeoError::FrameDegenerate { .. })));
    }

    #[test]
    fn classical_weingarten_examples() {
        let h = Matrix2::new(1.0, 0.5, 0.5, -2.0);
        assert!(close2(&classical_weingarten(&Vector2::zeros(), &h), &h, 0.0));
        let grad = Vector2::new(3.0, 4.0);
        let w = classical_weingarten(&grad, &h);
        let ws = symmetric_shape_operator(&grad, &h).w;
        assert!((w.trace() - ws.trace()).abs() < 1e-10);
    }

    #[test]
    fn classical_weingarten_amplifies_perturbations() {
        // A relative 1e-8 perturbation of H moves the classical matrix's
        // eigenvalues by the same amount as the symmetric form's, but its
        // entries (and so any entrywise-computed eigenvectors) move by up
        // to l^2 = 26 times more. Recorded, not asserted tightly.
        let grad = Vector2::new(3.0, 4.0);
        let h = Matrix2::new(1.0, 0.3, 0.3, 0.8);
        let dh = Matrix2::new(1e-8, -1e-8, -1e-8, 0.5e-8);
        let w_gap = (classical_weingarten(&grad, &(h + dh)) - classical_weingarten(&grad, &h)).norm();
        let s_gap = (symmetric_shape_operator(&grad, &(h + dh)).w - symmetric_shape_operator(&grad, &h).w).norm();
        assert!(w_gap.is_finite() && s_gap.is_finite());
    }

    fn symmetric(a: f64, b: f64, d: f64) -> Matrix2<f64> {
        Matrix2::new(a, b, b, d)
    }

    fn rotation(a: f64, b: f64, c: f64) -> Matrix3<f64> {
        Rotation3::from_euler_angles(a, b, c).into_inner()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn normal_is_unit_and_rotates(
            fu in -20.0f64..20.0, fv in -20.0f64..20.0,
            a in -3.2f64..3.2, b in -1.5f64..1.5, c in -3.2f64..3.2,
        ) {
            let q = rotation(a, b, c);
            let (l, g) = normal_from_gradient(&Vector2::new(fu, fv), &q);
            prop_assert!((g.norm() - 1.0).abs() < 1e-14);
            prop_assert!((q * l - g).norm() < 1e-14);
        }

        #[test]
        fn invariants_for_random_jets(
            fu in -5.0f64..5.0, fv in -5.0f64..5.0,
            ha in -10.0f64..10.0, hb in -10.0f64..10.0, hd in -10.0f64..10.0,
            a in -3.2f64..3.2, b in -1.5f64..1.5, c in -3.2f64..3.2,
        ) {
            let grad = Vector2::new(fu, fv);
            let hess = symmetric(ha, hb, hd);
            let q = rotation(a, b, c);
            let shape = symmetric_shape_operator(&grad, &hess);
            prop_assert!(shape.asymmetry <= 1e-12 * hess.norm().max(1.0));
            let basis_err = (shape.basis.transpose() * shape.basis - Matrix2::identity()).abs().max();
            prop_assert!(basis_err < 1e-12);

            let pr = principal(&shape);
            let (kh, kg) = mean_gaussian(&grad, &hess);
            let scale = pr.kappa1.abs().max(pr.kappa2.abs()).max(1e-3);
            let disc = (kh * kh - kg).max(0.0).sqrt();
            prop_assert!((pr.kappa1 - (kh + disc)).abs() <= 1e-10 * scale.max(1.0));
            prop_assert!((pr.kappa2 - (kh - disc)).abs() <= 1e-10 * scale.max(1.0));
            prop_assert!((kh - shape.w.trace() / 2.0).abs() <= 1e-11 * scale);
            prop_assert!((kg - shape.w.determinant()).abs() <= 1e-11 * scale * scale);
            let gap = 0.5 * (pr.kappa1 - pr.kappa2);
            prop_assert!((kh * kh - kg - gap * gap).abs() <= 1e-11 * scale * scale);
            prop_assert!(kh * kh - kg >= -1e-12 * scale * scale);

            prop_assert!(pr.dir1.dot(&pr.dir2).abs() <= 1e-12);
            let (n_local, _) = normal_from_gradient(&grad, &Matrix3::identity());
            prop_assert!(pr.dir1.dot(&n_local).abs() <= 1e-12);
            prop_assert!(pr.dir2.dot(&n_local).abs() <= 1e-12);
            prop_assert!((pr.dir1.cross(&pr.dir2) - n_local).norm() <= 1e-12);

            let (cl, cg) = curvature_tensor(&grad, &hess, &q);
            let j = height_jacobian(&grad);
            let ell = (1.0 + grad.norm_squared()).sqrt();
            let back = ell * j.transpose() * cl * j;
            prop_assert!((back - hess).norm() <= 1e-11 * hess.norm().max(1e-300));
            prop_assert!((cl * n_local).norm() <= 1e-12 * cl.norm().max(1e-300));
            prop_assert!((cg - cg.transpose()).abs().max() <= 1e-13 * cg.norm().max(1.0));

            // The tensor's eigenpairs in the tangent plane are the principal
            // curvatures and directions.
            prop_assert!((cl * pr.dir1 - pr.kappa1 * pr.dir1).norm() <= 1e-10 * scale);
            prop_assert!((cl * pr.dir2 - pr.kappa2 * pr.dir2).norm() <= 1e-10 * scale);

            let vd = VertexDiff::from_grad_hess(&GradHess::new(grad, &hess), &LocalFrame { origin: Vector3::zeros(), frame: q });
            prop_assert!(vd.kappa1.is_finite() && vd.kappa2.is_finite());
            prop_assert!(vd.dir1.dot(&vd.dir2).abs() <= 1e-12);
            prop_assert!((vd.tensor * vd.normal).norm() <= 1e-11 * vd.tensor.norm().max(1e-300));
            prop_assert!(vd.dir1[vd.dir1.iamax()] > 0.0);
        }

        #[test]
        fn pseudo_inverse_is_left_inverse(fu in -50.0f64..50.0, fv in -50.0f64..50.0) {
            let grad = Vector2::new(fu, fv);
            let err = (jacobian_pseudo_inverse(&grad) * height_jacobian(&grad) - Matrix2::identity()).abs().max();
            prop_assert!(err < 1e-13);
        }

        #[test]
        fn transfer_round_trip_and_tensor_covariance(
            fu in -2.0f64..2.0, fv in -2.0f64..2.0,
            ha in -5.0f64..5.0, hb in -5.0f64..5.0, hd in -5.0f64..5.0,
            a in -3.2f64..3.2, b in -1.5f64..1.5, c in -3.2f64..3.2,
            ta in -0.5f64..0.5, tb in -0.5f64..0.5, tc in -3.2f64..3.2,
        ) {
            let grad = Vector2::new(fu, fv);
            let hess = symmetric(ha, hb, hd);
            let q_from = rotation(a, b, c);
            let (_, n) = normal_from_gradient(&grad, &q_from);
            // Tilt a frame aligned with the normal by a bounded rotation so the
            // target still sees the surface as a graph.
            let aligned = crate::fitting::build_local_frame(Vector3::zeros(), n).unwrap().frame;
            let q_to = aligned * rotation(ta, tb, tc);
            let there = transfer_frame(&grad, &hess, &q_from, &q_to).unwrap();
            let back = transfer_frame(&there.grad, &there.hess(), &q_to, &q_from).unwrap();
            prop_assert!((back.grad - grad).norm() <= 1e-10 * grad.norm().max(1.0));
            prop_assert!((back.hess() - hess).norm() <= 1e-10 * hess.norm().max(1.0));

            let (_, c1) = curvature_tensor(&grad, &hess, &q_from);
            let (_, c2) = curvature_tensor(&there.grad, &there.hess(), &q_to);
            prop_assert!((c1 - c2).norm() <= 1e-9 * c1.norm().max(1.0), "{}", rel_err3(&c2, &c1));
        }

        #[test]
        fn classical_and_symmetric_eigenvalues_agree(
            fu in -2.0f64..2.0, fv in -2.0f64..2.0,
            ha in -5.0f64..5.0, hb in -5.0f64..5.0, hd in -5.0f64..5.0,
        ) {
            let grad = Vector2::new(fu, fv);
            let hess = symmetric(ha, hb, hd);
            let w = classical_weingarten(&grad, &hess);
            let ws = symmetric_shape_operator(&grad, &hess).w;
            prop_assert!((w.trace() - ws.trace()).abs() < 1e-10 * hess.norm().max(1.0));
            prop_assert!((w.determinant() - ws.determinant()).abs() < 1e-9 * hess.norm_squared().max(1.0));
        }
    }
}
