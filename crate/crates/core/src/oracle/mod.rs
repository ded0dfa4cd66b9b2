//! Analytic test surfaces with exact differential quantities, and the mesh
//! hierarchies used by the convergence studies.
//!
//! Exact curvatures use the same sign convention as the estimator: they are
//! signed with respect to the declared normal (outward for the sphere and
//! torus, `+z` for graphs), negative where the surface bends away from it.

mod meshgen;

pub use meshgen::{gen_graph_mesh, gen_sphere_mesh, gen_torus_mesh, GraphStyle, GRAPH_BASE_CELLS};

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use thiserror::Error;

use crate::diffgeo::VertexDiff;
use crate::fitting::{GradHess, LocalFrame};

/// Distance from the surface beyond which a sample is rejected.
const ON_SURFACE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("sample ({x}, {y}, {z}) is not on the {surface}")]
    OffSurface { surface: String, x: f64, y: f64, z: f64 },
    #[error("sample ({x}, {y}) is outside the unit square")]
    OutOfDomain { x: f64, y: f64 },
    #[error("mesh level {level} exceeds the maximum {max}")]
    LevelTooHigh { level: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Outward,
    Upward,
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Outward => "outward",
            Orientation::Upward => "upward",
        })
    }
}

/// Graph test functions on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFn {
    /// `(1.25 + cos(5.4 y)) / (6 + 6 (3x - 1)^2)`
    F1,
    /// `exp(-81/16 ((x - 0.5)^2 + (y - 0.5)^2))`
    F2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    Sphere { radius: f64 },
    Torus { major: f64, minor: f64 },
    Graph(GraphFn),
}

impl Surface {
    pub const UNIT_SPHERE: Surface = Surface::Sphere { radius: 1.0 };
    /// Inner radius 0.7, outer radius 1.3.
    pub const TORUS: Surface = Surface::Torus { major: 1.0, minor: 0.3 };
    pub const F1: Surface = Surface::Graph(GraphFn::F1);
    pub const F2: Surface = Surface::Graph(GraphFn::F2);

    pub fn orientation(&self) -> Orientation {
        match self {
            Surface::Graph(_) => Orientation::Upward,
            _ => Orientation::Outward,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Surface::Sphere { .. } => "sphere",
            Surface::Torus { .. } => "torus",
            Surface::Graph(GraphFn::F1) => "f1",
            Surface::Graph(GraphFn::F2) => "f2",
        }
    }
}

impl fmt::Display for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// First and second derivatives of a graph `z = F(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphJet {
    pub value: f64,
    pub grad: Vector2<f64>,
    pub hess: Matrix2<f64>,
}

impl GraphFn {
    pub fn value(self, x: f64, y: f64) -> f64 {
        self.jet(x, y).value
    }

    pub fn jet(self, x: f64, y: f64) -> GraphJet {
        match self {
            GraphFn::F1 => {
                let n = 1.25 + (5.4 * y).cos();
                let n_y = -5.4 * (5.4 * y).sin();
                let n_yy = -5.4 * 5.4 * (5.4 * y).cos();
                let t = 3.0 * x - 1.0;
                let d = 6.0 + 6.0 * t * t;
                let d_x = 36.0 * t;
                let d_xx = 108.0;
                let f_xx = n * (2.0 * d_x * d_x / (d * d * d) - d_xx / (d * d));
                let f_xy = -n_y * d_x / (d * d);
                GraphJet {
                    value: n / d,
                    grad: Vector2::new(-n * d_x / (d * d), n_y / d),
                    hess: Matrix2::new(f_xx, f_xy, f_xy, n_yy / d),
                }
            }
            GraphFn::F2 => {
                let a = 81.0 / 16.0;
                let (dx, dy) = (x - 0.5, y - 0.5);
                let f = (-a * (dx * dx + dy * dy)).exp();
                let f_xy = 4.0 * a * a * dx * dy * f;
                GraphJet {
                    value: f,
                    grad: Vector2::new(-2.0 * a * dx * f, -2.0 * a * dy * f),
                    hess: Matrix2::new(
                        (4.0 * a * a * dx * dx - 2.0 * a) * f,
                        f_xy,
                        f_xy,
                        (4.0 * a * a * dy * dy - 2.0 * a) * f,
                    ),
                }
            }
        }
    }
}

/// Exact quantities at a surface point (global coordinates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactQuantities {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa_h: f64,
    pub kappa_g: f64,
    pub dir1: Vector3<f64>,
    pub dir2: Vector3<f64>,
    pub tensor: Matrix3<f64>,
    pub umbilic: bool,
}

impl ExactQuantities {
    fn from_principal(
        position: Vector3<f64>,
        normal: Vector3<f64>,
        (ka, ea): (f64, Vector3<f64>),
        (kb, eb): (f64, Vector3<f64>),
    ) -> Self {
        let ((kappa1, e1), (kappa2, _)) = if ka >= kb { ((ka, ea), (kb, eb)) } else { ((kb, eb), (ka, ea)) };
        let dir1 = if e1[e1.iamax()] >= 0.0 { e1 } else { -e1 };
        let dir2 = normal.cross(&dir1);
        let tensor = kappa1 * dir1 * dir1.transpose() + kappa2 * dir2 * dir2.transpose();
        ExactQuantities {
            position,
            normal,
            kappa1,
            kappa2,
            kappa_h: 0.5 * (kappa1 + kappa2),
            kappa_g: kappa1 * kappa2,
            dir1,
            dir2,
            tensor: 0.5 * (tensor + tensor.transpose()),
            umbilic: (kappa1 - kappa2).abs() < crate::diffgeo::UMBILIC_TOL * kappa1.abs().max(1.0),
        }
    }

    fn from_vertex_diff(position: Vector3<f64>, vd: &VertexDiff) -> Self {
        ExactQuantities {
            position,
            normal: vd.normal,
            kappa1: vd.kappa1,
            kappa2: vd.kappa2,
            kappa_h: vd.kappa_h,
            kappa_g: vd.kappa_g,
            dir1: vd.dir1,
            dir2: vd.dir2,
            tensor: vd.tensor,
            umbilic: vd.umbilic,
        }
    }
}

/// Any unit vector perpendicular to `n`.
fn tangent_of(n: &Vector3<f64>) -> Vector3<f64> {
    let axis = (0..3).min_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs())).unwrap_or(0);
    (Vector3::ith(axis, 1.0) - n * n[axis]).normalize()
}

/// Exact quantities at `p`, which must lie on the surface (graphs: only
/// `x, y` are read).
pub fn exact_at(surface: &Surface, p: &Vector3<f64>) -> Result<ExactQuantities, OracleError> {
    let off = |name: &str| OracleError::OffSurface { surface: name.to_string(), x: p.x, y: p.y, z: p.z };
    match *surface {
        Surface::Sphere { radius } => {
            let rho = p.norm();
            if (rho - radius).abs() > ON_SURFACE_TOL * radius {
                return Err(off("sphere"));
            }
            let n = p / rho;
            let k = -1.0 / radius;
            let t = tangent_of(&n);
            Ok(ExactQuantities::from_principal(*p, n, (k, t), (k, n.cross(&t))))
        }
        Surface::Torus { major, minor } => {
            let phi = p.y.atan2(p.x);
            let radial = p.x.hypot(p.y) - major;
            let psi = p.z.atan2(radial);
            if (radial.hypot(p.z) - minor).abs() > ON_SURFACE_TOL * minor {
                return Err(off("torus"));
            }
            let (sp, cp) = phi.sin_cos();
            let (ss, cs) = psi.sin_cos();
            let n = Vector3::new(cs * cp, cs * sp, ss);
            let along_parallel = Vector3::new(-sp, cp, 0.0);
            let along_meridian = Vector3::new(-ss * cp, -ss * sp, cs);
            Ok(ExactQuantities::from_principal(
                *p,
                n,
                (-cs / (major + minor * cs), along_parallel),
                (-1.0 / minor, along_meridian),
            ))
        }
        Surface::Graph(g) => {
            let domain = -1e-12..=1.0 + 1e-12;
            if !domain.contains(&p.x) || !domain.contains(&p.y) {
                return Err(OracleError::OutOfDomain { x: p.x, y: p.y });
            }
            let jet = g.jet(p.x, p.y);
            let position = Vector3::new(p.x, p.y, jet.value);
            let frame = LocalFrame { origin: position, frame: Matrix3::identity() };
            let vd = VertexDiff::from_grad_hess(&GradHess::new(jet.grad, &jet.hess), &frame);
            Ok(ExactQuantities::from_vertex_diff(position, &vd))
        }
    }
}

/// Point on the torus at parameters `(phi, psi)`.
pub fn torus_point(major: f64, minor: f64, phi: f64, psi: f64) -> Vector3<f64> {
    let w = major + minor * psi.cos();
    Vector3::new(w * phi.cos(), w * phi.sin(), minor * psi.sin())
}

pub(crate) const TWO_PI: f64 = 2.0 * PI;
