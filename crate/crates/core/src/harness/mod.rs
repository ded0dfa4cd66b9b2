//! Whole-mesh estimation, error norms against exact values, and
//! convergence studies over refinement hierarchies.

mod experiment;
mod report;

pub use experiment::{
    default_base_level, generate_mesh, metric_index, run_experiment, ExperimentConfig, MeshSpec, Summary, SummaryRow,
    Metric, METRICS,
};
pub use report::{write_per_vertex_csv, write_summary_csv, FAILED};

use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;
use thiserror::Error;

use crate::diffgeo::{normal_from_gradient, VertexDiff};
use crate::fitting::{fit_height, iterative_fit, FitConfig, FitError, FitResult, LocalFrame};
use crate::mesh::{MeshError, Mesh, RingLevel};
use crate::oracle::{ExactQuantities, OracleError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("fit failed at {} vertices: {}", .0.len(), preview(.0))]
    FitFailures(Vec<(usize, FitError)>),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("invalid experiment: {0}")]
    Invalid(String),
}

fn preview(failures: &[(usize, FitError)]) -> String {
    let mut ids: Vec<String> = failures.iter().take(10).map(|(v, _)| v.to_string()).collect();
    if failures.len() > 10 {
        ids.push("...".into());
    }
    format!("vertices [{}]", ids.join(", "))
}

/// Result of the estimation pipeline at one vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexEstimate {
    pub diff: VertexDiff,
    /// Degree of the positional fit.
    pub achieved_degree: usize,
    pub ring: RingLevel,
    pub cond: f64,
    pub point_count: usize,
}

/// Per-vertex outcomes, in vertex order.
#[derive(Debug, Clone)]
pub struct Estimates {
    pub vertices: Vec<Result<VertexEstimate, FitError>>,
    pub wall_time_s: f64,
}

impl Estimates {
    pub fn failures(&self) -> Vec<(usize, FitError)> {
        self.vertices
            .iter()
            .enumerate()
            .filter_map(|(v, r)| r.as_ref().err().map(|e| (v, e.clone())))
            .collect()
    }

    /// All estimates, or the list of failed vertices.
    pub fn into_complete(self) -> Result<Vec<VertexEstimate>, HarnessError> {
        let failures = self.failures();
        if !failures.is_empty() {
            return Err(HarnessError::FitFailures(failures));
        }
        Ok(self.vertices.into_iter().map(|r| r.expect("no failures")).collect())
    }
}

fn estimate_from(fit: &FitResult, diff: VertexDiff) -> VertexEstimate {
    VertexEstimate {
        diff,
        achieved_degree: fit.achieved_degree,
        ring: fit.ring_used.unwrap_or(RingLevel::ONE),
        cond: fit.cond_estimate,
        point_count: fit.point_count,
    }
}

/// Runs the full pipeline on every vertex:
///
/// 1. area-weighted averaged normals define the local frames;
/// 2. point selection and 3. safeguarded fits give gradients (and normals);
/// 4. optionally, the fitted normals are refitted for the Hessian;
/// 5. conversion to normals, curvatures, directions and tensors.
///
/// Vertices whose fit fails are reported per vertex. In the second pass a
/// failed neighbor contributes its averaged normal instead.
pub fn estimate_all(mesh: &Mesh, config: &FitConfig) -> Result<Estimates, HarnessError> {
    config.validate()?;
    let start = Instant::now();
    let averaged = mesh.vertex_normals_averaged()?;

    let first: Vec<Result<(FitResult, LocalFrame), FitError>> =
        (0..mesh.num_vertices()).into_par_iter().map(|v| fit_height(mesh, v, &averaged, config)).collect();

    let vertices = if config.iterative {
        let fitted: Vec<Vector3<f64>> = first
            .iter()
            .zip(&averaged)
            .map(|(r, avg)| match r {
                Ok((fit, frame)) => normal_from_gradient(&fit.grad(), &frame.frame).1,
                Err(_) => *avg,
            })
            .collect();
        first
            .par_iter()
            .enumerate()
            .map(|(v, r)| {
                let (fit, frame) = r.as_ref().map_err(Clone::clone)?;
                let gh = iterative_fit(mesh, v, frame, fit, &fitted, config)?;
                Ok(estimate_from(fit, VertexDiff::from_grad_hess(&gh, frame)))
            })
            .collect()
    } else {
        first
            .par_iter()
            .map(|r| {
                let (fit, frame) = r.as_ref().map_err(Clone::clone)?;
                Ok(estimate_from(fit, VertexDiff::from_grad_hess(&fit.grad_hess(), frame)))
            })
            .collect()
    };
    Ok(Estimates { vertices, wall_time_s: start.elapsed().as_secs_f64() })
}

/// L2 and L-infinity errors of one quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormPair {
    pub l2: f64,
    pub linf: f64,
    /// The exact field is identically zero, so the relative norms fall back
    /// to absolute ones.
    pub degenerate: bool,
}

/// Relative errors of a scalar field:
///
/// * L2: `|est - exact|_2 / |exact|_2`;
/// * L-inf: `max_i |est_i - exact_i| / max(|exact_i|, eps)` with
///   `eps = 0.01 max_i |exact_i|`.
pub fn scalar_errors(est: &[f64], exact: &[f64]) -> NormPair {
    assert_eq!(est.len(), exact.len());
    let diff_sq: f64 = est.iter().zip(exact).map(|(a, b)| (a - b) * (a - b)).sum();
    let exact_norm = exact.iter().map(|b| b * b).sum::<f64>().sqrt();
    let exact_max = exact.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    if exact_max == 0.0 {
        let linf = est.iter().zip(exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        return NormPair { l2: diff_sq.sqrt(), linf, degenerate: true };
    }
    let eps = 0.01 * exact_max;
    let linf = est.iter().zip(exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs() / b.abs().max(eps)));
    NormPair { l2: diff_sq.sqrt() / exact_norm, linf, degenerate: false }
}

/// Vector-field errors: `sqrt(mean |est - exact|^2)` and `max |est - exact|`.
pub fn vector_errors(est: &[Vector3<f64>], exact: &[Vector3<f64>]) -> NormPair {
    assert_eq!(est.len(), exact.len());
    if est.is_empty() {
        return NormPair { l2: 0.0, linf: 0.0, degenerate: false };
    }
    let sq: Vec<f64> = est.iter().zip(exact).map(|(a, b)| (a - b).norm_squared()).collect();
    let l2 = (sq.iter().sum::<f64>() / sq.len() as f64).sqrt();
    let linf = sq.iter().fold(0.0f64, |m, s| m.max(s.sqrt()));
    NormPair { l2, linf, degenerate: false }
}

/// Errors of one estimation run against exact values.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Vertices included in the norms.
    pub vertex_count: usize,
    pub failed_count: usize,
    pub normal: NormPair,
    pub kappa1: NormPair,
    pub kappa2: NormPair,
    pub kappa_h: NormPair,
    pub kappa_g: NormPair,
    /// Principal direction errors (sign-aligned, non-umbilic vertices only).
    pub dir1: NormPair,
    pub max_cond: f64,
    /// Vertices whose final triangular factor has condition >= 1e3.
    pub ill_conditioned: usize,
    pub wall_time_s: f64,
}

/// Condition number flagged as ill-conditioned in reports.
pub const ILL_CONDITIONED: f64 = 1e3;

/// Compares successful estimates with `exact` (one entry per vertex);
/// failed vertices are excluded and counted.
pub fn error_norms(estimates: &Estimates, exact: &[ExactQuantities]) -> ErrorReport {
    assert_eq!(estimates.vertices.len(), exact.len());
    let ok: Vec<(&VertexEstimate, &ExactQuantities)> =
        estimates.vertices.iter().zip(exact).filter_map(|(r, e)| r.as_ref().ok().map(|v| (v, e))).collect();
    let scalar = |f: &dyn Fn(&VertexDiff) -> f64, g: &dyn Fn(&ExactQuantities) -> f64| {
        let a: Vec<f64> = ok.iter().map(|(v, _)| f(&v.diff)).collect();
        let b: Vec<f64> = ok.iter().map(|(_, e)| g(e)).collect();
        scalar_errors(&a, &b)
    };
    let normals_est: Vec<Vector3<f64>> = ok.iter().map(|(v, _)| v.diff.normal).collect();
    let normals_exact: Vec<Vector3<f64>> = ok.iter().map(|(_, e)| e.normal).collect();
    let (dirs_est, dirs_exact): (Vec<Vector3<f64>>, Vec<Vector3<f64>>) = ok
        .iter()
        .filter(|(_, e)| !e.umbilic)
        .map(|(v, e)| {
            let d = v.diff.dir1;
            (if d.dot(&e.dir1) < 0.0 { -d } else { d }, e.dir1)
        })
        .unzip();
    let conds: Vec<f64> = ok.iter().map(|(v, _)| v.cond).collect();
    ErrorReport {
        vertex_count: ok.len(),
        failed_count: estimates.vertices.len() - ok.len(),
        normal: vector_errors(&normals_est, &normals_exact),
        kappa1: scalar(&|d| d.kappa1, &|e| e.kappa1),
        kappa2: scalar(&|d| d.kappa2, &|e| e.kappa2),
        kappa_h: scalar(&|d| d.kappa_h, &|e| e.kappa_h),
        kappa_g: scalar(&|d| d.kappa_g, &|e| e.kappa_g),
        dir1: vector_errors(&dirs_est, &dirs_exact),
        max_cond: conds.iter().copied().fold(0.0, f64::max),
        ill_conditioned: conds.iter().filter(|&&c| c >= ILL_CONDITIONED).count(),
        wall_time_s: estimates.wall_time_s,
    }
}

/// Observed convergence order over a refinement hierarchy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Value(f64),
    /// Some level had zero error.
    Exact,
}

impl Rate {
    pub fn value(self) -> Option<f64> {
        match self {
            Rate::Value(r) => Some(r),
            Rate::Exact => None,
        }
    }
}

/// `log2(e_1 / e_L) / (L - 1)` over errors of `L >= 2` successive levels,
/// each with half the edge length of the previous.
pub fn convergence_rate(errors: &[f64]) -> Result<Rate, HarnessError> {
    if errors.len() < 2 {
        return Err(HarnessError::Invalid(format!("a rate needs at least 2 levels, got {}", errors.len())));
    }
    if errors.contains(&0.0) {
        return Ok(Rate::Exact);
    }
    let (first, last) = (errors[0], errors[errors.len() - 1]);
    Ok(Rate::Value((first / last).log2() / (errors.len() - 1) as f64))
}

/// Exact quantities at every vertex of `mesh`.
pub fn exact_field(surface: &crate::oracle::Surface, mesh: &Mesh) -> Result<Vec<ExactQuantities>, HarnessError> {
    mesh.vertices().iter().map(|p| crate::oracle::exact_at(surface, p).map_err(HarnessError::from)).collect()
}
