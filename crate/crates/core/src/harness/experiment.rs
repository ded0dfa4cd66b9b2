use std::path::PathBuf;

use super::report::{write_per_vertex_csv, write_summary_csv};
use super::{convergence_rate, error_norms, estimate_all, exact_field, ErrorReport, HarnessError, Rate};
use crate::fitting::FitConfig;
use crate::mesh::Mesh;
use crate::oracle::{gen_graph_mesh, gen_sphere_mesh, gen_torus_mesh, GraphStyle, Surface};

/// Which generated hierarchy to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec {
    pub surface: Surface,
    /// Graph surfaces only.
    pub style: GraphStyle,
    /// Torus only: perturbed parameters and mixed diagonals.
    pub torus_jitter: bool,
    pub seed: u64,
}

impl MeshSpec {
    pub fn new(surface: Surface) -> Self {
        MeshSpec { surface, style: GraphStyle::Irregular, torus_jitter: false, seed: 0 }
    }
}

/// Generator level used for harness level 1. The icosphere starts two
/// subdivisions in, where its edge length is comparable to the other
/// surfaces' coarsest meshes.
pub fn default_base_level(surface: &Surface) -> usize {
    match surface {
        Surface::Sphere { .. } => 2,
        _ => 0,
    }
}

/// Mesh of `spec` at generator level `level`.
pub fn generate_mesh(spec: &MeshSpec, level: usize) -> Result<Mesh, HarnessError> {
    let mesh = match spec.surface {
        Surface::Sphere { radius } => {
            let unit = gen_sphere_mesh(level)?;
            unit.with_vertices(unit.vertices().iter().map(|v| v * radius).collect())
        }
        Surface::Torus { major, minor } => gen_torus_mesh(major, minor, level, spec.torus_jitter, spec.seed)?,
        Surface::Graph(g) => gen_graph_mesh(g, spec.style, level, spec.seed)?,
    };
    Ok(mesh)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mesh: MeshSpec,
    /// Number of refinement levels, reported as levels `1..=levels`.
    pub levels: usize,
    /// Generator level of harness level 1.
    pub base_level: usize,
    pub degrees: Vec<usize>,
    /// Fit options; the degree is overridden per run.
    pub fit: FitConfig,
    /// Where to write `summary.csv` and the per-vertex files.
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(mesh: MeshSpec, levels: usize, degrees: Vec<usize>) -> Self {
        ExperimentConfig {
            base_level: default_base_level(&mesh.surface),
            mesh,
            levels,
            degrees,
            fit: FitConfig::default(),
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub degree: usize,
    /// 1-based harness level.
    pub level: usize,
    pub mesh_level: usize,
    pub report: ErrorReport,
    /// Rate of each metric from level 1 to this level (`None` at level 1).
    pub rates: Vec<Option<Rate>>,
}

/// Column name and accessor of a summary metric.
pub type Metric = (&'static str, fn(&ErrorReport) -> f64);

/// Error metrics tracked in summaries, in column order.
pub const METRICS: [Metric; 12] = [
    ("normal_l2", |r| r.normal.l2),
    ("normal_linf", |r| r.normal.linf),
    ("kappa1_l2", |r| r.kappa1.l2),
    ("kappa1_linf", |r| r.kappa1.linf),
    ("kappa2_l2", |r| r.kappa2.l2),
    ("kappa2_linf", |r| r.kappa2.linf),
    ("kappaH_l2", |r| r.kappa_h.l2),
    ("kappaH_linf", |r| r.kappa_h.linf),
    ("kappaG_l2", |r| r.kappa_g.l2),
    ("kappaG_linf", |r| r.kappa_g.linf),
    ("dir1_l2", |r| r.dir1.l2),
    ("dir1_linf", |r| r.dir1.linf),
];

/// Index of a metric in [`METRICS`].
pub fn metric_index(name: &str) -> Option<usize> {
    METRICS.iter().position(|(n, _)| *n == name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn row(&self, degree: usize, level: usize) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.degree == degree && r.level == level)
    }

    /// Errors of `metric` for `degree`, level by level.
    pub fn errors(&self, degree: usize, metric: &str) -> Vec<f64> {
        let idx = metric_index(metric).unwrap_or_else(|| panic!("unknown metric {metric}"));
        let mut rows: Vec<&SummaryRow> = self.rows.iter().filter(|r| r.degree == degree).collect();
        rows.sort_by_key(|r| r.level);
        rows.iter().map(|r| METRICS[idx].1(&r.report)).collect()
    }

    /// Rate of `metric` for `degree` over all levels.
    pub fn rate(&self, degree: usize, metric: &str) -> Option<Rate> {
        convergence_rate(&self.errors(degree, metric)).ok()
    }
}

/// Runs every degree on every level of the hierarchy and collects errors
/// and cumulative rates; writes CSV reports when `out_dir` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Summary, HarnessError> {
    if config.levels == 0 {
        return Err(HarnessError::Invalid("at least one level is required".into()));
    }
    if config.degrees.is_empty() {
        return Err(HarnessError::Invalid("at least one degree is required".into()));
    }
    for &d in &config.degrees {
        FitConfig { degree: d, ..config.fit }.validate()?;
    }
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.display().to_string(), source })?;
    }

    let mut rows = Vec::new();
    for level in 1..=config.levels {
        let mesh_level = config.base_level + level - 1;
        let mesh = generate_mesh(&config.mesh, mesh_level)?;
        let exact = exact_field(&config.mesh.surface, &mesh)?;
        for &degree in &config.degrees {
            let fit = FitConfig { degree, ..config.fit };
            let estimates = estimate_all(&mesh, &fit)?;
            if let Some(dir) = &config.out_dir {
                let path = dir.join(format!("{}_d{degree}_l{level}.csv", config.mesh.surface.name()));
                write_per_vertex_csv(&path, &mesh, &estimates)?;
            }
            rows.push(SummaryRow {
                degree,
                level,
                mesh_level,
                report: error_norms(&estimates, &exact),
                rates: Vec::new(),
            });
        }
    }

    rows.sort_by_key(|r| (r.degree, r.level));
    let snapshot = rows.clone();
    for row in &mut rows {
        row.rates = METRICS
            .iter()
            .map(|(_, get)| {
                let errors: Vec<f64> = snapshot
                    .iter()
                    .filter(|r| r.degree == row.degree && r.level <= row.level)
                    .map(|r| get(&r.report))
                    .collect();
                convergence_rate(&errors).ok()
            })
            .collect();
    }

    let summary = Summary { config: config.clone(), rows };
    if let Some(dir) = &config.out_dir {
        write_summary_csv(&dir.join("summary.csv"), &summary)?;
    }
    Ok(summary)
}
