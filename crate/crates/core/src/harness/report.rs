//! CSV output. Numbers use the shortest round-trip decimal form, so output
//! is byte-identical for identical input. Non-finite values never appear:
//! failed vertices carry `FAILED` in every numeric column plus the cause, and
//! an unbounded condition estimate is written as `singular`.

use std::path::Path;

use super::experiment::METRICS;
use super::{Estimates, HarnessError, Rate, Summary};
use crate::mesh::Mesh;

/// Marker written in place of values at failed vertices.
pub const FAILED: &str = "FAILED";

pub const PER_VERTEX_HEADER: [&str; 22] = [
    "vertex_id", "x", "y", "z", "nx", "ny", "nz", "kappa1", "kappa2", "kappaH", "kappaG", "d1x", "d1y", "d1z", "d2x",
    "d2y", "d2z", "achieved_degree", "ring", "cond", "umbilic", "status",
];

fn num(x: f64) -> String {
    debug_assert!(x.is_finite());
    format!("{x}")
}

fn cond_field(c: f64) -> String {
    if c.is_finite() {
        num(c)
    } else {
        "singular".into()
    }
}

fn rate_field(rate: Option<Rate>) -> String {
    match rate {
        None => String::new(),
        Some(Rate::Exact) => "exact".into(),
        Some(Rate::Value(r)) if r.is_finite() => num(r),
        Some(Rate::Value(_)) => "undefined".into(),
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv { path: path.display().to_string(), source }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, HarnessError> {
    csv::Writer::from_path(path).map_err(csv_err(path))
}

/// One row per vertex.
pub fn write_per_vertex_csv(path: &Path, mesh: &Mesh, estimates: &Estimates) -> Result<(), HarnessError> {
    let mut w = writer(path)?;
    w.write_record(PER_VERTEX_HEADER).map_err(csv_err(path))?;
    for (v, result) in estimates.vertices.iter().enumerate() {
        let p = mesh.vertex(v);
        let mut record = vec![v.to_string(), num(p.x), num(p.y), num(p.z)];
        match result {
            Ok(e) => {
                let d = &e.diff;
                record.extend(d.normal.iter().map(|&x| num(x)));
                record.extend([d.kappa1, d.kappa2, d.kappa_h, d.kappa_g].map(num));
                record.extend(d.dir1.iter().chain(d.dir2.iter()).map(|&x| num(x)));
                record.push(e.achieved_degree.to_string());
                record.push(e.ring.to_string());
                record.push(cond_field(e.cond));
                record.push(u8::from(d.umbilic).to_string());
                record.push("ok".into());
            }
            Err(err) => {
                record.extend(std::iter::repeat_n(FAILED.to_string(), PER_VERTEX_HEADER.len() - 5));
                record.push(format!("failed: {err}"));
            }
        }
        w.write_record(&record).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

/// One row per degree and level, with errors and cumulative rates.
pub fn write_summary_csv(path: &Path, summary: &Summary) -> Result<(), HarnessError> {
    let mut w = writer(path)?;
    let mut header: Vec<String> =
        ["surface", "style", "weighting", "conditioning", "iterative", "degree", "level", "mesh_level", "vertices", "failed"]
            .map(String::from)
            .to_vec();
    header.extend(METRICS.iter().map(|(n, _)| n.to_string()));
    header.extend(METRICS.iter().map(|(n, _)| format!("rate_{n}")));
    header.extend(["max_cond", "ill_conditioned"].map(String::from));
    w.write_record(&header).map_err(csv_err(path))?;

    let cfg = &summary.config;
    let style = match cfg.mesh.surface {
        crate::oracle::Surface::Graph(_) => format!("{:?}", cfg.mesh.style).to_lowercase(),
        crate::oracle::Surface::Torus { .. } if cfg.mesh.torus_jitter => "jittered".into(),
        _ => "structured".into(),
    };
    let on_off = |b: bool| if b { "on" } else { "off" }.to_string();
    for row in &summary.rows {
        let r = &row.report;
        let mut record = vec![
            cfg.mesh.surface.name().to_string(),
            style.clone(),
            on_off(cfg.fit.weighting),
            on_off(cfg.fit.conditioning),
            on_off(cfg.fit.iterative),
            row.degree.to_string(),
            row.level.to_string(),
            row.mesh_level.to_string(),
            r.vertex_count.to_string(),
            r.failed_count.to_string(),
        ];
        record.extend(METRICS.iter().map(|(_, get)| num(get(r))));
        record.extend(row.rates.iter().map(|&rate| rate_field(rate)));
        record.push(cond_field(r.max_cond));
        record.push(r.ill_conditioned.to_string());
        w.write_record(&record).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}
