//! Deterministic refinement hierarchies. Edge lengths halve per level.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{torus_point, GraphFn, OracleError, TWO_PI};
use crate::mesh::Mesh;

const MAX_CLOSED_LEVEL: usize = 7;
const MAX_GRAPH_LEVEL: usize = 6;

/// Cells per side of the level-0 graph meshes.
pub const GRAPH_BASE_CELLS: usize = 8;

/// Parameter-space jitter amplitude, as a fraction of the cell size.
const JITTER: f64 = 0.3;

fn check_level(level: usize, max: usize) -> Result<(), OracleError> {
    if level > max {
        return Err(OracleError::LevelTooHigh { level, max });
    }
    Ok(())
}

fn icosahedron() -> Mesh {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let vertices = [
        (-1.0, p, 0.0),
        (1.0, p, 0.0),
        (-1.0, -p, 0.0),
        (1.0, -p, 0.0),
        (0.0, -1.0, p),
        (0.0, 1.0, p),
        (0.0, -1.0, -p),
        (0.0, 1.0, -p),
        (p, 0.0, -1.0),
        (p, 0.0, 1.0),
        (-p, 0.0, -1.0),
        (-p, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    Mesh::new(vertices, faces).expect("icosahedron is a valid mesh")
}

/// Unit icosphere: the icosahedron subdivided `level` times, projecting new
/// vertices onto the sphere after every step. Faces are outward CCW.
pub fn gen_sphere_mesh(level: usize) -> Result<Mesh, OracleError> {
    check_level(level, MAX_CLOSED_LEVEL)?;
    let mut mesh = icosahedron();
    for _ in 0..level {
        let fine = mesh.subdivide_1to4();
        mesh = fine.with_vertices(fine.vertices().iter().map(|v| v.normalize()).collect());
    }
    Ok(mesh)
}

/// Symmetric jitter in `[-JITTER, JITTER)` cells.
fn jitter(rng: &mut ChaCha8Rng) -> f64 {
    JITTER * rng.gen_range(-1.0..1.0)
}

/// Torus `(major, minor)` sampled on a `48 * 2^level` by `16 * 2^level`
/// parameter grid, each quad split into two outward-facing triangles.
///
/// With `jittered`, parameters are perturbed by up to 0.3 cells and each
/// quad is split along its shorter diagonal, which mixes valences.
pub fn gen_torus_mesh(major: f64, minor: f64, level: usize, jittered: bool, seed: u64) -> Result<Mesh, OracleError> {
    check_level(level, MAX_CLOSED_LEVEL)?;
    let n_major = 48 << level;
    let n_minor = 16 << level;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d_phi, d_psi) = (TWO_PI / n_major as f64, TWO_PI / n_minor as f64);

    let mut vertices = Vec::with_capacity(n_major * n_minor);
    for i in 0..n_major {
        for j in 0..n_minor {
            let (mut phi, mut psi) = (i as f64 * d_phi, j as f64 * d_psi);
            if jittered {
                phi += jitter(&mut rng) * d_phi;
                psi += jitter(&mut rng) * d_psi;
            }
            vertices.push(torus_point(major, minor, phi, psi));
        }
    }

    let id = |i: usize, j: usize| (i % n_major) * n_minor + (j % n_minor);
    let mut faces = Vec::with_capacity(2 * n_major * n_minor);
    for i in 0..n_major {
        for j in 0..n_minor {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            let split_ac = !jittered || (vertices[a] - vertices[c]).norm() <= (vertices[b] - vertices[d]).norm();
            if split_ac {
                faces.extend([[a, b, c], [a, c, d]]);
            } else {
                faces.extend([[a, b, d], [b, c, d]]);
            }
        }
    }
    Ok(Mesh::new(vertices, faces).expect("torus grid is a valid mesh"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphStyle {
    /// Jittered coarse grid with random diagonals, refined by 1-to-4
    /// subdivision.
    Irregular,
    /// Uniform right-triangle grid at `2^level` times the base resolution.
    Semiregular,
}

/// Planar triangulation of an `n x n` grid on the unit square; `split`
/// chooses the `(i, j)-(i+1, j+1)` diagonal for a cell.
fn square_grid(points: Vec<(f64, f64)>, n: usize, mut split: impl FnMut() -> bool) -> (Vec<(f64, f64)>, Vec<[usize; 3]>) {
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if split() {
                faces.extend([[a, b, c], [a, c, d]]);
            } else {
                faces.extend([[a, b, d], [b, c, d]]);
            }
        }
    }
    (points, faces)
}

fn lift(g: GraphFn, xy: &[(f64, f64)]) -> Vec<Vector3<f64>> {
    xy.iter().map(|&(x, y)| Vector3::new(x, y, g.value(x, y))).collect()
}

fn relift(g: GraphFn, mesh: &Mesh) -> Mesh {
    mesh.with_vertices(mesh.vertices().iter().map(|p| Vector3::new(p.x, p.y, g.value(p.x, p.y))).collect())
}

/// Graph mesh over the unit square with `GRAPH_BASE_CELLS` cells per side
/// at level 0.
pub fn gen_graph_mesh(g: GraphFn, style: GraphStyle, level: usize, seed: u64) -> Result<Mesh, OracleError> {
    gen_graph_mesh_with_base(g, style, level, seed, GRAPH_BASE_CELLS)
}

/// Graph mesh with `base_cells` cells per side at level 0. Every vertex
/// satisfies `z = F(x, y)` exactly.
pub fn gen_graph_mesh_with_base(
    g: GraphFn,
    style: GraphStyle,
    level: usize,
    seed: u64,
    base_cells: usize,
) -> Result<Mesh, OracleError> {
    check_level(level, MAX_GRAPH_LEVEL)?;
    assert!(base_cells >= 1, "base grid needs at least one cell");
    match style {
        GraphStyle::Semiregular => {
            let n = base_cells << level;
            let h = 1.0 / n as f64;
            let xy: Vec<(f64, f64)> =
                (0..=n).flat_map(|j| (0..=n).map(move |i| (i as f64 * h, j as f64 * h))).collect();
            let (xy, faces) = square_grid(xy, n, || true);
            Ok(Mesh::new(lift(g, &xy), faces).expect("graph grid is a valid mesh"))
        }
        GraphStyle::Irregular => {
            let n = base_cells;
            let h = 1.0 / n as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut xy = Vec::with_capacity((n + 1) * (n + 1));
            for j in 0..=n {
                for i in 0..=n {
                    let (mut x, mut y) = (i as f64 * h, j as f64 * h);
                    // Boundary vertices slide along their edge; corners stay.
                    if i != 0 && i != n {
                        x += jitter(&mut rng) * h;
                    }
                    if j != 0 && j != n {
                        y += jitter(&mut rng) * h;
                    }
                    xy.push((x, y));
                }
            }
            let (xy, faces) = square_grid(xy, n, || rng.gen_bool(0.5));
            let mut mesh = Mesh::new(lift(g, &xy), faces).expect("jittered grid is a valid mesh");
            for _ in 0..level {
                mesh = relift(g, &mesh.subdivide_1to4());
            }
            Ok(mesh)
        }
    }
}
