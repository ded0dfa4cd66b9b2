//! Indexed triangle meshes with the adjacency needed for ring queries.

mod io;
mod ring;

use std::collections::HashMap;

use nalgebra::Vector3;
use thiserror::Error;

pub use io::{load_mesh, parse_obj, parse_off, write_off, MeshFormat};
pub use ring::{coefficient_count, ring_neighborhood, select_fit_points, RingLevel};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("face {face} references vertex {index}, but the mesh has {vertex_count} vertices")]
    IndexOutOfRange { face: usize, index: usize, vertex_count: usize },
    #[error("face {face} is degenerate (repeated vertex index)")]
    DegenerateFace { face: usize },
    #[error("edge ({a}, {b}) is shared by more than two faces")]
    NonManifoldEdge { a: usize, b: usize },
    #[error("inconsistent orientation: directed edge ({a}, {b}) appears in faces {first} and {second}")]
    InconsistentOrientation { a: usize, b: usize, first: usize, second: usize },
    #[error("vertices without incident faces: {0:?}")]
    IsolatedVertices(Vec<usize>),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Triangle mesh with per-vertex incident faces and per-face edge neighbors.
///
/// Immutable after construction; every query is read-only.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    vertex_faces: Vec<Vec<usize>>,
    /// `face_neighbors[f][e]` is the face across edge `(f[e], f[(e + 1) % 3])`.
    face_neighbors: Vec<[Option<usize>; 3]>,
    edge_count: usize,
}

impl Mesh {
    /// Builds the mesh and its adjacency, rejecting out-of-range indices,
    /// degenerate faces, non-manifold edges and inconsistent orientation.
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let nv = vertices.len();
        for (f, tri) in faces.iter().enumerate() {
            for &index in tri {
                if index >= nv {
                    return Err(MeshError::IndexOutOfRange { face: f, index, vertex_count: nv });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::DegenerateFace { face: f });
            }
        }

        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 3);
        for (f, tri) in faces.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                if let Some(&first) = directed.get(&(a, b)) {
                    // A third face on the same undirected edge is reported as
                    // non-manifold rather than as an orientation problem.
                    if directed.contains_key(&(b, a)) {
                        return Err(MeshError::NonManifoldEdge { a: a.min(b), b: a.max(b) });
                    }
                    return Err(MeshError::InconsistentOrientation { a, b, first, second: f });
                }
                directed.insert((a, b), f);
            }
        }

        let mut face_neighbors = vec![[None; 3]; faces.len()];
        let mut edge_count = 0;
        for (f, tri) in faces.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                match directed.get(&(b, a)) {
                    Some(&g) => {
                        face_neighbors[f][e] = Some(g);
                        if a < b {
                            edge_count += 1;
                        }
                    }
                    None => edge_count += 1,
                }
            }
        }

        let mut vertex_faces = vec![Vec::new(); nv];
        for (f, tri) in faces.iter().enumerate() {
            for &v in tri {
                vertex_faces[v].push(f);
            }
        }

        Ok(Mesh { vertices, faces, vertex_faces, face_neighbors, edge_count })
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex(&self, v: usize) -> Vector3<f64> {
        self.vertices[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_count
    }

    pub fn incident_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn face_neighbors(&self, f: usize) -> [Option<usize>; 3] {
        self.face_neighbors[f]
    }

    /// Vertices lying on a boundary edge.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut on_boundary = vec![false; self.vertices.len()];
        for (f, tri) in self.faces.iter().enumerate() {
            for e in 0..3 {
                if self.face_neighbors[f][e].is_none() {
                    on_boundary[tri[e]] = true;
                    on_boundary[tri[(e + 1) % 3]] = true;
                }
            }
        }
        on_boundary
    }

    /// Same connectivity with new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vector3<f64>>) -> Mesh {
        assert_eq!(vertices.len(), self.vertices.len());
        Mesh { vertices, ..self.clone() }
    }

    /// Un-normalized face normal; its length is twice the face area.
    pub fn face_area_normal(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[f];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (pb - pa).cross(&(pc - pa))
    }

    /// Area-weighted average of incident face normals, normalized.
    pub fn vertex_normals_averaged(&self) -> Result<Vec<Vector3<f64>>, MeshError> {
        let isolated: Vec<usize> =
            (0..self.vertices.len()).filter(|&v| self.vertex_faces[v].is_empty()).collect();
        if !isolated.is_empty() {
            return Err(MeshError::IsolatedVertices(isolated));
        }
        let face_normals: Vec<Vector3<f64>> =
            (0..self.faces.len()).map(|f| self.face_area_normal(f)).collect();
        Ok(self
            .vertex_faces
            .iter()
            .map(|incident| {
                let sum: Vector3<f64> = incident.iter().map(|&f| face_normals[f]).sum();
                sum.normalize()
            })
            .collect())
    }

    /// One-to-four subdivision at edge midpoints.
    ///
    /// Original vertices keep their indices; midpoints are appended in the
    /// order their edges are first met while scanning faces.
    pub fn subdivide_1to4(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::with_capacity(self.edge_count);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push((vertices[a] + vertices[b]) * 0.5);
                vertices.len() - 1
            })
        };
        let mut faces = Vec::with_capacity(self.faces.len() * 4);
        for &[a, b, c] in &self.faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            faces.push([a, ab, ca]);
            faces.push([ab, b, bc]);
            faces.push([ca, bc, c]);
            faces.push([ab, bc, ca]);
        }
        Mesh::new(vertices, faces).expect("subdivision of a valid mesh is valid")
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn grid(n: usize) -> Mesh {
        grid_rect(n, n)
    }

    /// Flat `nx x ny` cell grid in the z = 0 plane, every cell split along
    /// the same diagonal (valence six in the interior).
    pub(crate) fn grid_rect(nx: usize, ny: usize) -> Mesh {
        let mut vertices = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(Vector3::new(i as f64, j as f64, 0.0));
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut faces = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Mesh::new(vertices, faces).unwrap()
    }

    fn triangle() -> Mesh {
        Mesh::new(
            vec![Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    fn tetrahedron() -> Mesh {
        Mesh::new(
            vec![
                Vector3::new(1.0, 1.0, 1.0),
                Vector3::new(1.0, -1.0, -1.0),
                Vector3::new(-1.0, 1.0, -1.0),
                Vector3::new(-1.0, -1.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_faces() {
        let v = vec![Vector3::zeros(); 3];
        assert!(matches!(
            Mesh::new(v.clone(), vec![[0, 1, 99]]),
            Err(MeshError::IndexOutOfRange { face: 0, index: 99, vertex_count: 3 })
        ));
        assert!(matches!(Mesh::new(v.clone(), vec![[0, 1, 1]]), Err(MeshError::DegenerateFace { face: 0 })));
        let v4 = vec![Vector3::zeros(); 4];
        assert!(matches!(
            Mesh::new(v4.clone(), vec![[0, 1, 2], [0, 1, 3]]),
            Err(MeshError::InconsistentOrientation { a: 0, b: 1, .. })
        ));
        let v5 = vec![Vector3::zeros(); 5];
        assert!(matches!(
            Mesh::new(v5, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]),
            Err(MeshError::NonManifoldEdge { a: 0, b: 1 })
        ));
    }

    #[test]
    fn counts_edges() {
        assert_eq!(triangle().num_edges(), 3);
        assert_eq!(tetrahedron().num_edges(), 6);
        assert_eq!(grid(2).num_edges(), 16);
    }

    #[test]
    fn flat_normals() {
        for n in grid(4).vertex_normals_averaged().unwrap() {
            assert_eq!(n, Vector3::new(0.0, 0.0, 1.0));
        }
    }

    #[test]
    fn isolated_vertex_is_reported() {
        let mesh = Mesh::new(
            vec![Vector3::zeros(), Vector3::x(), Vector3::y(), Vector3::z()],
            vec![[0, 1, 2]],
        )
        .unwrap();
        match mesh.vertex_normals_averaged() {
            Err(MeshError::IsolatedVertices(ids)) => assert_eq!(ids, vec![3]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tetrahedron_normals_are_radial() {
        let mesh = tetrahedron();
        for (v, n) in mesh.vertex_normals_averaged().unwrap().iter().enumerate() {
            assert!((n - mesh.vertex(v).normalize()).norm() < 1e-14);
            assert!((n.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn subdivision_counts() {
        let t = triangle().subdivide_1to4();
        assert_eq!((t.num_vertices(), t.num_faces()), (6, 4));
        let t2 = t.subdivide_1to4();
        assert_eq!((t2.num_vertices(), t2.num_faces()), (15, 16));

        let tet = tetrahedron();
        let (v, e, f) = (tet.num_vertices(), tet.num_edges(), tet.num_faces());
        let s = tet.subdivide_1to4();
        assert_eq!((s.num_vertices(), s.num_faces()), (10, 16));
        assert_eq!(s.num_vertices(), v + e);
        assert_eq!(s.num_edges(), 2 * e + 3 * f);
    }

    #[test]
    fn subdivision_keeps_planar_meshes_planar() {
        let tilt = |p: Vector3<f64>| Vector3::new(p.x, p.y, 0.25 * p.x - 0.5 * p.y + 0.125);
        let base = grid(3);
        let mesh = base.with_vertices(base.vertices().iter().map(|&p| tilt(p)).collect());
        let fine = mesh.subdivide_1to4().subdivide_1to4();
        for p in fine.vertices() {
            assert!((p.z - (0.25 * p.x - 0.5 * p.y + 0.125)).abs() <= 1e-15);
        }
    }
}
