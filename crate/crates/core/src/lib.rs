//! Normals, principal curvatures and curvature tensors of triangle meshes
//! from weighted least-squares fits of local height functions.

pub mod linalg;
pub mod mesh;
pub mod fitting;
pub mod diffgeo;
pub mod oracle;
pub mod harness;
