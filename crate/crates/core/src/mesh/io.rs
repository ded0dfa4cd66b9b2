//! OFF and OBJ reading, OFF writing.
//!
//! OFF: `OFF` header, a `V F E` counts line, `V` coordinate lines and `F`
//! lines of the form `3 i j k` with 0-based indices.
//! OBJ: `v x y z` and `f i j k` with 1-based indices (`i/t/n` accepted, only
//! the position index is read); all other line types are ignored.
//! Both are whitespace-delimited with `#` comments.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;

use super::{Mesh, MeshError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<Mesh, MeshError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| MeshError::Io { path: path.display().to_string(), source })?;
    match format {
        MeshFormat::Off => parse_off(&text),
        MeshFormat::Obj => parse_obj(&text),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse { line, message: message.into() }
}

fn parse_num<T: FromStr>(token: &str, line: usize, what: &str) -> Result<T, MeshError> {
    token.parse().map_err(|_| parse_err(line, format!("invalid {what} `{token}`")))
}

/// Non-empty lines with comments stripped, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        (!tokens.is_empty()).then_some((i + 1, tokens))
    })
}

pub fn parse_off(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = content_lines(text);
    let (line, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    if header != ["OFF"] {
        return Err(parse_err(line, "expected `OFF` header"));
    }
    let (line, counts) = lines.next().ok_or_else(|| parse_err(line + 1, "missing counts line"))?;
    if counts.len() < 2 {
        return Err(parse_err(line, "counts line needs `V F E`"));
    }
    let nv: usize = parse_num(counts[0], line, "vertex count")?;
    let nf: usize = parse_num(counts[1], line, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    let mut last_line = line;
    for _ in 0..nv {
        let (line, tokens) =
            lines.next().ok_or_else(|| parse_err(last_line + 1, "unexpected end of vertex list"))?;
        last_line = line;
        if tokens.len() < 3 {
            return Err(parse_err(line, "vertex needs three coordinates"));
        }
        let coords: Vec<f64> =
            tokens[..3].iter().map(|t| parse_num(t, line, "coordinate")).collect::<Result<_, _>>()?;
        vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
    }

    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, tokens) =
            lines.next().ok_or_else(|| parse_err(last_line + 1, "unexpected end of face list"))?;
        last_line = line;
        let arity: usize = parse_num(tokens[0], line, "face arity")?;
        if arity != 3 || tokens.len() < 4 {
            return Err(parse_err(line, "only triangular faces `3 i j k` are supported"));
        }
        let mut tri = [0usize; 3];
        for (slot, token) in tri.iter_mut().zip(&tokens[1..4]) {
            *slot = parse_num(token, line, "vertex index")?;
        }
        faces.push(tri);
    }
    Mesh::new(vertices, faces)
}

pub fn parse_obj(text: &str) -> Result<Mesh, MeshError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (line, tokens) in content_lines(text) {
        match tokens[0] {
            "v" => {
                if tokens.len() < 4 {
                    return Err(parse_err(line, "vertex needs three coordinates"));
                }
                let x = parse_num(tokens[1], line, "coordinate")?;
                let y = parse_num(tokens[2], line, "coordinate")?;
                let z = parse_num(tokens[3], line, "coordinate")?;
                vertices.push(Vector3::new(x, y, z));
            }
            "f" => {
                if tokens.len() != 4 {
                    return Err(parse_err(line, "only triangular faces are supported"));
                }
                let mut tri = [0usize; 3];
                for (slot, token) in tri.iter_mut().zip(&tokens[1..]) {
                    let position = token.split('/').next().unwrap_or("");
                    let index: usize = parse_num(position, line, "vertex index")?;
                    if index == 0 {
                        return Err(parse_err(line, "OBJ indices are 1-based"));
                    }
                    *slot = index - 1;
                }
                faces.push(tri);
            }
            _ => {}
        }
    }
    Mesh::new(vertices, faces)
}

/// OFF text for `mesh`. Coordinates use the shortest round-trip float form,
/// so reading the output back reproduces the vertices bit for bit.
pub fn write_off(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("OFF\n");
    let _ = writeln!(out, "{} {} {}", mesh.num_vertices(), mesh.num_faces(), mesh.num_edges());
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
    }
    for [a, b, c] in mesh.faces() {
        let _ = writeln!(out, "3 {a} {b} {c}");
    }
    out
}
