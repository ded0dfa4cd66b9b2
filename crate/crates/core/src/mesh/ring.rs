//! Integer and half-integer ring neighborhoods.
//!
//! * 1-ring: vertices of the faces incident on the center.
//! * 1.5-ring: vertices of every face sharing an edge with a 1-ring face.
//! * (k+1)-ring: the k-ring plus the 1-rings of its members.
//! * (k+1.5)-ring: the k-ring plus the 1.5-rings of its members.

use std::fmt;

use super::Mesh;

/// Neighborhood size in half-ring steps, from 1 to 3.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RingLevel(u8);

impl RingLevel {
    pub const ONE: RingLevel = RingLevel(2);
    pub const MAX: RingLevel = RingLevel(7);

    /// Accepts 1, 1.5, 2, 2.5, 3 and 3.5.
    pub fn new(value: f64) -> Option<RingLevel> {
        let halves = value * 2.0;
        if halves.fract() != 0.0 || !(2.0..=7.0).contains(&halves) {
            return None;
        }
        Some(RingLevel(halves as u8))
    }

    /// The `(d + 1) / 2` starting ring for a degree-`d` fit, clamped to 3.5.
    pub fn for_degree(degree: usize) -> RingLevel {
        RingLevel((degree + 1).clamp(2, 7) as u8)
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    /// Next half-step, or `None` at 3.5.
    pub fn step_up(self) -> Option<RingLevel> {
        (self.0 < 7).then(|| RingLevel(self.0 + 1))
    }

    fn halves(self) -> u8 {
        self.0
    }
}

impl fmt::Display for RingLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

fn push_face_vertices(mesh: &Mesh, face: usize, out: &mut Vec<usize>) {
    out.extend_from_slice(&mesh.faces()[face]);
}

fn one_ring_into(mesh: &Mesh, v: usize, out: &mut Vec<usize>) {
    for &f in mesh.incident_faces(v) {
        push_face_vertices(mesh, f, out);
    }
}

fn one_half_ring_into(mesh: &Mesh, v: usize, out: &mut Vec<usize>) {
    for &f in mesh.incident_faces(v) {
        push_face_vertices(mesh, f, out);
        for g in mesh.face_neighbors(f).into_iter().flatten() {
            push_face_vertices(mesh, g, out);
        }
    }
}

fn sorted_unique(mut ids: Vec<usize>) -> Vec<usize> {
    ids.sort_unstable();
    ids.dedup();
    ids
}

fn ring_set(mesh: &Mesh, center: usize, halves: u8) -> Vec<usize> {
    let mut out = vec![center];
    match halves {
        2 => one_ring_into(mesh, center, &mut out),
        3 => one_half_ring_into(mesh, center, &mut out),
        _ => {
            // Integer steps extend the ring one level below with 1-rings,
            // half steps extend the same base with 1.5-rings.
            let base = ring_set(mesh, center, if halves.is_multiple_of(2) { halves - 2 } else { halves - 3 });
            out.extend_from_slice(&base);
            for &w in &base {
                if halves.is_multiple_of(2) {
                    one_ring_into(mesh, w, &mut out);
                } else {
                    one_half_ring_into(mesh, w, &mut out);
                }
            }
        }
    }
    sorted_unique(out)
}

/// Vertices within `ring` of `center`: the center first, then the others in
/// ascending id order.
pub fn ring_neighborhood(mesh: &Mesh, center: usize, ring: RingLevel) -> Vec<usize> {
    let set = ring_set(mesh, center, ring.halves());
    let mut ordered = Vec::with_capacity(set.len());
    ordered.push(center);
    ordered.extend(set.into_iter().filter(|&w| w != center));
    ordered
}

/// Number of Taylor coefficients of a bivariate polynomial of total degree `d`.
pub fn coefficient_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Points for a degree-`degree` fit at `center`.
///
/// Starts at the `(d + 1) / 2` ring and grows by half rings, up to `cap`,
/// while fewer than `1.5 n` points are available.
pub fn select_fit_points(mesh: &Mesh, center: usize, degree: usize, cap: RingLevel) -> (Vec<usize>, RingLevel) {
    let wanted = 1.5 * coefficient_count(degree) as f64;
    let mut ring = RingLevel::for_degree(degree).min(cap);
    loop {
        let points = ring_neighborhood(mesh, center, ring);
        if (points.len() as f64) >= wanted || ring >= cap {
            return (points, ring);
        }
        match ring.step_up() {
            Some(next) => ring = next,
            None => return (points, ring),
        }
    }
}
