//! Ray–triangle queries over a [`Mesh`], accelerated by a binned-SAH bounding
//! volume hierarchy, plus a linear-scan reference used to check it.
//!
//! Both paths share [`intersect_triangle`] and the same `(t, face_id)`
//! ordering, so their answers agree bit for bit.

mod bvh;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

use crate::mesh::Mesh;

pub use bvh::{Aabb, Bvh, TraversalStats};

/// Barycentric slack accepted on triangle edges so that adjacent faces leave
/// no cracks.
pub const EDGE_TOLERANCE: f64 = 1e-6;

/// Relative shrinkage applied at both ends of a line-of-sight segment.
pub const SEGMENT_EPSILON: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum AccelError {
    #[error("cannot build a BVH over a mesh with no faces")]
    EmptyMesh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point3<f64>,
    /// Unit length.
    pub direction: Vector3<f64>,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    /// Normalizes `direction`.
    pub fn new(origin: Point3<f64>, direction: Vector3<f64>, t_min: f64, t_max: f64) -> Self {
        debug_assert!(t_min >= 0.0 && t_min < t_max);
        Ray {
            origin,
            direction: direction.normalize(),
            t_min,
            t_max,
        }
    }

    pub fn unbounded(origin: Point3<f64>, direction: Vector3<f64>) -> Self {
        Self::new(origin, direction, 0.0, f64::INFINITY)
    }

    pub fn at(&self, t: f64) -> Point3<f64> {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub face_id: u32,
    pub t: f64,
    /// Weights of the face's three vertices, in face order.
    pub barycentric: [f64; 3],
}

impl Hit {
    /// Strict `(t, face_id)` ordering used to pick the nearest hit.
    #[inline]
    pub fn precedes(&self, other: &Hit) -> bool {
        self.t < other.t || (self.t == other.t && self.face_id < other.face_id)
    }
}

/// Möller–Trumbore test without back-face culling. Accepts barycentric
/// coordinates down to `-EDGE_TOLERANCE` and `t` within the ray bounds.
#[inline]
pub fn intersect_triangle(ray: &Ray, tri: &[Point3<f64>; 3]) -> Option<(f64, [f64; 3])> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = ray.direction.cross(&e2);
    let det = e1.dot(&p);
    let n = e1.cross(&e2).norm();
    if det.abs() <= 1e-12 * n || n == 0.0 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(-EDGE_TOLERANCE..=1.0 + EDGE_TOLERANCE).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = ray.direction.dot(&q) * inv;
    if v < -EDGE_TOLERANCE || u + v > 1.0 + EDGE_TOLERANCE {
        return None;
    }
    let t = e2.dot(&q) * inv;
    if !(t >= ray.t_min && t <= ray.t_max) {
        return None;
    }
    let w = 1.0 - u - v;
    if w < -EDGE_TOLERANCE {
        return None;
    }
    Some((t, [w, u, v]))
}

/// Nearest hit by scanning every face in id order.
pub fn intersect_bruteforce(mesh: &Mesh, ray: &Ray) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for face in 0..mesh.faces.len() {
        if let Some((t, barycentric)) = intersect_triangle(ray, &mesh.triangle(face)) {
            let hit = Hit {
                face_id: face as u32,
                t,
                barycentric,
            };
            if best.is_none_or(|b| hit.precedes(&b)) {
                best = Some(hit);
            }
        }
    }
    best
}

/// Nearest hit through the hierarchy.
pub fn intersect(bvh: &Bvh, mesh: &Mesh, ray: &Ray) -> Option<Hit> {
    bvh.closest_hit(mesh, ray, &mut TraversalStats::default())
}

/// True iff the segment `a → b`, shortened by [`SEGMENT_EPSILON`]·|b − a| at
/// both ends, crosses no face.
pub fn visible(bvh: &Bvh, mesh: &Mesh, a: Point3<f64>, b: Point3<f64>) -> bool {
    let d = b - a;
    let len = d.norm();
    if len == 0.0 {
        return true;
    }
    let eps = SEGMENT_EPSILON * len;
    let ray = Ray {
        origin: a,
        direction: d / len,
        t_min: eps,
        t_max: len - eps,
    };
    !bvh.any_hit(mesh, &ray)
}
