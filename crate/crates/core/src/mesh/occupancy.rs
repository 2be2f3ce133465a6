use nalgebra::{Point3, Vector3};

use super::Mesh;
use crate::accel::{Bvh, Ray};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Occupancy {
    Inside,
    Outside,
}

pub(crate) const AXES: [Vector3<f64>; 6] = [
    Vector3::new(1.0, 0.0, 0.0),
    Vector3::new(-1.0, 0.0, 0.0),
    Vector3::new(0.0, 1.0, 0.0),
    Vector3::new(0.0, -1.0, 0.0),
    Vector3::new(0.0, 0.0, 1.0),
    Vector3::new(0.0, 0.0, -1.0),
];

/// Number of distinct surface crossings along `ray`. Hits closer together
/// than a tiny relative tolerance are merged so that a ray through a shared
/// edge or vertex counts once.
fn crossings(bvh: &Bvh, mesh: &Mesh, ray: &Ray) -> usize {
    let hits = bvh.all_hits(mesh, ray);
    let mut count = 0;
    let mut last = f64::NEG_INFINITY;
    for t in hits {
        if t - last > 1e-9 * t.abs().max(1.0) {
            count += 1;
        }
        last = t;
    }
    count
}

/// Parity vote over the six axis rays. Four or more even counts are needed
/// for `Outside`; ties resolve to `Inside`.
pub fn occupancy(mesh: &Mesh, bvh: &Bvh, query: Point3<f64>) -> Occupancy {
    let outside_votes = AXES
        .iter()
        .filter(|dir| crossings(bvh, mesh, &Ray::unbounded(query, **dir)).is_multiple_of(2))
        .count();
    if outside_votes > 3 {
        Occupancy::Outside
    } else {
        Occupancy::Inside
    }
}
