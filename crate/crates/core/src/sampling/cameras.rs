//! Bridson-style Poisson-disc sampling of free-space camera locations.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use rand::Rng;

use super::{SamplingConfig, SamplingError};
use crate::accel::{Bvh, Ray};
use crate::mesh::{occupancy, Mesh, Occupancy};

/// Candidate attempts around each active sample.
const ATTEMPTS: usize = 30;

#[derive(Default)]
struct Rejections {
    attempts: usize,
    inside: usize,
    too_close: usize,
}

/// Distance to the nearest surface along the six axis rays (an upper bound on
/// the true distance), or infinity if every probe escapes.
fn probe_clearance(mesh: &Mesh, bvh: &Bvh, p: Point3<f64>, limit: f64) -> f64 {
    crate::mesh::AXES
        .iter()
        .filter_map(|d| {
            let ray = Ray::new(p, *d, 0.0, limit.max(f64::MIN_POSITIVE));
            crate::accel::intersect(bvh, mesh, &ray).map(|h| h.t)
        })
        .fold(f64::INFINITY, f64::min)
}

struct Grid {
    cell: f64,
    origin: Point3<f64>,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl Grid {
    fn key(&self, p: &Point3<f64>) -> [i64; 3] {
        let q = (p - self.origin) / self.cell;
        [q.x.floor() as i64, q.y.floor() as i64, q.z.floor() as i64]
    }

    fn far_enough(&self, points: &[Point3<f64>], p: &Point3<f64>, r: f64) -> bool {
        let k = self.key(p);
        let r2 = r * r;
        for dx in -2..=2 {
            for dy in -2..=2 {
                for dz in -2..=2 {
                    if let Some(ids) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if ids.iter().any(|&i| (points[i] - p).norm_squared() < r2) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn insert(&mut self, p: &Point3<f64>, id: usize) {
        let k = self.key(p);
        self.cells.entry(k).or_default().push(id);
    }
}

/// Samples camera positions inside the mesh bounds (clipped to the height
/// band) that are outside the mesh, keep `clearance_radius` from the surface
/// along axis probes, and are pairwise at least `poisson_radius` apart.
pub fn sample_camera_locations<R: Rng + ?Sized>(
    mesh: &Mesh,
    bvh: &Bvh,
    config: &SamplingConfig,
    rng: &mut R,
) -> Result<Vec<Point3<f64>>, SamplingError> {
    let r = config.poisson_radius;
    if !(r > 0.0) {
        return Err(SamplingError::Config("poisson_radius must be > 0".into()));
    }
    let (mut lo, mut hi) = mesh.bounds();
    if let Some([zlo, zhi]) = config.camera_height_range {
        lo.z = lo.z.max(zlo);
        hi.z = hi.z.min(zhi);
    }
    if (0..3).any(|k| lo[k] > hi[k]) {
        return Err(SamplingError::NoCameras {
            attempts: 0,
            inside: 0,
            too_close: 0,
        });
    }

    let mut stats = Rejections::default();
    let accept = |p: &Point3<f64>, stats: &mut Rejections| -> bool {
        stats.attempts += 1;
        if (0..3).any(|k| p[k] < lo[k] || p[k] > hi[k]) {
            return false;
        }
        if occupancy(mesh, bvh, *p) == Occupancy::Inside {
            stats.inside += 1;
            return false;
        }
        if config.clearance_radius > 0.0
            && probe_clearance(mesh, bvh, *p, config.clearance_radius) < config.clearance_radius
        {
            stats.too_close += 1;
            return false;
        }
        true
    };

    let uniform = |rng: &mut R| {
        Point3::new(
            rng.random_range(lo.x..=hi.x),
            rng.random_range(lo.y..=hi.y),
            rng.random_range(lo.z..=hi.z),
        )
    };

    let mut grid = Grid {
        cell: r / 3f64.sqrt(),
        origin: lo,
        cells: HashMap::new(),
    };
    let mut points: Vec<Point3<f64>> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    // Seeds are thrown uniformly; each restart can open a new free-space pocket.
    let mut restarts_left = ATTEMPTS;

    loop {
        if active.is_empty() {
            let mut seeded = false;
            while restarts_left > 0 {
                restarts_left -= 1;
                let p = uniform(rng);
                if grid.far_enough(&points, &p, r) && accept(&p, &mut stats) {
                    grid.insert(&p, points.len());
                    active.push(points.len());
                    points.push(p);
                    seeded = true;
                    break;
                }
            }
            if !seeded {
                break;
            }
        }
        let slot = rng.random_range(0..active.len());
        let base = points[active[slot]];
        let mut found = false;
        for _ in 0..ATTEMPTS {
            // Uniform direction, radius uniform in volume over [r, 2r].
            let dir = loop {
                let v = Vector3::new(
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0f64..=1.0),
                );
                let n2 = v.norm_squared();
                if n2 > 1e-12 && n2 <= 1.0 {
                    break v / n2.sqrt();
                }
            };
            let u: f64 = rng.random();
            let dist = r * (1.0 + 7.0 * u).cbrt();
            let candidate = base + dir * dist;
            if grid.far_enough(&points, &candidate, r) && accept(&candidate, &mut stats) {
                grid.insert(&candidate, points.len());
                active.push(points.len());
                points.push(candidate);
                found = true;
                break;
            }
        }
        if !found {
            active.swap_remove(slot);
        }
    }

    if points.is_empty() {
        return Err(SamplingError::NoCameras {
            attempts: stats.attempts,
            inside: stats.inside,
            too_close: stats.too_close,
        });
    }
    Ok(points)
}
