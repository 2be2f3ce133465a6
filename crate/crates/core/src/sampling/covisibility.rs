use std::collections::BTreeMap;

use nalgebra::Point3;

use super::{PointOfInterest, SamplingConfig, SamplingError};
use crate::accel::{visible, Bvh};
use crate::mesh::Mesh;

/// Output of [`filter_covisibility`]. Camera ids index the original camera
/// list; point ids are the ids assigned by the point sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct Covisibility {
    /// Surviving camera ids, ascending.
    pub cameras: Vec<u32>,
    /// Surviving points, ascending by id.
    pub points: Vec<PointOfInterest>,
    /// Point id → ascending ids of the cameras that see it.
    pub seen_by: BTreeMap<u32, Vec<u32>>,
}

impl Covisibility {
    pub fn pair_count(&self) -> usize {
        self.seen_by.values().map(Vec::len).sum()
    }
}

/// Greedy farthest-angle subset: start from the lowest camera id, then keep
/// adding the camera whose smallest angle to the chosen ones is largest
/// (ties to the lower id).
fn spread_subset(point: &Point3<f64>, seers: &[u32], cameras: &[Point3<f64>], keep: usize) -> Vec<u32> {
    if seers.len() <= keep {
        return seers.to_vec();
    }
    let dirs: Vec<_> = seers
        .iter()
        .map(|&c| (cameras[c as usize] - point).normalize())
        .collect();
    let mut chosen = vec![0usize];
    let mut min_angle: Vec<f64> = dirs.iter().map(|d| d.angle(&dirs[0])).collect();
    while chosen.len() < keep {
        let mut best = None;
        for (i, &a) in min_angle.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            if best.is_none_or(|(_, b)| a > b) {
                best = Some((i, a));
            }
        }
        let (next, _) = best.expect("more seers than kept");
        chosen.push(next);
        for (i, d) in dirs.iter().enumerate() {
            min_angle[i] = min_angle[i].min(d.angle(&dirs[next]));
        }
    }
    let mut out: Vec<u32> = chosen.into_iter().map(|i| seers[i]).collect();
    out.sort_unstable();
    out
}

/// Keeps cameras and points that satisfy the covisibility contract: each point
/// is seen by at least `min_views_per_point` cameras and each camera sees at
/// least one point. "Sees" means unobstructed line of sight within the view
/// distance band.
pub fn filter_covisibility(
    cameras: &[Point3<f64>],
    points: &[PointOfInterest],
    bvh: &Bvh,
    mesh: &Mesh,
    config: &SamplingConfig,
) -> Result<Covisibility, SamplingError> {
    let min_views = config.min_views_per_point.max(1);
    let mut in_range = 0;
    let mut seen_by: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for p in points {
        let mut seers = Vec::new();
        for (ci, c) in cameras.iter().enumerate() {
            let d = (c - p.position).norm();
            if d < config.min_view_distance || d > config.max_view_distance || d == 0.0 {
                continue;
            }
            in_range += 1;
            if visible(bvh, mesh, *c, p.position) {
                seers.push(ci as u32);
            }
        }
        seen_by.insert(p.id, seers);
    }
    let visible_pairs: usize = seen_by.values().map(Vec::len).sum();
    let points_with_enough_views = seen_by.values().filter(|s| s.len() >= min_views).count();

    let mut alive_cam = vec![true; cameras.len()];
    loop {
        let mut changed = false;
        seen_by.retain(|_, seers| {
            seers.retain(|&c| alive_cam[c as usize]);
            seers.len() >= min_views
        });
        let mut sees_any = vec![false; cameras.len()];
        for seers in seen_by.values() {
            for &c in seers {
                sees_any[c as usize] = true;
            }
        }
        for (alive, sees) in alive_cam.iter_mut().zip(&sees_any) {
            if *alive && !*sees {
                *alive = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    if let Some(max) = config.max_views_per_point {
        let by_id: BTreeMap<u32, &PointOfInterest> = points.iter().map(|p| (p.id, p)).collect();
        for (pid, seers) in seen_by.iter_mut() {
            *seers = spread_subset(&by_id[pid].position, seers, cameras, max);
        }
        // Capping never drops a point below min_views, but may orphan cameras.
        alive_cam.iter_mut().for_each(|a| *a = false);
        for seers in seen_by.values() {
            for &c in seers {
                alive_cam[c as usize] = true;
            }
        }
    }

    if seen_by.is_empty() {
        return Err(SamplingError::EmptyCovisibility {
            cameras: cameras.len(),
            points: points.len(),
            in_range,
            visible: visible_pairs,
            points_with_enough_views,
            min_views,
        });
    }
    let kept_points = points.iter().filter(|p| seen_by.contains_key(&p.id)).copied().collect();
    Ok(Covisibility {
        cameras: (0..cameras.len() as u32).filter(|&c| alive_cam[c as usize]).collect(),
        points: kept_points,
        seen_by,
    })
}
