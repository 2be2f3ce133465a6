//! Smooth camera paths through the cameras that see a point.

use nalgebra::Point3;
use rand::Rng;

use super::{fixate, sample_intrinsics, PointOfInterest, SamplingConfig, SamplingError, ViewKind, ViewSpec};
use crate::accel::{visible, Bvh};
use crate::mesh::{occupancy, Mesh, Occupancy};

/// Sub-steps per span for the arc-length table.
const ARC_STEPS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Control cameras in path order.
    pub control_ids: Vec<u32>,
    /// Every emitted position before filtering, indexed by frame index.
    pub positions: Vec<Point3<f64>>,
    /// Surviving frames.
    pub frames: Vec<ViewSpec>,
    /// Frames dropped for being inside the mesh or losing sight of the point.
    pub dropped: usize,
}

/// Greedy chain: start at the camera nearest `anchor`, then repeatedly hop to
/// the nearest unvisited camera. Ties go to the earlier index.
pub fn order_by_nearest_neighbor(positions: &[Point3<f64>], anchor: &Point3<f64>) -> Vec<usize> {
    let mut left: Vec<usize> = (0..positions.len()).collect();
    let mut out = Vec::with_capacity(positions.len());
    let mut from = *anchor;
    while !left.is_empty() {
        let (slot, _) = left
            .iter()
            .enumerate()
            .map(|(s, &i)| (s, (positions[i] - from).norm_squared()))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        let i = left.remove(slot);
        from = positions[i];
        out.push(i);
    }
    out
}

fn lerp(a: &Point3<f64>, b: &Point3<f64>, ta: f64, tb: f64, t: f64) -> Point3<f64> {
    let span = tb - ta;
    if span <= 0.0 {
        return *a;
    }
    a + (b - a) * ((t - ta) / span)
}

/// Centripetal Catmull–Rom through `p1`..`p2` with neighbours `p0`, `p3`,
/// evaluated by the Barry–Goldman pyramid at `u` in [0, 1].
pub fn catmull_rom_centripetal(
    p0: &Point3<f64>,
    p1: &Point3<f64>,
    p2: &Point3<f64>,
    p3: &Point3<f64>,
    u: f64,
) -> Point3<f64> {
    let t0 = 0.0;
    let t1 = t0 + (p1 - p0).norm().sqrt();
    let t2 = t1 + (p2 - p1).norm().sqrt();
    let t3 = t2 + (p3 - p2).norm().sqrt();
    if t2 == t1 {
        return *p1;
    }
    let t = t1 + (t2 - t1) * u;
    let a1 = lerp(p0, p1, t0, t1, t);
    let a2 = lerp(p1, p2, t1, t2, t);
    let a3 = lerp(p2, p3, t2, t3, t);
    let b1 = lerp(&a1, &a2, t0, t2, t);
    let b2 = lerp(&a2, &a3, t1, t3, t);
    lerp(&b1, &b2, t1, t2, t)
}

/// Positions along the spline: `per_span` frames spaced evenly in arc length
/// on each span, then the final control point.
fn sample_path(controls: &[Point3<f64>], per_span: usize) -> Vec<Point3<f64>> {
    let n = controls.len();
    let at = |i: isize| controls[i.clamp(0, n as isize - 1) as usize];
    let mut out = Vec::with_capacity((n - 1) * per_span + 1);
    for s in 0..n - 1 {
        let (p0, p1, p2, p3) = (
            at(s as isize - 1),
            at(s as isize),
            at(s as isize + 1),
            at(s as isize + 2),
        );
        let eval = |u: f64| catmull_rom_centripetal(&p0, &p1, &p2, &p3, u);
        let mut table = Vec::with_capacity(ARC_STEPS + 1);
        let mut prev = p1;
        let mut acc = 0.0;
        table.push(0.0);
        for k in 1..=ARC_STEPS {
            let q = eval(k as f64 / ARC_STEPS as f64);
            acc += (q - prev).norm();
            table.push(acc);
            prev = q;
        }
        out.push(p1);
        for k in 1..per_span {
            let target = acc * k as f64 / per_span as f64;
            if acc == 0.0 {
                out.push(p1);
                continue;
            }
            let j = table.partition_point(|&l| l < target).clamp(1, ARC_STEPS);
            let frac = (target - table[j - 1]) / (table[j] - table[j - 1]).max(f64::MIN_POSITIVE);
            out.push(eval((j as f64 - 1.0 + frac.clamp(0.0, 1.0)) / ARC_STEPS as f64));
        }
    }
    out.push(controls[n - 1]);
    out
}

/// Builds a fixated frame sequence for `point` through the given cameras.
/// Frames are numbered by their position along the path; view ids start at
/// `first_view_id` and count surviving frames only.
#[allow(clippy::too_many_arguments)]
pub fn build_trajectory<R: Rng + ?Sized>(
    cameras: &[(u32, Point3<f64>)],
    point: &PointOfInterest,
    frames_per_segment: usize,
    first_view_id: u32,
    space_id: &str,
    mesh: &Mesh,
    bvh: &Bvh,
    config: &SamplingConfig,
    rng: &mut R,
) -> Result<Trajectory, SamplingError> {
    if cameras.len() < 2 {
        return Err(SamplingError::TooFewControls(cameras.len()));
    }
    if frames_per_segment == 0 {
        return Err(SamplingError::Config("frames_per_segment must be >= 1".into()));
    }
    let raw: Vec<Point3<f64>> = cameras.iter().map(|c| c.1).collect();
    let order = order_by_nearest_neighbor(&raw, &point.position);
    let controls: Vec<Point3<f64>> = order.iter().map(|&i| raw[i]).collect();
    let positions = sample_path(&controls, frames_per_segment);
    let intr = sample_intrinsics(config, rng);

    let mut frames = Vec::new();
    let mut dropped = 0;
    for (index, pos) in positions.iter().enumerate() {
        let ok = occupancy(mesh, bvh, *pos) == Occupancy::Outside && visible(bvh, mesh, *pos, point.position);
        let pose = match fixate(*pos, point.position, intr.roll_deg, intr.fov_deg, config.resolution) {
            Ok(p) if ok => p,
            _ => {
                dropped += 1;
                continue;
            }
        };
        // Attribute the frame to the nearest control camera.
        let span = (index / frames_per_segment).min(controls.len() - 1);
        let camera_id = cameras[order[span]].0;
        frames.push(ViewSpec {
            space_id: space_id.to_string(),
            point_id: point.id,
            view_id: first_view_id + frames.len() as u32,
            camera_id,
            pose: super::CameraPose {
                camera_id,
                point_id: point.id,
                ..pose
            },
            kind: ViewKind::TrajectoryFrame {
                frame_index: index as u32,
            },
        });
    }
    Ok(Trajectory {
        control_ids: order.iter().map(|&i| cameras[i].0).collect(),
        positions,
        frames,
        dropped,
    })
}
