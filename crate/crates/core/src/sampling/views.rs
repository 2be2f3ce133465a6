use nalgebra::Point3;
use rand::Rng;

use super::{fixate, sample_intrinsics, Covisibility, SamplingConfig, ViewKind, ViewSpec};

/// One fixated view per visible (camera, point) pair, ordered by point id then
/// camera id. View ids restart at 0 for each point; intrinsics are drawn in
/// emission order.
pub fn enumerate_wide_baseline_views<R: Rng + ?Sized>(
    covisibility: &Covisibility,
    cameras: &[Point3<f64>],
    space_id: &str,
    config: &SamplingConfig,
    rng: &mut R,
) -> Vec<ViewSpec> {
    let mut views = Vec::with_capacity(covisibility.pair_count());
    for point in &covisibility.points {
        for (view_id, &cam) in covisibility.seen_by[&point.id].iter().enumerate() {
            let intr = sample_intrinsics(config, rng);
            let mut pose = fixate(
                cameras[cam as usize],
                point.position,
                intr.roll_deg,
                intr.fov_deg,
                config.resolution,
            )
            .expect("covisible cameras are never at their point");
            pose.camera_id = cam;
            pose.point_id = point.id;
            views.push(ViewSpec {
                space_id: space_id.to_string(),
                point_id: point.id,
                view_id: view_id as u32,
                camera_id: cam,
                pose,
                kind: ViewKind::WideBaseline,
            });
        }
    }
    views
}
