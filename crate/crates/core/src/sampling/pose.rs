use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{CameraPose, SamplingConfig, SamplingError};

/// Above this |forward · z| the world up seed switches from +z to +y.
const VERTICAL_THRESHOLD: f64 = 0.999;

/// Look-at pose: the optical axis (-z in camera space) points from
/// `position` to `target`, world +z is up when possible, and the image is
/// then rotated by `roll_deg` about the optical axis.
pub fn fixate(
    position: Point3<f64>,
    target: Point3<f64>,
    roll_deg: f64,
    fov_deg: f64,
    resolution: u32,
) -> Result<CameraPose, SamplingError> {
    let delta = target - position;
    let dist = delta.norm();
    if !(dist > 0.0) {
        return Err(SamplingError::DegenerateFixation);
    }
    let forward = delta / dist;
    let seed_up = if forward.z.abs() > VERTICAL_THRESHOLD {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let right0 = forward.cross(&seed_up).normalize();
    let up0 = right0.cross(&forward);
    let (s, c) = roll_deg.to_radians().sin_cos();
    let right = right0 * c + up0 * s;
    let up = up0 * c - right0 * s;

    // Rows are the camera axes in world coordinates: world → camera.
    let m = Matrix3::from_rows(&[right.transpose(), up.transpose(), (-forward).transpose()]);
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
    Ok(CameraPose {
        camera_id: 0,
        point_id: 0,
        position,
        rotation,
        fov_deg,
        roll_deg,
        resolution,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fov_deg: f64,
    pub roll_deg: f64,
}

/// Field of view from a normal distribution truncated to `fov_range` by
/// rejection; roll uniform in `roll_range`.
pub fn sample_intrinsics<R: Rng + ?Sized>(config: &SamplingConfig, rng: &mut R) -> Intrinsics {
    let [lo, hi] = config.fov_range;
    let fov_deg = if config.fov_std == 0.0 || lo == hi {
        config.fov_mean.clamp(lo, hi)
    } else {
        let normal = Normal::new(config.fov_mean, config.fov_std).expect("validated std");
        loop {
            let x: f64 = normal.sample(rng);
            if (lo..=hi).contains(&x) {
                break x;
            }
        }
    };
    let [rlo, rhi] = config.roll_range;
    let roll_deg = if rlo == rhi { rlo } else { rng.random_range(rlo..=rhi) };
    Intrinsics { fov_deg, roll_deg }
}
