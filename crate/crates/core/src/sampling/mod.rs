//! Camera locations, points-of-interest, covisibility filtering and view
//! synthesis.
//!
//! All samplers draw from a caller-provided RNG in a fixed order, so a run is
//! reproducible from its seed alone.

mod cameras;
mod covisibility;
mod points;
mod pose;
mod trajectory;
mod views;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use thiserror::Error;

pub use cameras::sample_camera_locations;
pub use covisibility::{filter_covisibility, Covisibility};
pub use points::sample_points_of_interest;
pub use pose::{fixate, sample_intrinsics, Intrinsics};
pub use trajectory::{build_trajectory, catmull_rom_centripetal, order_by_nearest_neighbor, Trajectory};
pub use views::enumerate_wide_baseline_views;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("invalid sampling config: {0}")]
    Config(String),
    #[error(
        "no camera location accepted ({attempts} candidates: {inside} inside the mesh, \
         {too_close} closer than the clearance radius); shrink poisson_radius or clearance_radius"
    )]
    NoCameras {
        attempts: usize,
        inside: usize,
        too_close: usize,
    },
    #[error("mesh has no non-degenerate face to sample")]
    NoFaces,
    #[error(
        "covisibility filtering left nothing: {cameras} cameras, {points} points, \
         {in_range} pairs within the distance band, {visible} with line of sight, \
         {points_with_enough_views} points with >= {min_views} views"
    )]
    EmptyCovisibility {
        cameras: usize,
        points: usize,
        in_range: usize,
        visible: usize,
        points_with_enough_views: usize,
        min_views: usize,
    },
    #[error("camera position coincides with its fixation target")]
    DegenerateFixation,
    #[error("a trajectory needs at least 2 control cameras, got {0}")]
    TooFewControls(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStrategy {
    /// Face uniformly among non-degenerate faces, then uniform on the face.
    UniformFace,
    /// Face with probability proportional to its area.
    AreaWeighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    pub poisson_radius: f64,
    /// Absolute z band for cameras; `None` uses the mesh bounds.
    pub camera_height_range: Option<[f64; 2]>,
    pub clearance_radius: f64,
    pub n_points: usize,
    pub point_strategy: PointStrategy,
    pub min_views_per_point: usize,
    pub max_views_per_point: Option<usize>,
    pub min_view_distance: f64,
    pub max_view_distance: f64,
    pub fov_range: [f64; 2],
    pub fov_mean: f64,
    pub fov_std: f64,
    pub roll_range: [f64; 2],
    pub resolution: u32,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            poisson_radius: 1.0,
            camera_height_range: None,
            clearance_radius: 0.3,
            n_points: 20,
            point_strategy: PointStrategy::UniformFace,
            min_views_per_point: 3,
            max_views_per_point: None,
            min_view_distance: 0.5,
            max_view_distance: 20.0,
            fov_range: [30.0, 125.0],
            fov_mean: 77.5,
            fov_std: 30.0,
            roll_range: [-10.0, 10.0],
            resolution: 512,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), SamplingError> {
        let fail = |m: &str| Err(SamplingError::Config(m.to_string()));
        if !(self.poisson_radius > 0.0) {
            return fail("poisson_radius must be > 0");
        }
        if !(self.clearance_radius >= 0.0) {
            return fail("clearance_radius must be >= 0");
        }
        if self.min_views_per_point < 1 {
            return fail("min_views must be >= 1");
        }
        if let Some(max) = self.max_views_per_point {
            if max < self.min_views_per_point {
                return fail("max_views must be >= min_views");
            }
        }
        if !(self.min_view_distance >= 0.0 && self.min_view_distance <= self.max_view_distance) {
            return fail("view distance band must satisfy 0 <= min <= max");
        }
        let [lo, hi] = self.fov_range;
        if !(lo > 0.0 && lo <= hi && hi < 180.0) {
            return fail("fov_range must lie within (0, 180) degrees with min <= max");
        }
        if !(self.fov_std >= 0.0) {
            return fail("fov_std must be >= 0");
        }
        if !(self.fov_mean >= lo && self.fov_mean <= hi) {
            return fail("fov_mean must lie within fov_range");
        }
        if !(self.roll_range[0] <= self.roll_range[1]) {
            return fail("roll_range must satisfy min <= max");
        }
        if self.resolution == 0 {
            return fail("resolution must be > 0");
        }
        if let Some([zlo, zhi]) = self.camera_height_range {
            if !(zlo <= zhi) {
                return fail("camera_height_range must satisfy min <= max");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointOfInterest {
    pub id: u32,
    pub face_id: u32,
    pub barycentric: [f64; 3],
    pub position: Point3<f64>,
}

/// A fixated camera. `rotation` maps world-frame vectors into the camera
/// frame, where the camera looks down -z with +x right and +y up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub camera_id: u32,
    pub point_id: u32,
    pub position: Point3<f64>,
    pub rotation: UnitQuaternion<f64>,
    pub fov_deg: f64,
    pub roll_deg: f64,
    pub resolution: u32,
}

impl CameraPose {
    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.inverse_transform_vector(&-Vector3::z())
    }

    pub fn up(&self) -> Vector3<f64> {
        self.rotation.inverse_transform_vector(&Vector3::y())
    }

    pub fn right(&self) -> Vector3<f64> {
        self.rotation.inverse_transform_vector(&Vector3::x())
    }

    pub fn to_camera(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rotation.transform_vector(&(p - self.position))
    }

    /// Angle between the optical axis and the direction to `target`.
    pub fn fixation_error(&self, target: &Point3<f64>) -> f64 {
        self.forward().angle(&(target - self.position))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewKind {
    WideBaseline,
    TrajectoryFrame { frame_index: u32 },
}

impl ViewKind {
    pub fn name(&self) -> &'static str {
        match self {
            ViewKind::WideBaseline => "wide_baseline",
            ViewKind::TrajectoryFrame { .. } => "trajectory",
        }
    }

    pub fn frame_index(&self) -> Option<u32> {
        match *self {
            ViewKind::WideBaseline => None,
            ViewKind::TrajectoryFrame { frame_index } => Some(frame_index),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewSpec {
    pub space_id: String,
    pub point_id: u32,
    pub view_id: u32,
    pub camera_id: u32,
    pub pose: CameraPose,
    pub kind: ViewKind,
}
