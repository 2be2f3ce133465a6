use nalgebra::{Point3, UnitQuaternion, Vector2, Vector3};

use crate::accel::{Bvh, Ray};
use crate::mesh::{Mesh, FALLBACK_NORMAL};
use crate::sampling::CameraPose;

/// Pinhole camera with a vertical field of view and square pixels.
///
/// Pixel `(i, j)` (column, row from the top) covers `[i, i+1) x [j, j+1)` in
/// continuous image coordinates. The principal point is the center of pixel
/// `(W/2, H/2)` (integer division), so that pixel's ray is the optical axis
/// for both odd and even sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera {
    pub position: Point3<f64>,
    /// World → camera.
    pub rotation: UnitQuaternion<f64>,
    pub width: u32,
    pub height: u32,
    /// Focal length in pixels.
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

impl PinholeCamera {
    pub fn new(position: Point3<f64>, rotation: UnitQuaternion<f64>, fov_deg: f64, width: u32, height: u32) -> Self {
        let focal = 0.5 * height as f64 / (0.5 * fov_deg.to_radians()).tan();
        PinholeCamera {
            position,
            rotation,
            width,
            height,
            focal,
            cx: (width / 2) as f64 + 0.5,
            cy: (height / 2) as f64 + 0.5,
        }
    }

    pub fn from_pose(pose: &CameraPose) -> Self {
        Self::new(
            pose.position,
            pose.rotation,
            pose.fov_deg,
            pose.resolution,
            pose.resolution,
        )
    }

    pub fn principal_pixel(&self) -> (u32, u32) {
        (self.width / 2, self.height / 2)
    }

    /// Unit camera-space direction through continuous image point `(x, y)`.
    pub fn direction_camera(&self, x: f64, y: f64) -> Vector3<f64> {
        Vector3::new((x - self.cx) / self.focal, (self.cy - y) / self.focal, -1.0).normalize()
    }

    /// Ray through continuous image point `(x, y)`; camera-space direction
    /// is returned alongside.
    pub fn ray(&self, x: f64, y: f64) -> (Ray, Vector3<f64>) {
        let dc = self.direction_camera(x, y);
        let dw = self.rotation.inverse_transform_vector(&dc);
        (Ray::unbounded(self.position, dw), dc)
    }

    pub fn pixel_ray(&self, i: u32, j: u32) -> (Ray, Vector3<f64>) {
        self.ray(i as f64 + 0.5, j as f64 + 0.5)
    }

    /// Continuous image coordinates of a world point in front of the camera.
    pub fn project(&self, p: &Point3<f64>) -> Option<(f64, f64)> {
        let c = self.rotation.transform_vector(&(p - self.position));
        if c.z >= 0.0 {
            return None;
        }
        Some((self.cx + self.focal * c.x / -c.z, self.cy - self.focal * c.y / -c.z))
    }
}

/// Nearest-surface record for one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub face_id: u32,
    /// Ray parameter of the hit; the ray direction is unit so this is the
    /// euclidean distance from the camera center.
    pub t: f64,
    pub barycentric: [f64; 3],
    pub position: Point3<f64>,
    pub normal_world: Vector3<f64>,
    pub normal_camera: Vector3<f64>,
    pub uv: Option<Vector2<f64>>,
    /// Distance along the optical axis.
    pub depth_z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    pub camera: PinholeCamera,
    pub width: u32,
    pub height: u32,
    /// Row-major; `None` where the primary ray escaped.
    pub pixels: Vec<Option<Sample>>,
}

impl GBuffer {
    pub fn at(&self, x: u32, y: u32) -> Option<&Sample> {
        self.pixels[(y * self.width + x) as usize].as_ref()
    }

    pub fn hit_mask(&self) -> Vec<bool> {
        self.pixels.iter().map(Option::is_some).collect()
    }

    pub fn hit_count(&self) -> usize {
        self.pixels.iter().filter(|p| p.is_some()).count()
    }
}

/// Shading normal at a barycentric location: interpolated vertex normals if
/// present, else the geometric normal.
pub(crate) fn shading_normal(mesh: &Mesh, face: usize, bary: [f64; 3]) -> Vector3<f64> {
    let geometric = || {
        let n = mesh.face_cross(face);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            FALLBACK_NORMAL
        }
    };
    match &mesh.vertex_normals {
        Some(normals) => {
            let [a, b, c] = mesh.faces[face];
            let n = normals[a as usize] * bary[0] + normals[b as usize] * bary[1] + normals[c as usize] * bary[2];
            let len = n.norm();
            if len > 1e-12 {
                n / len
            } else {
                geometric()
            }
        }
        None => geometric(),
    }
}

pub(crate) fn interpolate_uv(mesh: &Mesh, face: usize, bary: [f64; 3]) -> Option<Vector2<f64>> {
    mesh.uvs
        .as_ref()
        .map(|uv| uv[3 * face] * bary[0] + uv[3 * face + 1] * bary[1] + uv[3 * face + 2] * bary[2])
}

pub fn raycast_with_camera(mesh: &Mesh, bvh: &Bvh, camera: &PinholeCamera) -> GBuffer {
    let mut pixels = Vec::with_capacity((camera.width * camera.height) as usize);
    for j in 0..camera.height {
        for i in 0..camera.width {
            let (ray, dir_cam) = camera.pixel_ray(i, j);
            let sample = crate::accel::intersect(bvh, mesh, &ray).map(|hit| {
                let face = hit.face_id as usize;
                let normal_world = shading_normal(mesh, face, hit.barycentric);
                Sample {
                    face_id: hit.face_id,
                    t: hit.t,
                    barycentric: hit.barycentric,
                    position: ray.at(hit.t),
                    normal_world,
                    normal_camera: camera.rotation.transform_vector(&normal_world),
                    uv: interpolate_uv(mesh, face, hit.barycentric),
                    depth_z: hit.t * -dir_cam.z,
                }
            });
            pixels.push(sample);
        }
    }
    GBuffer {
        camera: *camera,
        width: camera.width,
        height: camera.height,
        pixels,
    }
}

/// One primary ray per pixel center; nearest hit per pixel.
pub fn raycast_gbuffer(mesh: &Mesh, bvh: &Bvh, pose: &CameraPose) -> GBuffer {
    raycast_with_camera(mesh, bvh, &PinholeCamera::from_pose(pose))
}
