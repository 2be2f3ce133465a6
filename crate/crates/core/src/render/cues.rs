use nalgebra::Vector3;

use super::gbuffer::{interpolate_uv, PinholeCamera, Sample};
use super::{CueImage, CueKind, GBuffer, RenderError};
use crate::accel::{intersect, Bvh};
use crate::mesh::Mesh;

/// Cues read directly off the G-buffer: depths, normals, reshading,
/// curvature, segmentation and the validity mask.
pub fn cue_from_gbuffer(g: &GBuffer, mesh: &Mesh, kind: CueKind) -> Result<CueImage, RenderError> {
    let labels = match kind {
        CueKind::SegmentationSemantic => Some(mesh.semantic_labels.as_ref().ok_or(RenderError::MissingLabels(kind))?),
        CueKind::SegmentationInstance => Some(mesh.instance_labels.as_ref().ok_or(RenderError::MissingLabels(kind))?),
        _ => None,
    };
    let curvature = match kind {
        CueKind::Curvature => Some(mesh.curvature.as_ref().ok_or(RenderError::MissingCurvature)?),
        _ => None,
    };
    let eye = g.camera.position;
    let value = |s: &Sample, out: &mut [f32]| match kind {
        CueKind::DepthZbuffer => out[0] = s.depth_z as f32,
        CueKind::DepthEuclidean => out[0] = s.t as f32,
        CueKind::Normals => {
            for (o, n) in out.iter_mut().zip(s.normal_camera.iter()) {
                *o = (n * 0.5 + 0.5) as f32;
            }
        }
        CueKind::Reshading => {
            let v = (eye - s.position).normalize();
            out[0] = s.normal_world.dot(&v).clamp(0.0, 1.0) as f32;
        }
        CueKind::Curvature => {
            let c = curvature.unwrap();
            let [a, b, d] = mesh.faces[s.face_id as usize].map(|i| i as usize);
            let w = s.barycentric;
            out[0] = (c.mean[a] * w[0] + c.mean[b] * w[1] + c.mean[d] * w[2]) as f32;
            out[1] = (c.gaussian[a] * w[0] + c.gaussian[b] * w[1] + c.gaussian[d] * w[2]) as f32;
        }
        CueKind::SegmentationSemantic | CueKind::SegmentationInstance => {
            out[0] = labels.unwrap()[s.face_id as usize] as f32;
        }
        CueKind::MaskValid => out[0] = 1.0,
        _ => unreachable!(),
    };
    match kind {
        CueKind::Rgb
        | CueKind::EdgesOcclusion
        | CueKind::EdgesTexture
        | CueKind::Keypoints2d
        | CueKind::Keypoints3d
        | CueKind::RgbRefocused => return Err(RenderError::NotABaseCue(kind)),
        _ => {}
    }
    let mut img = CueImage::zeros(kind, g.width, g.height);
    for (i, px) in g.pixels.iter().enumerate() {
        if let Some(s) = px {
            value(s, img.pixel_mut(i));
        }
    }
    Ok(img)
}

enum ColorSource {
    Texture,
    VertexColors,
}

fn color_source(mesh: &Mesh) -> Result<ColorSource, RenderError> {
    if mesh.texture.is_some() && mesh.uvs.is_some() {
        Ok(ColorSource::Texture)
    } else if mesh.vertex_colors.is_some() {
        Ok(ColorSource::VertexColors)
    } else {
        Err(RenderError::NoColorSource)
    }
}

fn shade(
    mesh: &Mesh,
    source: &ColorSource,
    face: usize,
    bary: [f64; 3],
    uv: Option<nalgebra::Vector2<f64>>,
) -> Vector3<f64> {
    match source {
        ColorSource::Texture => {
            let uv = uv.or_else(|| interpolate_uv(mesh, face, bary)).expect("uvs present");
            mesh.texture.as_ref().unwrap().sample_bilinear(uv)
        }
        ColorSource::VertexColors => {
            let colors = mesh.vertex_colors.as_ref().unwrap();
            let [a, b, c] = mesh.faces[face];
            colors[a as usize] * bary[0] + colors[b as usize] * bary[1] + colors[c as usize] * bary[2]
        }
    }
}

/// Surface color: bilinear texture lookup when the mesh has a texture and
/// uvs, else interpolated vertex colors. Misses are black.
pub fn cue_rgb(g: &GBuffer, mesh: &Mesh) -> Result<CueImage, RenderError> {
    let source = color_source(mesh)?;
    let mut img = CueImage::zeros(CueKind::Rgb, g.width, g.height);
    for (i, px) in g.pixels.iter().enumerate() {
        if let Some(s) = px {
            let c = shade(mesh, &source, s.face_id as usize, s.barycentric, s.uv);
            for (o, v) in img.pixel_mut(i).iter_mut().zip(c.iter()) {
                *o = v.clamp(0.0, 1.0) as f32;
            }
        }
    }
    Ok(img)
}

/// Offsets of the 2x2 sub-pixel grid.
const SUBPIXEL: [(f64, f64); 4] = [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)];

/// [`cue_rgb`] averaged over a 2x2 grid of rays per pixel; missed sub-rays
/// contribute black.
pub fn cue_rgb_supersampled(mesh: &Mesh, bvh: &Bvh, camera: &PinholeCamera) -> Result<CueImage, RenderError> {
    let source = color_source(mesh)?;
    let mut img = CueImage::zeros(CueKind::Rgb, camera.width, camera.height);
    for j in 0..camera.height {
        for i in 0..camera.width {
            let mut acc = Vector3::zeros();
            for (dx, dy) in SUBPIXEL {
                let (ray, _) = camera.ray(i as f64 + dx, j as f64 + dy);
                if let Some(hit) = intersect(bvh, mesh, &ray) {
                    acc += shade(mesh, &source, hit.face_id as usize, hit.barycentric, None);
                }
            }
            let idx = (j * camera.width + i) as usize;
            for (o, v) in img.pixel_mut(idx).iter_mut().zip(acc.iter()) {
                *o = (v / SUBPIXEL.len() as f64).clamp(0.0, 1.0) as f32;
            }
        }
    }
    Ok(img)
}
