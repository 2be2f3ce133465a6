//! Per-view G-buffer ray casting and the cue images derived from it.
//!
//! Base cues are read straight off the G-buffer. Derived cues are pure 2D
//! operators over other cues; [`plan_dag`] orders a request so every input is
//! computed first.

mod cues;
mod filters;
mod gbuffer;
mod refocus;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::accel::Bvh;
use crate::mesh::Mesh;
use crate::sampling::CameraPose;

pub use cues::{cue_from_gbuffer, cue_rgb, cue_rgb_supersampled};
pub use filters::{
    edges_occlusion, edges_texture, harris_response, keypoints_2d, keypoints_3d, luma, percentile,
    DEFAULT_OCCLUSION_THRESHOLD, HARRIS_K,
};
pub use gbuffer::{raycast_gbuffer, raycast_with_camera, GBuffer, PinholeCamera, Sample};
pub use refocus::{coc_radius, refocus, RefocusParams, DEFAULT_COC_SCALE};

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("curvature cue requested but the mesh has no curvature table; run compute_curvatures first")]
    MissingCurvature,
    #[error("{0} requested but the mesh has no face labels")]
    MissingLabels(CueKind),
    #[error("rgb requested but the mesh has neither a texture with uvs nor vertex colors")]
    NoColorSource,
    #[error("unknown cue '{name}'{}", suggestion.as_ref().map(|s| format!("; did you mean '{s}'?")).unwrap_or_default())]
    UnknownCue { name: String, suggestion: Option<String> },
    #[error("cue dependency cycle among {0:?}")]
    Cycle(Vec<CueKind>),
    #[error("{0} cannot be derived from the G-buffer directly")]
    NotABaseCue(CueKind),
    #[error("no cue requested")]
    EmptyRequest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CueKind {
    Rgb,
    DepthZbuffer,
    DepthEuclidean,
    Normals,
    Reshading,
    Curvature,
    EdgesOcclusion,
    EdgesTexture,
    Keypoints2d,
    Keypoints3d,
    SegmentationSemantic,
    SegmentationInstance,
    MaskValid,
    RgbRefocused,
}

impl CueKind {
    pub const ALL: [CueKind; 14] = [
        CueKind::Rgb,
        CueKind::DepthZbuffer,
        CueKind::DepthEuclidean,
        CueKind::Normals,
        CueKind::Reshading,
        CueKind::Curvature,
        CueKind::EdgesOcclusion,
        CueKind::EdgesTexture,
        CueKind::Keypoints2d,
        CueKind::Keypoints3d,
        CueKind::SegmentationSemantic,
        CueKind::SegmentationInstance,
        CueKind::MaskValid,
        CueKind::RgbRefocused,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CueKind::Rgb => "rgb",
            CueKind::DepthZbuffer => "depth_zbuffer",
            CueKind::DepthEuclidean => "depth_euclidean",
            CueKind::Normals => "normals",
            CueKind::Reshading => "reshading",
            CueKind::Curvature => "curvature",
            CueKind::EdgesOcclusion => "edges_occlusion",
            CueKind::EdgesTexture => "edges_texture",
            CueKind::Keypoints2d => "keypoints_2d",
            CueKind::Keypoints3d => "keypoints_3d",
            CueKind::SegmentationSemantic => "segmentation_semantic",
            CueKind::SegmentationInstance => "segmentation_instance",
            CueKind::MaskValid => "mask_valid",
            CueKind::RgbRefocused => "rgb_refocused",
        }
    }

    pub fn channels(self) -> usize {
        match self {
            CueKind::Rgb | CueKind::Normals | CueKind::RgbRefocused => 3,
            CueKind::Curvature => 2,
            _ => 1,
        }
    }

    /// Direct inputs other than the G-buffer.
    pub fn dependencies(self) -> &'static [CueKind] {
        match self {
            CueKind::EdgesOcclusion => &[CueKind::DepthZbuffer],
            CueKind::EdgesTexture | CueKind::Keypoints2d => &[CueKind::Rgb],
            CueKind::Keypoints3d => &[CueKind::Curvature],
            CueKind::RgbRefocused => &[CueKind::Rgb, CueKind::DepthEuclidean],
            _ => &[],
        }
    }
}

impl fmt::Display for CueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CueKind {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(k) = CueKind::ALL.iter().find(|k| k.name() == s) {
            return Ok(*k);
        }
        let suggestion = CueKind::ALL
            .iter()
            .map(|k| (strsim::levenshtein(s, k.name()), k.name()))
            .min()
            .filter(|(d, _)| *d <= 3.max(s.len() / 3))
            .map(|(_, n)| n)
            // Truncated names such as `depth` or `edges`.
            .or_else(|| {
                CueKind::ALL
                    .iter()
                    .map(|k| k.name())
                    .find(|n| !s.is_empty() && n.starts_with(s))
            })
            .map(str::to_string);
        Err(RenderError::UnknownCue {
            name: s.to_string(),
            suggestion,
        })
    }
}

/// A rendered cue raster, row-major and channel-interleaved.
///
/// Normals are stored already mapped to `[0, 1]` by `n * 0.5 + 0.5`;
/// segmentation stores label ids as exact small integers.
#[derive(Debug, Clone, PartialEq)]
pub struct CueImage {
    pub kind: CueKind,
    pub width: u32,
    pub height: u32,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl CueImage {
    pub fn zeros(kind: CueKind, width: u32, height: u32) -> Self {
        let channels = kind.channels();
        CueImage {
            kind,
            width,
            height,
            channels,
            data: vec![0.0; width as usize * height as usize * channels],
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn get(&self, x: u32, y: u32, c: usize) -> f32 {
        self.data[(y as usize * self.width as usize + x as usize) * self.channels + c]
    }

    pub fn pixel(&self, index: usize) -> &[f32] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    pub fn pixel_mut(&mut self, index: usize) -> &mut [f32] {
        &mut self.data[index * self.channels..(index + 1) * self.channels]
    }

    /// Zeroes every pixel where `mask` is false.
    pub fn apply_mask(&mut self, mask: &[bool]) {
        for (i, &m) in mask.iter().enumerate() {
            if !m {
                self.pixel_mut(i).fill(0.0);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CuePlan {
    /// Topological order; dependencies first.
    pub order: Vec<CueKind>,
    /// Subset of `order` that was requested.
    pub emitted: Vec<CueKind>,
}

impl CuePlan {
    pub fn is_emitted(&self, kind: CueKind) -> bool {
        self.emitted.contains(&kind)
    }
}

fn topo_sort(nodes: &[CueKind], deps: impl Fn(CueKind) -> Vec<CueKind>) -> Result<Vec<CueKind>, RenderError> {
    let mut placed: Vec<CueKind> = Vec::with_capacity(nodes.len());
    let mut left: Vec<CueKind> = nodes.to_vec();
    left.sort();
    while !left.is_empty() {
        match left.iter().position(|k| deps(*k).iter().all(|d| placed.contains(d))) {
            Some(i) => placed.push(left.remove(i)),
            None => return Err(RenderError::Cycle(left)),
        }
    }
    Ok(placed)
}

/// Closes `requested` under dependencies and orders it so every cue follows
/// its inputs. Ties are broken by the canonical cue order.
pub fn plan_dag(requested: &[CueKind]) -> Result<CuePlan, RenderError> {
    if requested.is_empty() {
        return Err(RenderError::EmptyRequest);
    }
    let mut closure: Vec<CueKind> = Vec::new();
    let mut stack: Vec<CueKind> = requested.to_vec();
    while let Some(k) = stack.pop() {
        if !closure.contains(&k) {
            closure.push(k);
            stack.extend_from_slice(k.dependencies());
        }
    }
    let order = topo_sort(&closure, |k| k.dependencies().to_vec())?;
    let mut emitted: Vec<CueKind> = requested.to_vec();
    emitted.sort();
    emitted.dedup();
    Ok(CuePlan { order, emitted })
}

/// Tunables for [`render_view`].
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    pub occlusion_threshold: f64,
    /// Average 2x2 rays per pixel for the rgb cue only.
    pub rgb_supersample: bool,
    pub refocus: RefocusParams,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            occlusion_threshold: DEFAULT_OCCLUSION_THRESHOLD,
            rgb_supersample: false,
            refocus: RefocusParams::default(),
        }
    }
}

/// Renders every cue in `plan` for one view and returns the emitted ones,
/// zeroed wherever the primary ray missed.
pub fn render_view(
    mesh: &Mesh,
    bvh: &Bvh,
    pose: &CameraPose,
    plan: &CuePlan,
    options: &RenderOptions,
) -> Result<BTreeMap<CueKind, CueImage>, RenderError> {
    let g = raycast_gbuffer(mesh, bvh, pose);
    let mut done: BTreeMap<CueKind, CueImage> = BTreeMap::new();
    for &kind in &plan.order {
        let image = match kind {
            CueKind::Rgb if options.rgb_supersample => cue_rgb_supersampled(mesh, bvh, &g.camera)?,
            CueKind::Rgb => cue_rgb(&g, mesh)?,
            CueKind::EdgesOcclusion => edges_occlusion(&done[&CueKind::DepthZbuffer], options.occlusion_threshold),
            CueKind::EdgesTexture => edges_texture(&done[&CueKind::Rgb]),
            CueKind::Keypoints2d => keypoints_2d(&done[&CueKind::Rgb]),
            CueKind::Keypoints3d => keypoints_3d(&done[&CueKind::Curvature], &g),
            CueKind::RgbRefocused => refocus(&done[&CueKind::Rgb], &done[&CueKind::DepthEuclidean], &options.refocus),
            base => cue_from_gbuffer(&g, mesh, base)?,
        };
        done.insert(kind, image);
    }
    let mask = g.hit_mask();
    done.retain(|k, _| plan.is_emitted(*k));
    for image in done.values_mut() {
        image.apply_mask(&mask);
    }
    Ok(done)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_valid_order(plan: &CuePlan) -> bool {
        plan.order
            .iter()
            .enumerate()
            .all(|(i, k)| k.dependencies().iter().all(|d| plan.order[..i].contains(d)))
    }

    #[test]
    fn occlusion_edges_pull_in_depth() {
        let plan = plan_dag(&[CueKind::EdgesOcclusion]).unwrap();
        assert_eq!(plan.order, vec![CueKind::DepthZbuffer, CueKind::EdgesOcclusion]);
        assert_eq!(plan.emitted, vec![CueKind::EdgesOcclusion]);
    }

    #[test]
    fn rgb_alone() {
        let plan = plan_dag(&[CueKind::Rgb]).unwrap();
        assert_eq!(plan.order, vec![CueKind::Rgb]);
    }

    #[test]
    fn refocus_after_inputs() {
        let plan = plan_dag(&[CueKind::RgbRefocused]).unwrap();
        let pos = |k| plan.order.iter().position(|x| *x == k).unwrap();
        assert!(pos(CueKind::Rgb) < pos(CueKind::RgbRefocused));
        assert!(pos(CueKind::DepthEuclidean) < pos(CueKind::RgbRefocused));
    }

    #[test]
    fn every_subset_plans_validly() {
        for mask in 1u32..(1 << 14) {
            let req: Vec<_> = CueKind::ALL
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, k)| *k)
                .collect();
            let plan = plan_dag(&req).unwrap();
            assert!(is_valid_order(&plan));
            assert!(req.iter().all(|k| plan.is_emitted(*k)));
        }
    }

    #[test]
    fn cycle_detected() {
        let deps = |k: CueKind| match k {
            CueKind::Rgb => vec![CueKind::Normals],
            CueKind::Normals => vec![CueKind::Rgb],
            _ => vec![],
        };
        let err = topo_sort(&[CueKind::Rgb, CueKind::Normals, CueKind::MaskValid], deps).unwrap_err();
        assert_eq!(err, RenderError::Cycle(vec![CueKind::Rgb, CueKind::Normals]));
    }

    #[test]
    fn names_round_trip_and_typos_suggest() {
        for k in CueKind::ALL {
            assert_eq!(k.name().parse::<CueKind>().unwrap(), k);
        }
        let err = "depth_zbufer".parse::<CueKind>().unwrap_err();
        assert_eq!(
            err.to_string(),
            "unknown cue 'depth_zbufer'; did you mean 'depth_zbuffer'?"
        );
        assert!(matches!(
            "edges".parse::<CueKind>(),
            Err(RenderError::UnknownCue { suggestion: Some(s), .. }) if s == "edges_occlusion"
        ));
        assert!(matches!(
            "xyzzy_totally_unrelated".parse::<CueKind>(),
            Err(RenderError::UnknownCue { suggestion: None, .. })
        ));
    }

    #[test]
    fn empty_request_errors() {
        assert_eq!(plan_dag(&[]), Err(RenderError::EmptyRequest));
    }
}
