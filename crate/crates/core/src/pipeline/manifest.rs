use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encode::CueEncoding;
use super::PipelineError;
use crate::sampling::ViewSpec;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub position: [f64; 3],
    /// World → camera rotation, camera looking down -z.
    pub quaternion_xyzw: [f64; 4],
    pub fov_deg: f64,
    pub roll_deg: f64,
    pub resolution: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueFile {
    /// Relative to the dataset root.
    pub path: String,
    #[serde(flatten)]
    pub encoding: CueEncoding,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub float_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub point_id: u32,
    pub view_id: u32,
    pub camera_id: u32,
    pub kind: String,
    pub frame_index: Option<u32>,
    pub pose: PoseRecord,
    pub point_position: [f64; 3],
    pub cues: BTreeMap<String, CueFile>,
}

impl ViewRecord {
    pub fn new(spec: &ViewSpec, point_position: [f64; 3], cues: BTreeMap<String, CueFile>) -> Self {
        let q = spec.pose.rotation.quaternion();
        ViewRecord {
            point_id: spec.point_id,
            view_id: spec.view_id,
            camera_id: spec.camera_id,
            kind: spec.kind.name().to_string(),
            frame_index: spec.kind.frame_index(),
            pose: PoseRecord {
                position: spec.pose.position.coords.into(),
                quaternion_xyzw: [q.i, q.j, q.k, q.w],
                fov_deg: spec.pose.fov_deg,
                roll_deg: spec.pose.roll_deg,
                resolution: spec.pose.resolution,
            },
            point_position,
            cues,
        }
    }

    pub fn key(&self) -> (u32, u32) {
        (self.point_id, self.view_id)
    }

    /// Relative paths of every file this record references.
    pub fn files(&self) -> impl Iterator<Item = &str> {
        self.cues
            .values()
            .flat_map(|c| std::iter::once(c.path.as_str()).chain(c.float_path.as_deref()))
    }

    pub fn files_exist(&self, root: &Path) -> bool {
        self.files().all(|f| root.join(f).is_file())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_hash: String,
    pub space_id: String,
    pub cues: Vec<String>,
    /// Sorted by `(point_id, view_id)`.
    pub views: Vec<ViewRecord>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Manifest(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    /// Writes to a sibling temp file and renames it into place.
    pub fn write_atomic(&self, path: &Path) -> Result<(), PipelineError> {
        let tmp = path.with_extension("json.tmp");
        let io = |p: &Path| {
            let p = p.to_path_buf();
            move |e| PipelineError::Io { path: p, source: e }
        };
        std::fs::write(&tmp, self.to_json()).map_err(io(&tmp))?;
        std::fs::rename(&tmp, path).map_err(io(path))
    }

    /// Checks ordering, key uniqueness and that every referenced file exists.
    pub fn validate(&self, root: &Path) -> Result<(), PipelineError> {
        let mut seen = BTreeSet::new();
        let mut prev = None;
        for r in &self.views {
            if !seen.insert(r.key()) {
                return Err(PipelineError::Manifest(format!("duplicate view {:?}", r.key())));
            }
            if prev.is_some_and(|p| p > r.key()) {
                return Err(PipelineError::Manifest("views are not sorted".into()));
            }
            prev = Some(r.key());
            if let Some(missing) = r.files().find(|f| !root.join(f).is_file()) {
                return Err(PipelineError::Manifest(format!("missing file {missing}")));
            }
        }
        Ok(())
    }
}
