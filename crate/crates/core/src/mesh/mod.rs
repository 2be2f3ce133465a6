//! Triangle meshes: parsing, validation and per-vertex enrichment.
//!
//! A [`Mesh`] is the single geometric source of truth for the annotator. It is
//! built once (parsed or generated), enriched with normals and curvature, and
//! then shared read-only between all rendering workers.

mod curvature;
mod obj;
mod occupancy;
mod ply;
mod texture;

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Point3, Vector2, Vector3};
use thiserror::Error;

pub use curvature::{compute_curvatures, Curvature};
pub use obj::{parse_obj, parse_obj_with_materials, write_obj, ObjParse};
pub(crate) use occupancy::AXES;
pub use occupancy::{occupancy, Occupancy};
pub use ply::{parse_ply, write_ply_ascii, write_ply_binary};
pub use texture::Texture;

/// Fallback normal assigned to vertices with no usable incident face.
pub const FALLBACK_NORMAL: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: malformed token {token:?}")]
    Malformed { line: usize, token: String },
    #[error("line {line}: face has {found} vertices, at least 3 required")]
    FaceTooSmall { line: usize, found: usize },
    #[error("face {face}: vertex index {index} out of range ({count} vertices)")]
    IndexOutOfRange { face: usize, index: i64, count: usize },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("element {element:?}: header declares {expected} entries, found {found}")]
    CountMismatch {
        element: String,
        expected: usize,
        found: usize,
    },
    #[error("binary payload truncated while reading element {element:?}")]
    Truncated { element: String },
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error("texture: {0}")]
    Texture(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Indexed triangle mesh with optional per-vertex, per-corner and per-face
/// attributes.
#[derive(Debug, Clone, Default)]
pub struct Mesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[u32; 3]>,
    pub vertex_normals: Option<Vec<Vector3<f64>>>,
    /// Per-corner texture coordinates, `3 * faces.len()` entries.
    pub uvs: Option<Vec<Vector2<f64>>>,
    /// Linear RGB in `[0, 1]`.
    pub vertex_colors: Option<Vec<Vector3<f64>>>,
    pub semantic_labels: Option<Vec<u32>>,
    pub instance_labels: Option<Vec<u32>>,
    pub texture: Option<Texture>,
    pub curvature: Option<Curvature>,
    /// Faces with repeated vertex indices removed while parsing.
    pub dropped_faces: usize,
}

/// Summary statistics produced by [`validate_mesh`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeshReport {
    pub face_count: usize,
    pub vertex_count: usize,
    pub degenerate_face_count: usize,
    pub dropped_face_count: usize,
    pub bounds_min: Point3<f64>,
    pub bounds_max: Point3<f64>,
    pub watertight_estimate: bool,
    pub total_surface_area: f64,
}

impl Mesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        let mesh = Mesh {
            vertices,
            faces,
            ..Default::default()
        };
        mesh.check()?;
        Ok(mesh)
    }

    /// Verifies the structural invariants of every populated attribute.
    pub fn check(&self) -> Result<(), MeshError> {
        let n = self.vertices.len();
        for (fi, face) in self.faces.iter().enumerate() {
            for &idx in face {
                if idx as usize >= n {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: idx as i64,
                        count: n,
                    });
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(MeshError::Invalid(format!(
                    "face {fi} repeats a vertex index: {face:?}"
                )));
            }
        }
        if let Some(normals) = &self.vertex_normals {
            if normals.len() != n {
                return Err(MeshError::Invalid(format!(
                    "{} vertex normals for {n} vertices",
                    normals.len()
                )));
            }
            if let Some(i) = normals.iter().position(|v| (v.norm() - 1.0).abs() > 1e-5) {
                return Err(MeshError::Invalid(format!("vertex normal {i} is not unit length")));
            }
        }
        if let Some(uvs) = &self.uvs {
            if uvs.len() != 3 * self.faces.len() {
                return Err(MeshError::Invalid(format!(
                    "{} uv corners for {} faces",
                    uvs.len(),
                    self.faces.len()
                )));
            }
        }
        if let Some(colors) = &self.vertex_colors {
            if colors.len() != n {
                return Err(MeshError::Invalid(format!(
                    "{} vertex colors for {n} vertices",
                    colors.len()
                )));
            }
        }
        for (name, labels) in [("semantic", &self.semantic_labels), ("instance", &self.instance_labels)] {
            if let Some(labels) = labels {
                if labels.len() != self.faces.len() {
                    return Err(MeshError::Invalid(format!(
                        "{} {name} labels for {} faces",
                        labels.len(),
                        self.faces.len()
                    )));
                }
            }
        }
        if let Some(c) = &self.curvature {
            if c.mean.len() != n || c.gaussian.len() != n {
                return Err(MeshError::Invalid("curvature table size mismatch".into()));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn triangle(&self, face: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized face normal (length is twice the area).
    pub fn face_cross(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    /// A face is degenerate when its corner angle at the first vertex is
    /// numerically zero (sine below 1e-12) or an edge has zero length.
    pub fn is_degenerate(&self, face: usize) -> bool {
        let [a, b, c] = self.triangle(face);
        let e1 = b - a;
        let e2 = c - a;
        let scale = e1.norm() * e2.norm();
        scale == 0.0 || e1.cross(&e2).norm() <= 1e-12 * scale
    }

    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        let mut it = self.vertices.iter();
        let Some(first) = it.next() else {
            return (Point3::origin(), Point3::origin());
        };
        it.fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)))
    }

    /// World position at barycentric coordinates on a face.
    pub fn interpolate_position(&self, face: usize, bary: [f64; 3]) -> Point3<f64> {
        let [a, b, c] = self.triangle(face);
        Point3::from(a.coords * bary[0] + b.coords * bary[1] + c.coords * bary[2])
    }

    /// Fills in area-weighted vertex normals when absent or when `force` is set.
    /// Returns the number of vertices that received [`FALLBACK_NORMAL`].
    pub fn compute_vertex_normals(&mut self, force: bool) -> usize {
        if self.vertex_normals.is_some() && !force {
            return 0;
        }
        let (normals, fallbacks) = area_weighted_normals(self);
        if fallbacks > 0 {
            log::warn!("{fallbacks} vertices have no non-degenerate incident face; using +z");
        }
        self.vertex_normals = Some(normals);
        fallbacks
    }

    /// Loads an `.obj` or `.ply` file. For OBJ files the first diffuse
    /// texture map named by a referenced material library is loaded as well.
    pub fn load(path: &Path) -> Result<Self, MeshError> {
        let bytes = read(path)?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("obj") => {
                let parsed = parse_obj_with_materials(&bytes)?;
                let mut mesh = parsed.mesh;
                if mesh.uvs.is_some() {
                    let dir = path.parent().unwrap_or(Path::new("."));
                    if let Some(tex) = obj::resolve_diffuse_map(dir, &parsed.material_libs)? {
                        mesh.texture = Some(Texture::load(&tex)?);
                    }
                }
                Ok(mesh)
            }
            Some("ply") => parse_ply(&bytes),
            _ => Err(MeshError::UnsupportedFormat(format!(
                "{}: expected .obj or .ply",
                path.display()
            ))),
        }
    }
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>, MeshError> {
    std::fs::read(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn area_weighted_normals(mesh: &Mesh) -> (Vec<Vector3<f64>>, usize) {
    let mut acc = vec![Vector3::zeros(); mesh.vertices.len()];
    for (fi, face) in mesh.faces.iter().enumerate() {
        if mesh.is_degenerate(fi) {
            continue;
        }
        let n = mesh.face_cross(fi);
        for &v in face {
            acc[v as usize] += n;
        }
    }
    let mut fallbacks = 0;
    let normals = acc
        .into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 0.0 && len.is_finite() {
                n / len
            } else {
                fallbacks += 1;
                FALLBACK_NORMAL
            }
        })
        .collect();
    (normals, fallbacks)
}

/// Free function form of [`Mesh::compute_vertex_normals`] that leaves the
/// input untouched.
pub fn compute_vertex_normals(mesh: &Mesh, force: bool) -> (Mesh, usize) {
    let mut out = mesh.clone();
    let fallbacks = out.compute_vertex_normals(force);
    (out, fallbacks)
}

/// Undirected edge → incident face count.
pub(crate) fn edge_use_counts(faces: &[[u32; 3]]) -> HashMap<(u32, u32), u32> {
    let mut edges = HashMap::with_capacity(faces.len() * 3 / 2);
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    edges
}

pub fn validate_mesh(mesh: &Mesh) -> MeshReport {
    let degenerate_face_count = (0..mesh.faces.len()).filter(|&f| mesh.is_degenerate(f)).count();
    let total_surface_area = (0..mesh.faces.len()).map(|f| mesh.face_area(f)).sum();
    let edges = edge_use_counts(&mesh.faces);
    let watertight_estimate = !edges.is_empty() && edges.values().all(|&c| c == 2);
    let (bounds_min, bounds_max) = mesh.bounds();
    MeshReport {
        face_count: mesh.faces.len(),
        vertex_count: mesh.vertices.len(),
        degenerate_face_count,
        dropped_face_count: mesh.dropped_faces,
        bounds_min,
        bounds_max,
        watertight_estimate,
        total_surface_area,
    }
}
