//! Per-vertex discrete curvature.
//!
//! Gaussian curvature is the angle defect divided by the mixed Voronoi area;
//! mean curvature is half the magnitude of the cotangent Laplacian of the
//! vertex position, signed positive when it agrees with the vertex normal
//! (convex regions of outward-oriented surfaces are positive).

use std::f64::consts::PI;

use nalgebra::Vector3;

use super::{edge_use_counts, Mesh, MeshError};

#[derive(Debug, Clone, PartialEq)]
pub struct Curvature {
    /// Mean curvature κ_H, 1/m.
    pub mean: Vec<f64>,
    /// Gaussian curvature κ_G, 1/m².
    pub gaussian: Vec<f64>,
    /// Mixed Voronoi area per vertex, m².
    pub area: Vec<f64>,
    /// Vertices on an open boundary; their curvatures are 0.
    pub boundary: Vec<bool>,
    /// Vertices not referenced by any non-degenerate face.
    pub isolated: usize,
}

/// Relative size below which a sum is treated as exact cancellation, so flat
/// regions report exactly zero curvature.
const ROUNDOFF: f64 = 1e-9;

fn cot(a: Vector3<f64>, b: Vector3<f64>) -> f64 {
    let s = a.cross(&b).norm();
    if s == 0.0 {
        0.0
    } else {
        a.dot(&b) / s
    }
}

/// Computes the curvature table and stores it on a copy of the mesh.
/// Requires vertex normals for the mean-curvature sign; they are computed if
/// absent.
pub fn compute_curvatures(mesh: &Mesh) -> Result<Mesh, MeshError> {
    let mut out = mesh.clone();
    out.compute_vertex_normals(false);
    out.curvature = Some(curvature_table(&out)?);
    Ok(out)
}

pub(crate) fn curvature_table(mesh: &Mesh) -> Result<Curvature, MeshError> {
    if mesh.faces.is_empty() {
        return Err(MeshError::Invalid("curvature needs at least one face".into()));
    }
    let n = mesh.vertices.len();
    let mut angle_sum = vec![0.0; n];
    let mut area = vec![0.0; n];
    let mut laplace = vec![Vector3::zeros(); n];
    // Sum of term magnitudes, for telling cancellation noise from curvature.
    let mut laplace_scale = vec![0.0; n];
    let mut incident = vec![false; n];

    for (fi, face) in mesh.faces.iter().enumerate() {
        if mesh.is_degenerate(fi) {
            continue;
        }
        let p = mesh.triangle(fi);
        let tri_area = mesh.face_area(fi);
        for k in 0..3 {
            let i = k;
            let j = (k + 1) % 3;
            let l = (k + 2) % 3;
            let vi = face[i] as usize;
            incident[vi] = true;
            let eij = p[j] - p[i];
            let eil = p[l] - p[i];
            angle_sum[vi] += eij.angle(&eil);

            // Cotangents of the angles opposite edges (i,j) and (i,l).
            let cot_l = cot(p[i] - p[l], p[j] - p[l]);
            let cot_j = cot(p[i] - p[j], p[l] - p[j]);
            laplace[vi] += cot_l * (p[i] - p[j]) + cot_j * (p[i] - p[l]);
            laplace_scale[vi] += cot_l.abs() * eij.norm() + cot_j.abs() * eil.norm();

            let obtuse_here = eij.dot(&eil) < 0.0;
            let obtuse_other = (p[i] - p[j]).dot(&(p[l] - p[j])) < 0.0 || (p[i] - p[l]).dot(&(p[j] - p[l])) < 0.0;
            area[vi] += if obtuse_here {
                tri_area / 2.0
            } else if obtuse_other {
                tri_area / 4.0
            } else {
                (eij.norm_squared() * cot_l + eil.norm_squared() * cot_j) / 8.0
            };
        }
    }

    let mut boundary = vec![false; n];
    for ((a, b), count) in edge_use_counts(&mesh.faces) {
        if count != 2 {
            boundary[a as usize] = true;
            boundary[b as usize] = true;
        }
    }

    let normals = mesh.vertex_normals.as_ref();
    let mut mean = vec![0.0; n];
    let mut gaussian = vec![0.0; n];
    let mut isolated = 0;
    for v in 0..n {
        if !incident[v] || area[v] <= 0.0 {
            isolated += 1;
            continue;
        }
        if boundary[v] {
            continue;
        }
        let defect = 2.0 * PI - angle_sum[v];
        if defect.abs() > ROUNDOFF * 2.0 * PI {
            gaussian[v] = defect / area[v];
        }
        if laplace[v].norm() <= ROUNDOFF * laplace_scale[v] {
            continue;
        }
        let k = laplace[v] / (2.0 * area[v]);
        let magnitude = 0.5 * k.norm();
        let sign = match normals {
            Some(ns) if k.dot(&ns[v]) < 0.0 => -1.0,
            _ => 1.0,
        };
        mean[v] = sign * magnitude;
    }
    if isolated > 0 {
        log::warn!("{isolated} isolated vertices assigned zero curvature");
    }
    Ok(Curvature {
        mean,
        gaussian,
        area,
        boundary,
        isolated,
    })
}

impl Curvature {
    /// Σ κ_G · A over interior vertices; equals the total angle defect.
    pub fn total_gaussian(&self) -> f64 {
        self.gaussian.iter().zip(&self.area).map(|(k, a)| k * a).sum()
    }
}
