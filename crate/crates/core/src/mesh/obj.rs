//! Wavefront OBJ subset: `v` (optionally with trailing RGB), `vt`, `vn`, `f`,
//! `o`/`g`, `usemtl` and `mtllib`. Everything else is ignored.
//!
//! `usemtl` names become semantic labels and `o`/`g` names become instance
//! labels, both numbered from 1 in order of first appearance; faces before
//! the first such statement get label 0.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector2, Vector3};

use super::{Mesh, MeshError};

/// Result of [`parse_obj_with_materials`].
#[derive(Debug, Clone)]
pub struct ObjParse {
    pub mesh: Mesh,
    pub material_libs: Vec<String>,
}

pub fn parse_obj(bytes: &[u8]) -> Result<Mesh, MeshError> {
    parse_obj_with_materials(bytes).map(|p| p.mesh)
}

#[derive(Clone, Copy)]
struct Corner {
    v: usize,
    vt: Option<usize>,
    vn: Option<usize>,
}

fn number<T: std::str::FromStr>(token: &str, line: usize) -> Result<T, MeshError> {
    token.parse().map_err(|_| MeshError::Malformed {
        line,
        token: token.to_string(),
    })
}

/// Resolves a 1-based (or negative, relative) OBJ index against `count`
/// entries seen so far. Out-of-range positive indices are kept and rejected
/// once the whole file has been read.
fn resolve(token: &str, count: usize, line: usize) -> Result<usize, MeshError> {
    let raw: i64 = number(token, line)?;
    match raw {
        0 => Err(MeshError::IndexOutOfRange {
            face: line,
            index: 0,
            count,
        }),
        r if r > 0 => Ok((r - 1) as usize),
        r => {
            let back = (-r) as usize;
            if back > count {
                Err(MeshError::IndexOutOfRange {
                    face: line,
                    index: r,
                    count,
                })
            } else {
                Ok(count - back)
            }
        }
    }
}

fn label_for(names: &mut HashMap<String, u32>, name: &str) -> u32 {
    let next = names.len() as u32 + 1;
    *names.entry(name.to_string()).or_insert(next)
}

pub fn parse_obj_with_materials(bytes: &[u8]) -> Result<ObjParse, MeshError> {
    let text = String::from_utf8_lossy(bytes);
    let mut positions = Vec::new();
    let mut colors: Vec<Option<Vector3<f64>>> = Vec::new();
    let mut texcoords = Vec::new();
    let mut normals: Vec<Vector3<f64>> = Vec::new();
    let mut triangles: Vec<([Corner; 3], usize)> = Vec::new();
    let mut material_libs = Vec::new();
    let mut materials = HashMap::new();
    let mut groups = HashMap::new();
    let mut current_material = 0;
    let mut current_group = 0;
    let mut face_labels: Vec<(u32, u32)> = Vec::new();
    let mut saw_material = false;
    let mut saw_group = false;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        let rest: Vec<&str> = tokens.collect();
        match keyword {
            "v" => {
                if rest.len() < 3 {
                    return Err(MeshError::Malformed {
                        line: line_no,
                        token: line.to_string(),
                    });
                }
                let x = number(rest[0], line_no)?;
                let y = number(rest[1], line_no)?;
                let z = number(rest[2], line_no)?;
                positions.push(Point3::new(x, y, z));
                colors.push(if rest.len() >= 6 {
                    Some(Vector3::new(
                        number(rest[3], line_no)?,
                        number(rest[4], line_no)?,
                        number(rest[5], line_no)?,
                    ))
                } else {
                    None
                });
            }
            "vt" => {
                if rest.len() < 2 {
                    return Err(MeshError::Malformed {
                        line: line_no,
                        token: line.to_string(),
                    });
                }
                texcoords.push(Vector2::new(number(rest[0], line_no)?, number(rest[1], line_no)?));
            }
            "vn" => {
                if rest.len() < 3 {
                    return Err(MeshError::Malformed {
                        line: line_no,
                        token: line.to_string(),
                    });
                }
                normals.push(Vector3::new(
                    number(rest[0], line_no)?,
                    number(rest[1], line_no)?,
                    number(rest[2], line_no)?,
                ));
            }
            "f" => {
                if rest.len() < 3 {
                    return Err(MeshError::FaceTooSmall {
                        line: line_no,
                        found: rest.len(),
                    });
                }
                let mut corners = Vec::with_capacity(rest.len());
                for tok in &rest {
                    let mut parts = tok.split('/');
                    let v = resolve(parts.next().unwrap_or(""), positions.len(), line_no)?;
                    let vt = match parts.next() {
                        Some(s) if !s.is_empty() => Some(resolve(s, texcoords.len(), line_no)?),
                        _ => None,
                    };
                    let vn = match parts.next() {
                        Some(s) if !s.is_empty() => Some(resolve(s, normals.len(), line_no)?),
                        _ => None,
                    };
                    corners.push(Corner { v, vt, vn });
                }
                for k in 1..corners.len() - 1 {
                    triangles.push(([corners[0], corners[k], corners[k + 1]], line_no));
                    face_labels.push((current_material, current_group));
                }
            }
            "usemtl" => {
                saw_material = true;
                current_material = label_for(&mut materials, rest.join(" ").as_str());
            }
            "o" | "g" => {
                saw_group = true;
                current_group = label_for(&mut groups, rest.join(" ").as_str());
            }
            "mtllib" => material_libs.extend(rest.iter().map(|s| s.to_string())),
            _ => {}
        }
    }

    for (tri, line) in &triangles {
        for c in tri {
            if c.v >= positions.len() {
                return Err(MeshError::IndexOutOfRange {
                    face: *line,
                    index: c.v as i64 + 1,
                    count: positions.len(),
                });
            }
            if c.vt.is_some_and(|t| t >= texcoords.len()) || c.vn.is_some_and(|n| n >= normals.len()) {
                return Err(MeshError::IndexOutOfRange {
                    face: *line,
                    index: c.vt.or(c.vn).unwrap_or(0) as i64 + 1,
                    count: texcoords.len().max(normals.len()),
                });
            }
        }
    }

    let mut faces = Vec::with_capacity(triangles.len());
    let mut uvs = Vec::with_capacity(triangles.len() * 3);
    let mut all_uv = true;
    let mut normal_acc = vec![Vector3::zeros(); positions.len()];
    let mut normal_seen = vec![false; positions.len()];
    let mut semantic = Vec::new();
    let mut instance = Vec::new();
    let mut dropped = 0;
    for ((tri, _), labels) in triangles.iter().zip(&face_labels) {
        let [a, b, c] = [tri[0].v, tri[1].v, tri[2].v];
        if a == b || b == c || a == c {
            dropped += 1;
            continue;
        }
        faces.push([a as u32, b as u32, c as u32]);
        for corner in tri {
            match corner.vt {
                Some(t) => uvs.push(texcoords[t]),
                None => {
                    all_uv = false;
                    uvs.push(Vector2::zeros());
                }
            }
            if let Some(n) = corner.vn {
                normal_acc[corner.v] += normals[n];
                normal_seen[corner.v] = true;
            }
        }
        semantic.push(labels.0);
        instance.push(labels.1);
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} faces with repeated vertex indices");
    }

    let referenced: Vec<bool> = {
        let mut r = vec![false; positions.len()];
        faces.iter().flatten().for_each(|&v| r[v as usize] = true);
        r
    };
    let vertex_normals =
        if !normals.is_empty() && referenced.iter().zip(&normal_seen).all(|(&used, &seen)| !used || seen) {
            let out: Option<Vec<Vector3<f64>>> = normal_acc
                .iter()
                .zip(&referenced)
                .map(|(n, &used)| {
                    let len = n.norm();
                    if len > 0.0 {
                        Some(n / len)
                    } else if !used {
                        Some(super::FALLBACK_NORMAL)
                    } else {
                        None
                    }
                })
                .collect();
            out
        } else {
            None
        };
    let vertex_colors = if !colors.is_empty() && colors.iter().all(Option::is_some) {
        Some(colors.into_iter().flatten().collect())
    } else {
        None
    };

    let mesh = Mesh {
        vertices: positions,
        faces,
        vertex_normals,
        uvs: (all_uv && !texcoords.is_empty()).then_some(uvs),
        vertex_colors,
        semantic_labels: saw_material.then_some(semantic),
        instance_labels: saw_group.then_some(instance),
        texture: None,
        curvature: None,
        dropped_faces: dropped,
    };
    mesh.check()?;
    Ok(ObjParse { mesh, material_libs })
}

/// Finds the first `map_Kd` statement across the given material libraries,
/// resolved relative to `dir`. Missing libraries are skipped with a warning.
pub(crate) fn resolve_diffuse_map(dir: &Path, libs: &[String]) -> Result<Option<PathBuf>, MeshError> {
    for lib in libs {
        let path = dir.join(lib);
        let Ok(text) = std::fs::read_to_string(&path) else {
            log::warn!("material library {} not readable; ignoring", path.display());
            continue;
        };
        for line in text.lines() {
            let mut tokens = line.split_whitespace();
            if tokens.next() == Some("map_Kd") {
                // Options such as `-s 1 1 1` precede the filename.
                if let Some(name) = tokens.last() {
                    return Ok(Some(path.parent().unwrap_or(dir).join(name)));
                }
            }
        }
    }
    Ok(None)
}

/// Serializes positions, faces, per-corner UVs and vertex normals. Floats use
/// the shortest round-trip representation so parsing the output reproduces
/// the input exactly.
pub fn write_obj(mesh: &Mesh) -> String {
    let mut out = String::new();
    let colors = mesh.vertex_colors.as_ref();
    for (i, v) in mesh.vertices.iter().enumerate() {
        match colors {
            Some(c) => {
                let c = c[i];
                let _ = writeln!(out, "v {} {} {} {} {} {}", v.x, v.y, v.z, c.x, c.y, c.z);
            }
            None => {
                let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
            }
        }
    }
    if let Some(uvs) = &mesh.uvs {
        for t in uvs {
            let _ = writeln!(out, "vt {} {}", t.x, t.y);
        }
    }
    if let Some(normals) = &mesh.vertex_normals {
        for n in normals {
            let _ = writeln!(out, "vn {} {} {}", n.x, n.y, n.z);
        }
    }
    for (fi, f) in mesh.faces.iter().enumerate() {
        out.push('f');
        for (k, &v) in f.iter().enumerate() {
            let v = v + 1;
            let t = 3 * fi + k + 1;
            match (mesh.uvs.is_some(), mesh.vertex_normals.is_some()) {
                (true, true) => write!(out, " {v}/{t}/{v}"),
                (true, false) => write!(out, " {v}/{t}"),
                (false, true) => write!(out, " {v}//{v}"),
                (false, false) => write!(out, " {v}"),
            }
            .ok();
        }
        out.push('\n');
    }
    out
}
