//! PLY reader/writer for `ascii 1.0` and `binary_little_endian 1.0`.
//!
//! Recognized vertex properties: `x y z`, `nx ny nz`, `red green blue`
//! (8-bit values are rescaled to `[0, 1]`), and per-vertex `u v`/`s t`.
//! Face properties: `vertex_indices` (or `vertex_index`), an optional
//! `texcoord` list with six entries, and integer `semantic`/`label`/`class`
//! and `instance`/`object_id` labels. Unknown elements and properties are
//! skipped.

use nalgebra::{Point3, Vector2, Vector3};

use super::{Mesh, MeshError};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Result<Self, MeshError> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(MeshError::UnsupportedFormat(format!("property type {other}"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    BinaryLe,
}

/// One element record: scalar values and list values by property position.
type Record = Vec<Vec<f64>>;

fn parse_header(bytes: &[u8]) -> Result<(Format, Vec<Element>, usize), MeshError> {
    let mut pos = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut first = true;
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| MeshError::UnsupportedFormat("missing end_header".into()))?;
        let line = String::from_utf8_lossy(&bytes[pos..pos + end]);
        let line = line.trim();
        pos += end + 1;
        if first {
            if line != "ply" {
                return Err(MeshError::UnsupportedFormat("missing 'ply' magic".into()));
            }
            first = false;
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", _] => format = Some(Format::Ascii),
            ["format", "binary_little_endian", _] => format = Some(Format::BinaryLe),
            ["format", rest @ ..] => return Err(MeshError::UnsupportedFormat(format!("format {}", rest.join(" ")))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| MeshError::Malformed {
                    line: 0,
                    token: count.to_string(),
                })?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| MeshError::UnsupportedFormat("property before element".into()))?;
                el.properties.push(Property::List {
                    name: name.to_string(),
                    count: Scalar::parse(count)?,
                    item: Scalar::parse(item)?,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| MeshError::UnsupportedFormat("property before element".into()))?;
                el.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty)?,
                });
            }
            ["end_header"] => break,
            _ => return Err(MeshError::UnsupportedFormat(format!("header line {line:?}"))),
        }
    }
    let format = format.ok_or_else(|| MeshError::UnsupportedFormat("missing format line".into()))?;
    Ok((format, elements, pos))
}

fn read_ascii(body: &[u8], elements: &[Element]) -> Result<Vec<Vec<Record>>, MeshError> {
    let text = String::from_utf8_lossy(body);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut out = Vec::with_capacity(elements.len());
    for el in elements {
        let mut records = Vec::with_capacity(el.count);
        for found in 0..el.count {
            let line = lines.next().ok_or_else(|| MeshError::CountMismatch {
                element: el.name.clone(),
                expected: el.count,
                found,
            })?;
            let mut tokens = line.split_whitespace();
            let mut next = || -> Result<f64, MeshError> {
                let tok = tokens.next().ok_or_else(|| MeshError::Malformed {
                    line: 0,
                    token: line.to_string(),
                })?;
                tok.parse().map_err(|_| MeshError::Malformed {
                    line: 0,
                    token: tok.to_string(),
                })
            };
            let mut record = Vec::with_capacity(el.properties.len());
            for p in &el.properties {
                match p {
                    Property::Scalar { .. } => record.push(vec![next()?]),
                    Property::List { .. } => {
                        let n = next()? as usize;
                        record.push((0..n).map(|_| next()).collect::<Result<_, _>>()?);
                    }
                }
            }
            records.push(record);
        }
        out.push(records);
    }
    Ok(out)
}

fn read_binary(body: &[u8], elements: &[Element]) -> Result<Vec<Vec<Record>>, MeshError> {
    let mut pos = 0;
    let mut out = Vec::with_capacity(elements.len());
    for el in elements {
        let truncated = || MeshError::Truncated {
            element: el.name.clone(),
        };
        let mut take = |ty: Scalar| -> Result<f64, MeshError> {
            let bytes = body.get(pos..pos + ty.size()).ok_or_else(truncated)?;
            pos += ty.size();
            Ok(ty.read_le(bytes))
        };
        let mut records = Vec::with_capacity(el.count);
        for _ in 0..el.count {
            let mut record = Vec::with_capacity(el.properties.len());
            for p in &el.properties {
                match *p {
                    Property::Scalar { ty, .. } => record.push(vec![take(ty)?]),
                    Property::List { count, item, .. } => {
                        let n = take(count)? as usize;
                        record.push((0..n).map(|_| take(item)).collect::<Result<_, _>>()?);
                    }
                }
            }
            records.push(record);
        }
        out.push(records);
    }
    Ok(out)
}

fn column(el: &Element, names: &[&str]) -> Option<usize> {
    el.properties.iter().position(|p| names.contains(&p.name()))
}

pub fn parse_ply(bytes: &[u8]) -> Result<Mesh, MeshError> {
    let (format, elements, body_start) = parse_header(bytes)?;
    let body = &bytes[body_start..];
    let data = match format {
        Format::Ascii => read_ascii(body, &elements)?,
        Format::BinaryLe => read_binary(body, &elements)?,
    };

    let vi = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| MeshError::UnsupportedFormat("no vertex element".into()))?;
    let vel = &elements[vi];
    let (Some(cx), Some(cy), Some(cz)) = (column(vel, &["x"]), column(vel, &["y"]), column(vel, &["z"])) else {
        return Err(MeshError::UnsupportedFormat("vertex element lacks x/y/z".into()));
    };
    let normal_cols = (column(vel, &["nx"]), column(vel, &["ny"]), column(vel, &["nz"]));
    let color_cols = (
        column(vel, &["red", "r"]),
        column(vel, &["green", "g"]),
        column(vel, &["blue", "b"]),
    );
    let uv_cols = (
        column(vel, &["u", "s", "texture_u"]),
        column(vel, &["v", "t", "texture_v"]),
    );
    let color_scale = match color_cols.0.map(|c| &vel.properties[c]) {
        Some(Property::Scalar { ty: Scalar::U8, .. }) => 1.0 / 255.0,
        Some(Property::Scalar { ty: Scalar::U16, .. }) => 1.0 / 65535.0,
        _ => 1.0,
    };

    let vrec = &data[vi];
    let vertices: Vec<Point3<f64>> = vrec.iter().map(|r| Point3::new(r[cx][0], r[cy][0], r[cz][0])).collect();
    let vertex_normals = match normal_cols {
        (Some(a), Some(b), Some(c)) => {
            let ns: Vec<Vector3<f64>> = vrec.iter().map(|r| Vector3::new(r[a][0], r[b][0], r[c][0])).collect();
            // Files often carry zero or unnormalized normals; keep only a usable set.
            ns.iter()
                .all(|n| n.norm() > 0.0)
                .then(|| ns.iter().map(|n| n.normalize()).collect())
        }
        _ => None,
    };
    let vertex_colors = match color_cols {
        (Some(a), Some(b), Some(c)) => Some(
            vrec.iter()
                .map(|r| Vector3::new(r[a][0], r[b][0], r[c][0]) * color_scale)
                .collect(),
        ),
        _ => None,
    };
    let vertex_uvs: Option<Vec<Vector2<f64>>> = match uv_cols {
        (Some(a), Some(b)) => Some(vrec.iter().map(|r| Vector2::new(r[a][0], r[b][0])).collect()),
        _ => None,
    };

    let mut faces = Vec::new();
    let mut corner_uvs: Vec<Vector2<f64>> = Vec::new();
    let mut have_corner_uvs = false;
    let mut semantic = Vec::new();
    let mut instance = Vec::new();
    let mut dropped = 0;
    let mut label_cols = (None, None);
    if let Some(fi) = elements.iter().position(|e| e.name == "face") {
        let fel = &elements[fi];
        let ci = column(fel, &["vertex_indices", "vertex_index"])
            .ok_or_else(|| MeshError::UnsupportedFormat("face element lacks vertex_indices".into()))?;
        let tc = column(fel, &["texcoord"]);
        label_cols = (
            column(fel, &["semantic", "label", "class"]),
            column(fel, &["instance", "object_id", "instance_id"]),
        );
        have_corner_uvs = tc.is_some();
        for (rec_idx, r) in data[fi].iter().enumerate() {
            let idx = &r[ci];
            if idx.len() < 3 {
                return Err(MeshError::FaceTooSmall {
                    line: rec_idx,
                    found: idx.len(),
                });
            }
            for &v in idx {
                if v < 0.0 || v as usize >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        face: rec_idx,
                        index: v as i64,
                        count: vertices.len(),
                    });
                }
            }
            let tex = tc.map(|c| &r[c]);
            for k in 1..idx.len() - 1 {
                let tri = [idx[0] as u32, idx[k] as u32, idx[k + 1] as u32];
                if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                    dropped += 1;
                    continue;
                }
                faces.push(tri);
                for corner in [0, k, k + 1] {
                    let uv = match tex {
                        Some(t) if t.len() >= 2 * idx.len() => Vector2::new(t[2 * corner], t[2 * corner + 1]),
                        Some(_) => {
                            have_corner_uvs = false;
                            Vector2::zeros()
                        }
                        None => Vector2::zeros(),
                    };
                    corner_uvs.push(uv);
                }
                if let Some(c) = label_cols.0 {
                    semantic.push(r[c][0] as u32);
                }
                if let Some(c) = label_cols.1 {
                    instance.push(r[c][0] as u32);
                }
            }
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} faces with repeated vertex indices");
    }

    let uvs = if have_corner_uvs {
        Some(corner_uvs)
    } else {
        vertex_uvs.map(|per_vertex| {
            faces
                .iter()
                .flat_map(|f| f.iter().map(|&v| per_vertex[v as usize]))
                .collect()
        })
    };

    let mesh = Mesh {
        vertices,
        faces,
        vertex_normals,
        uvs,
        vertex_colors,
        semantic_labels: label_cols.0.map(|_| semantic),
        instance_labels: label_cols.1.map(|_| instance),
        texture: None,
        curvature: None,
        dropped_faces: dropped,
    };
    mesh.check()?;
    Ok(mesh)
}

fn header(mesh: &Mesh, format: &str) -> String {
    let mut h = format!(
        "ply\nformat {format} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
        mesh.vertices.len()
    );
    if mesh.vertex_normals.is_some() {
        h += "property double nx\nproperty double ny\nproperty double nz\n";
    }
    if mesh.vertex_colors.is_some() {
        h += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    }
    h += &format!(
        "element face {}\nproperty list uchar int vertex_indices\n",
        mesh.faces.len()
    );
    if mesh.uvs.is_some() {
        h += "property list uchar double texcoord\n";
    }
    if mesh.semantic_labels.is_some() {
        h += "property int semantic\n";
    }
    if mesh.instance_labels.is_some() {
        h += "property int instance\n";
    }
    h + "end_header\n"
}

fn color_byte(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_ply_ascii(mesh: &Mesh) -> String {
    use std::fmt::Write;
    let mut out = header(mesh, "ascii");
    for (i, v) in mesh.vertices.iter().enumerate() {
        let _ = write!(out, "{} {} {}", v.x, v.y, v.z);
        if let Some(n) = &mesh.vertex_normals {
            let _ = write!(out, " {} {} {}", n[i].x, n[i].y, n[i].z);
        }
        if let Some(c) = &mesh.vertex_colors {
            let c = c[i];
            let _ = write!(out, " {} {} {}", color_byte(c.x), color_byte(c.y), color_byte(c.z));
        }
        out.push('\n');
    }
    for (fi, f) in mesh.faces.iter().enumerate() {
        let _ = write!(out, "3 {} {} {}", f[0], f[1], f[2]);
        if let Some(uvs) = &mesh.uvs {
            out.push_str(" 6");
            for t in &uvs[3 * fi..3 * fi + 3] {
                let _ = write!(out, " {} {}", t.x, t.y);
            }
        }
        if let Some(l) = &mesh.semantic_labels {
            let _ = write!(out, " {}", l[fi]);
        }
        if let Some(l) = &mesh.instance_labels {
            let _ = write!(out, " {}", l[fi]);
        }
        out.push('\n');
    }
    out
}

pub fn write_ply_binary(mesh: &Mesh) -> Vec<u8> {
    let mut out = header(mesh, "binary_little_endian").into_bytes();
    for (i, v) in mesh.vertices.iter().enumerate() {
        for x in [v.x, v.y, v.z] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        if let Some(n) = &mesh.vertex_normals {
            for x in [n[i].x, n[i].y, n[i].z] {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        if let Some(c) = &mesh.vertex_colors {
            out.extend([color_byte(c[i].x), color_byte(c[i].y), color_byte(c[i].z)]);
        }
    }
    for (fi, f) in mesh.faces.iter().enumerate() {
        out.push(3);
        for &v in f {
            out.extend_from_slice(&(v as i32).to_le_bytes());
        }
        if let Some(uvs) = &mesh.uvs {
            out.push(6);
            for t in &uvs[3 * fi..3 * fi + 3] {
                out.extend_from_slice(&t.x.to_le_bytes());
                out.extend_from_slice(&t.y.to_le_bytes());
            }
        }
        if let Some(l) = &mesh.semantic_labels {
            out.extend_from_slice(&(l[fi] as i32).to_le_bytes());
        }
        if let Some(l) = &mesh.instance_labels {
            out.extend_from_slice(&(l[fi] as i32).to_le_bytes());
        }
    }
    out
}
