//! Procedural meshes used as test scenes and demo inputs.
//!
//! Box-like shapes are closed, welded and outward oriented. Every quad is
//! split along the diagonal joining its even-parity grid corners, which keeps
//! corner neighborhoods of an axis-aligned cube symmetric.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::mesh::Mesh;

pub fn single_triangle() -> Mesh {
    Mesh::new(
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ],
        vec![[0, 1, 2]],
    )
    .expect("valid triangle")
}

/// Square `size × size` grid in the z = 0 plane, centered at the origin,
/// `n × n` cells, facing +z.
pub fn grid(size: f64, n: usize) -> Mesh {
    let n = n.max(1);
    let coord = |i: usize| -size / 2.0 + size * i as f64 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point3::new(coord(i), coord(j), 0.0));
        }
    }
    let id = |i: usize, j: usize| (j * (n + 1) + i) as u32;
    let mut faces = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            push_quad(
                &mut faces,
                [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)],
                (i + j) % 2 == 0,
            );
        }
    }
    Mesh::new(vertices, faces).expect("valid grid")
}

/// Counter-clockwise quad `[a, b, c, d]`, split along `a–c` when
/// `even_first`, otherwise along `b–d`.
fn push_quad(faces: &mut Vec<[u32; 3]>, q: [u32; 4], even_first: bool) {
    if even_first {
        faces.push([q[0], q[1], q[2]]);
        faces.push([q[0], q[2], q[3]]);
    } else {
        faces.push([q[0], q[1], q[3]]);
        faces.push([q[1], q[2], q[3]]);
    }
}

/// Closed axis-aligned box with `n × n` cells per side, outward normals.
pub fn cuboid(min: Point3<f64>, max: Point3<f64>, n: usize) -> Mesh {
    let n = n.max(1);
    let mut index: HashMap<[u64; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut vertex = |g: [usize; 3]| -> u32 {
        let p = Point3::new(
            min.x + (max.x - min.x) * g[0] as f64 / n as f64,
            min.y + (max.y - min.y) * g[1] as f64 / n as f64,
            min.z + (max.z - min.z) * g[2] as f64 / n as f64,
        );
        let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
        *index.entry(key).or_insert_with(|| {
            vertices.push(p);
            (vertices.len() - 1) as u32
        })
    };
    let mut faces = Vec::with_capacity(12 * n * n);
    // (normal axis, side, u axis, v axis) with u × v pointing outward.
    let sides = [
        (0, n, 1, 2),
        (0, 0, 2, 1),
        (1, n, 2, 0),
        (1, 0, 0, 2),
        (2, n, 0, 1),
        (2, 0, 1, 0),
    ];
    for (axis, side, u, v) in sides {
        for j in 0..n {
            for i in 0..n {
                let corner = |di: usize, dj: usize| {
                    let mut g = [0; 3];
                    g[axis] = side;
                    g[u] = i + di;
                    g[v] = j + dj;
                    g
                };
                let c = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                let even = c[0].iter().sum::<usize>() % 2 == 0;
                let q = c.map(&mut vertex);
                push_quad(&mut faces, q, even);
            }
        }
    }
    Mesh::new(vertices, faces).expect("valid cuboid")
}

/// Cube of edge `size` centered at the origin.
pub fn cube(size: f64, n: usize) -> Mesh {
    let h = size / 2.0;
    cuboid(Point3::new(-h, -h, -h), Point3::new(h, h, h), n)
}

/// Icosahedron subdivided `level` times and projected onto a sphere of the
/// given radius centered at the origin.
pub fn icosphere(radius: f64, level: usize) -> Mesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3<f64>> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vector3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| -> u32 {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) / 2.0).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = vertices.into_iter().map(|v| Point3::from(v * radius)).collect();
    Mesh::new(vertices, faces).expect("valid icosphere")
}

/// Concatenates meshes. Labels and colors are kept only when every part has
/// them.
pub fn merge(parts: &[Mesh]) -> Mesh {
    let mut out = Mesh::default();
    let all_colors = parts.iter().all(|p| p.vertex_colors.is_some());
    let all_semantic = parts.iter().all(|p| p.semantic_labels.is_some());
    let all_instance = parts.iter().all(|p| p.instance_labels.is_some());
    let mut colors = Vec::new();
    let mut semantic = Vec::new();
    let mut instance = Vec::new();
    for p in parts {
        let offset = out.vertices.len() as u32;
        out.vertices.extend_from_slice(&p.vertices);
        out.faces.extend(p.faces.iter().map(|f| f.map(|v| v + offset)));
        if all_colors {
            colors.extend_from_slice(p.vertex_colors.as_ref().unwrap());
        }
        if all_semantic {
            semantic.extend_from_slice(p.semantic_labels.as_ref().unwrap());
        }
        if all_instance {
            instance.extend_from_slice(p.instance_labels.as_ref().unwrap());
        }
    }
    out.vertex_colors = all_colors.then_some(colors);
    out.semantic_labels = all_semantic.then_some(semantic);
    out.instance_labels = all_instance.then_some(instance);
    out
}

fn labelled(mut m: Mesh, semantic: u32, instance: u32, color: [f64; 3]) -> Mesh {
    let base = Vector3::from(color);
    m.vertex_colors = Some(
        m.vertices
            .iter()
            .map(|p| {
                // Coarse positional checker so RGB carries texture edges.
                let cell = (p.x * 2.0).floor() + (p.y * 2.0).floor() + (p.z * 2.0).floor();
                let k = if cell.rem_euclid(2.0) == 0.0 { 1.0 } else { 0.7 };
                base * k
            })
            .collect(),
    );
    m.semantic_labels = Some(vec![semantic; m.faces.len()]);
    m.instance_labels = Some(vec![instance; m.faces.len()]);
    m
}

pub const LABEL_FLOOR: u32 = 1;
pub const LABEL_WALL: u32 = 2;
pub const LABEL_BOX: u32 = 3;

/// A 6 m × 5 m room without a ceiling: floor slab, four 0.2 m thick walls
/// and three boxes, all closed solids (516 faces). Walls and boxes are sunk
/// slightly into the floor so no two solids share a coplanar face.
pub fn room() -> Mesh {
    let p = Point3::new;
    let mut parts = vec![labelled(
        cuboid(p(-3.0, -2.5, -0.2), p(3.0, 2.5, 0.0), 2),
        LABEL_FLOOR,
        1,
        [0.55, 0.45, 0.35],
    )];
    let walls = [
        (p(-3.0, -2.5, -0.05), p(-2.8, 2.5, 2.5)),
        (p(2.8, -2.5, -0.05), p(3.0, 2.5, 2.5)),
        (p(-2.9, -2.5, -0.05), p(2.9, -2.3, 2.5)),
        (p(-2.9, 2.3, -0.05), p(2.9, 2.5, 2.5)),
    ];
    for (i, (lo, hi)) in walls.into_iter().enumerate() {
        parts.push(labelled(cuboid(lo, hi, 3), LABEL_WALL, 2 + i as u32, [0.85, 0.85, 0.8]));
    }
    let boxes = [
        (p(-1.8, -1.5, -0.05), p(-0.8, -0.5, 0.8), [0.8, 0.2, 0.2]),
        (p(0.5, 0.3, -0.05), p(1.7, 1.5, 1.1), [0.2, 0.6, 0.25]),
        (p(-0.5, 1.0, -0.05), p(0.3, 1.8, 0.5), [0.2, 0.3, 0.8]),
    ];
    for (i, (lo, hi, color)) in boxes.into_iter().enumerate() {
        parts.push(labelled(cuboid(lo, hi, 1), LABEL_BOX, 6 + i as u32, color));
    }
    let mesh = merge(&parts);
    mesh.check().expect("valid room");
    mesh
}

/// Far wall at z = -6 (8 m square) and a 1 m square occluder at z = -3, both
/// facing +z; meant to be viewed from the origin looking down -z.
pub fn occluder_scene() -> Mesh {
    let mut far = grid(8.0, 4);
    far.vertices.iter_mut().for_each(|v| v.z = -6.0);
    let mut near = grid(1.0, 1);
    near.vertices.iter_mut().for_each(|v| v.z = -3.0);
    merge(&[far, near])
}
