use nalgebra::{Point3, Vector3};

use super::{intersect_triangle, AccelError, Hit, Ray};
use crate::mesh::Mesh;

const BINS: usize = 16;
const MAX_LEAF: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    pub fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.min[k] && other.max[k] <= self.max[k])
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    pub fn half_area(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let d = self.max - self.min;
        d.x * d.y + d.y * d.z + d.z * d.x
    }

    /// Slab test; returns the entry parameter when the ray overlaps the box
    /// within `[t_min, t_max]`.
    #[inline]
    pub fn hit(&self, origin: &Point3<f64>, inv_dir: &Vector3<f64>, t_min: f64, t_max: f64) -> Option<f64> {
        let mut near = t_min;
        let mut far = t_max;
        for k in 0..3 {
            if inv_dir[k].is_infinite() {
                // Direction parallel to this slab.
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let mut t0 = (self.min[k] - origin[k]) * inv_dir[k];
            let mut t1 = (self.max[k] - origin[k]) * inv_dir[k];
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            // Conservative rounding for the far plane.
            t1 *= 1.0 + 4.0 * f64::EPSILON;
            near = near.max(t0);
            far = far.min(t1);
            if near > far {
                return None;
            }
        }
        Some(near)
    }
}

/// Flattened node. Leaves reference `count > 0` faces starting at `start` in
/// the permutation; interior nodes have their left child at `index + 1` and
/// the right child at `start`.
#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    start: u32,
    count: u32,
}

/// Counters filled by instrumented traversals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraversalStats {
    pub nodes_visited: usize,
    pub faces_tested: usize,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

/// Face bounds padded so that hits accepted within the barycentric edge
/// tolerance still fall inside their box.
fn face_bounds(mesh: &Mesh, face: usize) -> Aabb {
    let tri = mesh.triangle(face);
    let mut b = Aabb::empty();
    for p in &tri {
        b.grow(p);
    }
    let extent = (b.max - b.min).amax();
    let scale = b.min.coords.amax().max(b.max.coords.amax());
    let pad = 1e-5 * extent + 1e-12 * scale.max(1.0);
    b.min -= Vector3::repeat(pad);
    b.max += Vector3::repeat(pad);
    b
}

struct Builder<'a> {
    bounds: &'a [Aabb],
    centroids: &'a [Point3<f64>],
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, faces: &mut [u32], offset: usize) -> usize {
        let node_index = self.nodes.len();
        let bounds = faces
            .iter()
            .fold(Aabb::empty(), |acc, &f| acc.union(&self.bounds[f as usize]));
        self.nodes.push(Node {
            bounds,
            start: offset as u32,
            count: faces.len() as u32,
        });
        if faces.len() <= MAX_LEAF {
            return node_index;
        }

        let mid = self.split(faces);
        let (left, right) = faces.split_at_mut(mid);
        self.build(left, offset);
        let right_index = self.build(right, offset + mid);
        self.nodes[node_index].start = right_index as u32;
        self.nodes[node_index].count = 0;
        node_index
    }

    /// Partitions `faces` in place and returns the split position, which is
    /// always strictly inside the slice.
    fn split(&self, faces: &mut [u32]) -> usize {
        let mut cb = Aabb::empty();
        for &f in faces.iter() {
            cb.grow(&self.centroids[f as usize]);
        }
        let extent = cb.max - cb.min;

        let mut best: Option<(f64, usize, usize)> = None;
        for axis in 0..3 {
            if extent[axis] <= 0.0 {
                continue;
            }
            let bin_of = |f: u32| {
                let c = self.centroids[f as usize][axis];
                (((c - cb.min[axis]) / extent[axis] * BINS as f64) as usize).min(BINS - 1)
            };
            let mut counts = [0usize; BINS];
            let mut boxes = [Aabb::empty(); BINS];
            for &f in faces.iter() {
                let b = bin_of(f);
                counts[b] += 1;
                boxes[b] = boxes[b].union(&self.bounds[f as usize]);
            }
            let mut left_area = [0.0; BINS];
            let mut left_count = [0usize; BINS];
            let mut acc = Aabb::empty();
            let mut n = 0;
            for i in 0..BINS - 1 {
                acc = acc.union(&boxes[i]);
                n += counts[i];
                left_area[i] = acc.half_area();
                left_count[i] = n;
            }
            let mut acc = Aabb::empty();
            let mut n = 0;
            for i in (1..BINS).rev() {
                acc = acc.union(&boxes[i]);
                n += counts[i];
                let l = left_count[i - 1];
                if l == 0 || n == 0 {
                    continue;
                }
                let cost = left_area[i - 1] * l as f64 + acc.half_area() * n as f64;
                if best.is_none_or(|(c, _, _)| cost < c) {
                    best = Some((cost, axis, i));
                }
            }
        }

        match best {
            Some((_, axis, bin)) => {
                let threshold = |f: &u32| {
                    let c = self.centroids[*f as usize][axis];
                    (((c - cb.min[axis]) / extent[axis] * BINS as f64) as usize).min(BINS - 1) < bin
                };
                // Stable partition keeps the layout independent of sort internals.
                let (mut left, right): (Vec<u32>, Vec<u32>) = faces.iter().copied().partition(threshold);
                let mid = left.len();
                left.extend(right);
                faces.copy_from_slice(&left);
                mid
            }
            // All centroids coincide: split by face id.
            None => {
                faces.sort_unstable();
                faces.len() / 2
            }
        }
    }
}

impl Bvh {
    pub fn build(mesh: &Mesh) -> Result<Self, AccelError> {
        if mesh.faces.is_empty() {
            return Err(AccelError::EmptyMesh);
        }
        let bounds: Vec<Aabb> = (0..mesh.faces.len()).map(|f| face_bounds(mesh, f)).collect();
        let centroids: Vec<Point3<f64>> = (0..mesh.faces.len())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                Point3::from((a.coords + b.coords + c.coords) / 3.0)
            })
            .collect();
        let mut order: Vec<u32> = (0..mesh.faces.len() as u32).collect();
        let mut builder = Builder {
            bounds: &bounds,
            centroids: &centroids,
            nodes: Vec::with_capacity(2 * mesh.faces.len() / MAX_LEAF + 1),
        };
        builder.build(&mut order, 0);
        Ok(Bvh {
            nodes: builder.nodes,
            order,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root_bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Bounds of the root's two children, or `None` when the root is a leaf.
    pub fn root_children(&self) -> Option<(Aabb, Aabb)> {
        let root = &self.nodes[0];
        (root.count == 0).then(|| (self.nodes[1].bounds, self.nodes[root.start as usize].bounds))
    }

    /// Face permutation in leaf order.
    pub fn face_order(&self) -> &[u32] {
        &self.order
    }

    /// Every leaf as (bounds, faces).
    pub fn leaves(&self) -> impl Iterator<Item = (Aabb, &[u32])> {
        self.nodes.iter().filter(|n| n.count > 0).map(|n| {
            let s = n.start as usize;
            (n.bounds, &self.order[s..s + n.count as usize])
        })
    }

    /// Checks that every face box sits inside every ancestor box.
    pub fn check_containment(&self, mesh: &Mesh) -> bool {
        fn walk(bvh: &Bvh, mesh: &Mesh, node: usize, ancestors: &mut Vec<Aabb>) -> bool {
            let n = bvh.nodes[node];
            ancestors.push(n.bounds);
            let ok = if n.count > 0 {
                let s = n.start as usize;
                bvh.order[s..s + n.count as usize].iter().all(|&f| {
                    let fb = face_bounds(mesh, f as usize);
                    ancestors.iter().all(|a| a.contains(&fb))
                })
            } else {
                walk(bvh, mesh, node + 1, ancestors) && walk(bvh, mesh, n.start as usize, ancestors)
            };
            ancestors.pop();
            ok
        }
        walk(self, mesh, 0, &mut Vec::new())
    }

    fn inv_dir(ray: &Ray) -> Vector3<f64> {
        ray.direction.map(|d| 1.0 / d)
    }

    pub fn closest_hit(&self, mesh: &Mesh, ray: &Ray, stats: &mut TraversalStats) -> Option<Hit> {
        let inv = Self::inv_dir(ray);
        let mut best: Option<Hit> = None;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        let mut node = 0usize;
        stats.nodes_visited += 1;
        self.nodes[0].bounds.hit(&ray.origin, &inv, ray.t_min, ray.t_max)?;
        loop {
            let n = &self.nodes[node];
            if n.count > 0 {
                let s = n.start as usize;
                for &f in &self.order[s..s + n.count as usize] {
                    stats.faces_tested += 1;
                    if let Some((t, barycentric)) = intersect_triangle(ray, &mesh.triangle(f as usize)) {
                        let hit = Hit {
                            face_id: f,
                            t,
                            barycentric,
                        };
                        if best.is_none_or(|b| hit.precedes(&b)) {
                            best = Some(hit);
                        }
                    }
                }
            } else {
                // Ties at exactly `best.t` must still be visited so the lowest face id wins.
                let limit = best.map_or(ray.t_max, |b| b.t);
                let left = node + 1;
                let right = n.start as usize;
                stats.nodes_visited += 2;
                let hl = self.nodes[left].bounds.hit(&ray.origin, &inv, ray.t_min, limit);
                let hr = self.nodes[right].bounds.hit(&ray.origin, &inv, ray.t_min, limit);
                match (hl, hr) {
                    (Some(a), Some(b)) => {
                        let (near, far) = if a <= b { (left, right) } else { (right, left) };
                        stack.push(far as u32);
                        node = near;
                        continue;
                    }
                    (Some(_), None) => {
                        node = left;
                        continue;
                    }
                    (None, Some(_)) => {
                        node = right;
                        continue;
                    }
                    (None, None) => {}
                }
            }
            // Pop, re-checking boxes against the tightened bound.
            loop {
                let Some(candidate) = stack.pop() else {
                    return best;
                };
                let candidate = candidate as usize;
                let limit = best.map_or(ray.t_max, |b| b.t);
                if self.nodes[candidate]
                    .bounds
                    .hit(&ray.origin, &inv, ray.t_min, limit)
                    .is_some()
                {
                    node = candidate;
                    break;
                }
            }
        }
    }

    /// True if any face is hit within the ray bounds.
    pub fn any_hit(&self, mesh: &Mesh, ray: &Ray) -> bool {
        let inv = Self::inv_dir(ray);
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(node) = stack.pop() {
            let n = &self.nodes[node];
            if n.bounds.hit(&ray.origin, &inv, ray.t_min, ray.t_max).is_none() {
                continue;
            }
            if n.count > 0 {
                let s = n.start as usize;
                if self.order[s..s + n.count as usize]
                    .iter()
                    .any(|&f| intersect_triangle(ray, &mesh.triangle(f as usize)).is_some())
                {
                    return true;
                }
            } else {
                stack.push(n.start as usize);
                stack.push(node + 1);
            }
        }
        false
    }

    /// All hit parameters within the ray bounds, sorted ascending.
    pub fn all_hits(&self, mesh: &Mesh, ray: &Ray) -> Vec<f64> {
        let inv = Self::inv_dir(ray);
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let n = &self.nodes[node];
            if n.bounds.hit(&ray.origin, &inv, ray.t_min, ray.t_max).is_none() {
                continue;
            }
            if n.count > 0 {
                let s = n.start as usize;
                for &f in &self.order[s..s + n.count as usize] {
                    if let Some((t, _)) = intersect_triangle(ray, &mesh.triangle(f as usize)) {
                        out.push(t);
                    }
                }
            } else {
                stack.push(n.start as usize);
                stack.push(node + 1);
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }
}
