//! Image-space operators for the derived edge and keypoint cues.

use super::{CueImage, CueKind, GBuffer};

/// Relative depth gap above which a pixel is an occlusion edge.
pub const DEFAULT_OCCLUSION_THRESHOLD: f64 = 0.03;
pub const HARRIS_K: f64 = 0.04;

/// Nearest-rank percentile of `values` (`q` in `[0, 1]`); 0 when empty.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Scale so the 99th percentile maps to 1 (the maximum if that percentile is
/// 0), then clamp to `[0, 1]`. All-zero input stays zero.
fn normalize_p99(values: &mut [f64], population: &[f64]) {
    let mut s = percentile(population, 0.99);
    if s <= 0.0 {
        s = population.iter().copied().fold(0.0, f64::max);
    }
    if s <= 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    values.iter_mut().for_each(|v| *v = (*v / s).clamp(0.0, 1.0));
}

/// Rec. 601 luma of an rgb cue.
pub fn luma(rgb: &CueImage) -> Vec<f64> {
    rgb.data
        .chunks(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

struct Plane<'a> {
    w: usize,
    h: usize,
    v: &'a [f64],
}

impl Plane<'_> {
    /// Clamp-to-edge read.
    fn at(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.v[y * self.w + x]
    }
}

/// Separable 3x3 [1 2 1]/4 blur with edge clamping.
fn gaussian3(v: &[f64], w: usize, h: usize) -> Vec<f64> {
    let src = Plane { w, h, v };
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            tmp[y * w + x] = (src.at(xi - 1, yi) + 2.0 * src.at(xi, yi) + src.at(xi + 1, yi)) / 4.0;
        }
    }
    let mid = Plane { w, h, v: &tmp };
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            out[y * w + x] = (mid.at(xi, yi - 1) + 2.0 * mid.at(xi, yi) + mid.at(xi, yi + 1)) / 4.0;
        }
    }
    out
}

/// Sobel x/y derivatives with edge clamping (x grows right, y grows down).
fn sobel(v: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let p = Plane { w, h, v };
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (x, y) = (x as isize, y as isize);
            let i = y as usize * w + x as usize;
            gx[i] = (p.at(x + 1, y - 1) + 2.0 * p.at(x + 1, y) + p.at(x + 1, y + 1))
                - (p.at(x - 1, y - 1) + 2.0 * p.at(x - 1, y) + p.at(x - 1, y + 1));
            gy[i] = (p.at(x - 1, y + 1) + 2.0 * p.at(x, y + 1) + p.at(x + 1, y + 1))
                - (p.at(x - 1, y - 1) + 2.0 * p.at(x, y - 1) + p.at(x + 1, y - 1));
        }
    }
    (gx, gy)
}

fn single_channel(kind: CueKind, like: &CueImage, values: &[f64]) -> CueImage {
    let mut img = CueImage::zeros(kind, like.width, like.height);
    for (o, v) in img.data.iter_mut().zip(values) {
        *o = *v as f32;
    }
    img
}

/// Binary occlusion edges from z-buffer depth. A valid pixel fires when the
/// relative gap `|d_p - d_q| / min(d_p, d_q)` to some 4-neighbour exceeds
/// `threshold`; missing neighbours count as infinitely far.
pub fn edges_occlusion(depth: &CueImage, threshold: f64) -> CueImage {
    let (w, h) = (depth.width as isize, depth.height as isize);
    let d = |x: isize, y: isize| {
        let v = depth.data[(y * w + x) as usize] as f64;
        if v > 0.0 {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut out = CueImage::zeros(CueKind::EdgesOcclusion, depth.width, depth.height);
    for y in 0..h {
        for x in 0..w {
            let dp = d(x, y);
            if dp.is_infinite() {
                continue;
            }
            let fires = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    return false;
                }
                let dq = d(nx, ny);
                (dp - dq).abs() / dp.min(dq) > threshold
            });
            if fires {
                out.data[(y * w + x) as usize] = 1.0;
            }
        }
    }
    out
}

/// Sobel gradient magnitude of the blurred luma, scaled by its 99th
/// percentile and clamped to `[0, 1]`.
pub fn edges_texture(rgb: &CueImage) -> CueImage {
    let (w, h) = (rgb.width as usize, rgb.height as usize);
    let smooth = gaussian3(&luma(rgb), w, h);
    let (gx, gy) = sobel(&smooth, w, h);
    let mut mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let population = mag.clone();
    normalize_p99(&mut mag, &population);
    single_channel(CueKind::EdgesTexture, rgb, &mag)
}

/// Raw Harris response `det(M) - k tr(M)^2` on luma, with `M` the
/// Gaussian-weighted 3x3 structure tensor of Sobel gradients. Negative
/// (edge-like) responses are clamped to 0.
pub fn harris_response(rgb: &CueImage) -> Vec<f64> {
    let (w, h) = (rgb.width as usize, rgb.height as usize);
    let (gx, gy) = sobel(&luma(rgb), w, h);
    let xx: Vec<f64> = gx.iter().map(|g| g * g).collect();
    let yy: Vec<f64> = gy.iter().map(|g| g * g).collect();
    let xy: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a * b).collect();
    let (sxx, syy, sxy) = (gaussian3(&xx, w, h), gaussian3(&yy, w, h), gaussian3(&xy, w, h));
    (0..w * h)
        .map(|i| {
            let det = sxx[i] * syy[i] - sxy[i] * sxy[i];
            let tr = sxx[i] + syy[i];
            (det - HARRIS_K * tr * tr).max(0.0)
        })
        .collect()
}

pub fn keypoints_2d(rgb: &CueImage) -> CueImage {
    let mut r = harris_response(rgb);
    let population = r.clone();
    normalize_p99(&mut r, &population);
    single_channel(CueKind::Keypoints2d, rgb, &r)
}

/// Curvature saliency: `|mean curvature|` scaled by its 99th percentile over
/// hit pixels, then a 3x3 max filter over hit pixels. Misses are 0.
pub fn keypoints_3d(curvature: &CueImage, g: &GBuffer) -> CueImage {
    let (w, h) = (g.width as usize, g.height as usize);
    let mask = g.hit_mask();
    let mut sal: Vec<f64> = (0..w * h)
        .map(|i| {
            if mask[i] {
                curvature.pixel(i)[0].abs() as f64
            } else {
                0.0
            }
        })
        .collect();
    let population: Vec<f64> = sal.iter().zip(&mask).filter(|(_, m)| **m).map(|(v, _)| *v).collect();
    normalize_p99(&mut sal, &population);
    let mut out = CueImage::zeros(CueKind::Keypoints3d, g.width, g.height);
    for y in 0..h {
        for x in 0..w {
            if !mask[y * w + x] {
                continue;
            }
            let mut best = 0.0f64;
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    if mask[ny * w + nx] {
                        best = best.max(sal[ny * w + nx]);
                    }
                }
            }
            out.data[y * w + x] = best as f32;
        }
    }
    out
}
