//! Depth-aware synthetic defocus.

use super::{CueImage, CueKind};

/// Pixels of blur per unit of `aperture * |1/d - 1/focus|` (px·m).
pub const DEFAULT_COC_SCALE: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefocusParams {
    /// Distance of the focal plane, same units as the depth cue.
    pub focus_distance: f64,
    pub aperture: f64,
    pub coc_scale: f64,
    /// Upper bound on the blur radius in pixels.
    pub max_coc_px: Option<f64>,
}

impl Default for RefocusParams {
    fn default() -> Self {
        RefocusParams {
            focus_distance: 2.0,
            aperture: 0.0,
            coc_scale: DEFAULT_COC_SCALE,
            max_coc_px: None,
        }
    }
}

/// Circle-of-confusion radius in pixels for a surface at depth `d`.
pub fn coc_radius(d: f64, p: &RefocusParams) -> f64 {
    let r = p.coc_scale * p.aperture * (1.0 / d - 1.0 / p.focus_distance).abs();
    match p.max_coc_px {
        Some(cap) => r.min(cap),
        None => r,
    }
}

/// Gather blur of `rgb` by per-pixel discs. Pixel `q` contributes to `p` only
/// when both blur discs reach: `|p - q| <= r(p)` and `|p - q| <= r(q)`. The
/// second condition stops sharp pixels from smearing over their neighbours,
/// so an in-focus surface keeps its exact values. Pixels without depth neither
/// give nor receive blur. Weights are uniform and renormalized at borders.
pub fn refocus(rgb: &CueImage, depth: &CueImage, params: &RefocusParams) -> CueImage {
    let (w, h) = (rgb.width as isize, rgb.height as isize);
    let n = rgb.pixel_count();
    let radius: Vec<f64> = (0..n)
        .map(|i| {
            let d = depth.data[i] as f64;
            if d > 0.0 {
                coc_radius(d, params)
            } else {
                f64::NAN
            }
        })
        .collect();
    let mut out = rgb.clone();
    out.kind = CueKind::RgbRefocused;
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            let rp = radius[i];
            if !(rp > 0.0) {
                continue;
            }
            let reach = rp.floor() as isize;
            let rp2 = rp * rp;
            let mut acc = [0.0f64; 3];
            let mut count = 0usize;
            for qy in (y - reach).max(0)..=(y + reach).min(h - 1) {
                for qx in (x - reach).max(0)..=(x + reach).min(w - 1) {
                    let d2 = ((qx - x) * (qx - x) + (qy - y) * (qy - y)) as f64;
                    let j = (qy * w + qx) as usize;
                    let rq = radius[j];
                    // NaN radius (no depth) fails both comparisons.
                    if d2 <= rp2 && d2 <= rq * rq {
                        let c = rgb.pixel(j);
                        acc[0] += c[0] as f64;
                        acc[1] += c[1] as f64;
                        acc[2] += c[2] as f64;
                        count += 1;
                    }
                }
            }
            let px = out.pixel_mut(i);
            for c in 0..3 {
                px[c] = (acc[c] / count as f64) as f32;
            }
        }
    }
    out
}
