//! PNG encodings for cue images.
//!
//! | cue | format | value |
//! |---|---|---|
//! | rgb, rgb_refocused, normals | 8-bit RGB | `round(v * 255)` |
//! | reshading, edges, keypoints | 8-bit gray | `round(v * 255)` |
//! | mask_valid | 8-bit gray | 0 or 255 |
//! | segmentation | 8-bit palette (ids <= 255) or 16-bit gray | label id |
//! | depths | 16-bit gray | `round(d / d_max * 65535)`, `d_max` per image |
//! | curvature | 16-bit RGB | `round((k / s * 0.5 + 0.5) * 65535)` for (mean, gaussian, -), `s` per channel |

use std::io::Cursor;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::render::{CueImage, CueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Rgb8,
    Gray8,
    Mask8,
    Palette8,
    Gray16,
    Depth16,
    Curvature16,
}

/// Decoding metadata recorded in the manifest for each cue file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueEncoding {
    pub encoding: Encoding,
    /// Depth that maps to 65535.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_max: Option<f64>,
    /// Per-channel symmetric scale of a signed 16-bit cue.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Vec<f64>>,
}

fn io_err(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn check_finite(img: &CueImage) -> Result<(), PipelineError> {
    if let Some(i) = img.data.iter().position(|v| !v.is_finite()) {
        let px = i / img.channels;
        return Err(PipelineError::NonFinite {
            cue: img.kind,
            x: px as u32 % img.width,
            y: px as u32 / img.width,
        });
    }
    Ok(())
}

fn unit8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn unit16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Stable color for a label id; 0 is black.
fn palette_color(id: usize) -> [u8; 3] {
    if id == 0 {
        return [0, 0, 0];
    }
    [
        (id * 97 % 256) as u8,
        ((id * 57 + 80) % 256) as u8,
        ((id * 151 + 160) % 256) as u8,
    ]
}

fn encode_png(
    w: u32,
    h: u32,
    color: png::ColorType,
    depth: png::BitDepth,
    palette: Option<Vec<u8>>,
    data: &[u8],
) -> Result<Vec<u8>, PipelineError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w, h);
        enc.set_color(color);
        enc.set_depth(depth);
        if let Some(p) = palette {
            enc.set_palette(p);
        }
        let mut writer = enc.write_header().map_err(|e| PipelineError::Encode(e.to_string()))?;
        writer
            .write_image_data(data)
            .map_err(|e| PipelineError::Encode(e.to_string()))?;
    }
    Ok(out)
}

/// PNG bytes and metadata for `img`.
pub fn encode_cue_image(img: &CueImage) -> Result<(Vec<u8>, CueEncoding), PipelineError> {
    use png::{BitDepth, ColorType};
    check_finite(img)?;
    let (w, h) = (img.width, img.height);
    let meta = |encoding| CueEncoding {
        encoding,
        d_max: None,
        scale: None,
    };
    match img.kind {
        CueKind::Rgb | CueKind::RgbRefocused | CueKind::Normals => {
            let bytes: Vec<u8> = img.data.iter().map(|v| unit8(*v)).collect();
            Ok((
                encode_png(w, h, ColorType::Rgb, BitDepth::Eight, None, &bytes)?,
                meta(Encoding::Rgb8),
            ))
        }
        CueKind::Reshading
        | CueKind::EdgesOcclusion
        | CueKind::EdgesTexture
        | CueKind::Keypoints2d
        | CueKind::Keypoints3d => {
            let bytes: Vec<u8> = img.data.iter().map(|v| unit8(*v)).collect();
            Ok((
                encode_png(w, h, ColorType::Grayscale, BitDepth::Eight, None, &bytes)?,
                meta(Encoding::Gray8),
            ))
        }
        CueKind::MaskValid => {
            let bytes: Vec<u8> = img.data.iter().map(|v| if *v > 0.5 { 255 } else { 0 }).collect();
            Ok((
                encode_png(w, h, ColorType::Grayscale, BitDepth::Eight, None, &bytes)?,
                meta(Encoding::Mask8),
            ))
        }
        CueKind::SegmentationSemantic | CueKind::SegmentationInstance => {
            let max = img.data.iter().copied().fold(0.0f32, f32::max) as usize;
            if img.data.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
                return Err(PipelineError::Encode(format!(
                    "{}: label ids must be non-negative integers",
                    img.kind
                )));
            }
            if max <= 255 {
                let palette: Vec<u8> = (0..=max).flat_map(palette_color).collect();
                let bytes: Vec<u8> = img.data.iter().map(|v| *v as u8).collect();
                Ok((
                    encode_png(w, h, ColorType::Indexed, BitDepth::Eight, Some(palette), &bytes)?,
                    meta(Encoding::Palette8),
                ))
            } else if max <= u16::MAX as usize {
                let bytes: Vec<u8> = img.data.iter().flat_map(|v| (*v as u16).to_be_bytes()).collect();
                Ok((
                    encode_png(w, h, ColorType::Grayscale, BitDepth::Sixteen, None, &bytes)?,
                    meta(Encoding::Gray16),
                ))
            } else {
                Err(PipelineError::Encode(format!(
                    "{}: label id {max} exceeds 65535",
                    img.kind
                )))
            }
        }
        CueKind::DepthZbuffer | CueKind::DepthEuclidean => {
            let d_max = img.data.iter().copied().fold(0.0f32, f32::max) as f64;
            let bytes: Vec<u8> = img
                .data
                .iter()
                .flat_map(|v| {
                    let q = if d_max > 0.0 { unit16(*v as f64 / d_max) } else { 0 };
                    q.to_be_bytes()
                })
                .collect();
            let mut m = meta(Encoding::Depth16);
            m.d_max = Some(d_max);
            Ok((
                encode_png(w, h, ColorType::Grayscale, BitDepth::Sixteen, None, &bytes)?,
                m,
            ))
        }
        CueKind::Curvature => {
            let scale: Vec<f64> = (0..2)
                .map(|c| {
                    let s = img
                        .data
                        .iter()
                        .skip(c)
                        .step_by(2)
                        .map(|v| v.abs())
                        .fold(0.0f32, f32::max) as f64;
                    if s > 0.0 {
                        s
                    } else {
                        1.0
                    }
                })
                .collect();
            let mut bytes = Vec::with_capacity(img.pixel_count() * 6);
            for px in img.data.chunks(2) {
                for c in 0..2 {
                    bytes.extend(unit16(px[c] as f64 / scale[c] * 0.5 + 0.5).to_be_bytes());
                }
                bytes.extend([0, 0]);
            }
            let mut m = meta(Encoding::Curvature16);
            m.scale = Some(scale);
            Ok((encode_png(w, h, ColorType::Rgb, BitDepth::Sixteen, None, &bytes)?, m))
        }
    }
}

/// Encodes `img` to `path` and returns the metadata needed to decode it.
pub fn write_cue_image(img: &CueImage, path: &Path) -> Result<CueEncoding, PipelineError> {
    let (bytes, meta) = encode_cue_image(img)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))?;
    Ok(meta)
}

/// Raw little-endian f32 samples, channel-interleaved, row-major.
pub fn write_float_dump(img: &CueImage, path: &Path) -> Result<(), PipelineError> {
    let bytes: Vec<u8> = img.data.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

pub fn read_float_dump(path: &Path, kind: CueKind, width: u32, height: u32) -> Result<CueImage, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let mut img = CueImage::zeros(kind, width, height);
    if bytes.len() != img.data.len() * 4 {
        return Err(PipelineError::Encode(format!(
            "{}: float dump has wrong size",
            path.display()
        )));
    }
    for (o, b) in img.data.iter_mut().zip(bytes.chunks_exact(4)) {
        *o = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
    }
    Ok(img)
}

/// Inverse of [`encode_cue_image`] up to quantization.
pub fn decode_cue_image(bytes: &[u8], kind: CueKind, meta: &CueEncoding) -> Result<CueImage, PipelineError> {
    let err = |e: png::DecodingError| PipelineError::Encode(e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(err)?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(err)?;
    let buf = &buf[..info.buffer_size()];
    let mut img = CueImage::zeros(kind, info.width, info.height);
    let u16s = || buf.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]]) as f64);
    match meta.encoding {
        Encoding::Rgb8 | Encoding::Gray8 => {
            for (o, b) in img.data.iter_mut().zip(buf) {
                *o = *b as f32 / 255.0;
            }
        }
        Encoding::Mask8 => {
            for (o, b) in img.data.iter_mut().zip(buf) {
                *o = if *b > 127 { 1.0 } else { 0.0 };
            }
        }
        Encoding::Palette8 => {
            for (o, b) in img.data.iter_mut().zip(buf) {
                *o = *b as f32;
            }
        }
        Encoding::Gray16 => {
            for (o, v) in img.data.iter_mut().zip(u16s()) {
                *o = v as f32;
            }
        }
        Encoding::Depth16 => {
            let d_max = meta.d_max.unwrap_or(0.0);
            for (o, v) in img.data.iter_mut().zip(u16s()) {
                *o = (v / 65535.0 * d_max) as f32;
            }
        }
        Encoding::Curvature16 => {
            let scale = meta.scale.clone().unwrap_or_else(|| vec![1.0, 1.0]);
            let vals: Vec<f64> = u16s().collect();
            for (px, rgb) in img.data.chunks_mut(2).zip(vals.chunks_exact(3)) {
                for c in 0..2 {
                    px[c] = ((rgb[c] / 65535.0 - 0.5) * 2.0 * scale[c]) as f32;
                }
            }
        }
    }
    Ok(img)
}
