use std::path::Path;

use nalgebra::{Vector2, Vector3};

use super::MeshError;

/// 8-bit RGB texture. Row 0 is the top of the image; `v = 0` maps to the
/// bottom row as in OBJ.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    pub width: u32,
    pub height: u32,
    pub texels: Vec<[u8; 3]>,
}

impl Texture {
    pub fn new(width: u32, height: u32, texels: Vec<[u8; 3]>) -> Result<Self, MeshError> {
        if width == 0 || height == 0 || texels.len() != (width * height) as usize {
            return Err(MeshError::Texture(format!(
                "{} texels for a {width}x{height} image",
                texels.len()
            )));
        }
        Ok(Texture { width, height, texels })
    }

    pub fn solid(color: [u8; 3]) -> Self {
        Texture {
            width: 1,
            height: 1,
            texels: vec![color],
        }
    }

    pub fn load(path: &Path) -> Result<Self, MeshError> {
        Self::from_png(&super::read(path)?)
    }

    /// Decodes an 8-bit RGB or RGBA PNG (alpha is discarded).
    pub fn from_png(bytes: &[u8]) -> Result<Self, MeshError> {
        let err = |e: png::DecodingError| MeshError::Texture(e.to_string());
        let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        decoder.set_transformations(png::Transformations::EXPAND);
        let mut reader = decoder.read_info().map_err(err)?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf).map_err(err)?;
        if info.bit_depth != png::BitDepth::Eight {
            return Err(MeshError::Texture(format!(
                "unsupported bit depth {:?}",
                info.bit_depth
            )));
        }
        let stride = match info.color_type {
            png::ColorType::Rgb => 3,
            png::ColorType::Rgba => 4,
            png::ColorType::Grayscale => 1,
            png::ColorType::GrayscaleAlpha => 2,
            other => return Err(MeshError::Texture(format!("unsupported color type {other:?}"))),
        };
        let texels = buf[..info.buffer_size()]
            .chunks_exact(info.line_size)
            .flat_map(|row| {
                row.chunks_exact(stride).take(info.width as usize).map(|px| {
                    if stride >= 3 {
                        [px[0], px[1], px[2]]
                    } else {
                        [px[0]; 3]
                    }
                })
            })
            .collect();
        Texture::new(info.width, info.height, texels)
    }

    fn texel(&self, x: i64, y: i64) -> Vector3<f64> {
        let xi = x.rem_euclid(self.width as i64) as usize;
        let yi = y.rem_euclid(self.height as i64) as usize;
        let t = self.texels[yi * self.width as usize + xi];
        Vector3::new(t[0] as f64, t[1] as f64, t[2] as f64) / 255.0
    }

    /// Bilinear lookup with repeat wrapping. Texel centers sit at
    /// `((i + 0.5) / w, 1 - (j + 0.5) / h)`.
    pub fn sample_bilinear(&self, uv: Vector2<f64>) -> Vector3<f64> {
        let x = uv.x * self.width as f64 - 0.5;
        let y = (1.0 - uv.y) * self.height as f64 - 0.5;
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let top = self.texel(x0, y0) * (1.0 - fx) + self.texel(x0 + 1, y0) * fx;
        let bottom = self.texel(x0, y0 + 1) * (1.0 - fx) + self.texel(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}
