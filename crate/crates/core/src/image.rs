//! Binary PPM (P6) images.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// An 8-bit RGB raster, row-major from the top-left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl Image {
    /// White where `white[i]`, black elsewhere.
    pub fn from_mask(width: usize, height: usize, white: &[bool]) -> Result<Image> {
        if white.len() != width * height {
            return Err(Error::param("mask size does not match the image size"));
        }
        let rgb = white.iter().flat_map(|&w| [if w { 255 } else { 0 }; 3]).collect();
        Ok(Image { width, height, rgb })
    }

    pub fn is_black(&self, x: usize, y: usize) -> bool {
        let i = 3 * (y * self.width + x);
        self.rgb[i..i + 3] == [0, 0, 0]
    }

    pub fn black_pixels(&self) -> usize {
        self.rgb.chunks_exact(3).filter(|px| *px == [0, 0, 0]).count()
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }

    pub fn write_ppm<P: AsRef<Path>>(&self, path: P) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.to_ppm())?;
        f.flush()
    }
}
