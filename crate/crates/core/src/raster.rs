//! Minimal RGB raster with binary PPM (P6) output.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Raster {
    /// All-black image.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image size must be non-zero, got {width}x{height}"
            )));
        }
        Ok(Self {
            width,
            height,
            data: vec![0; width as usize * height as usize * 3],
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.offset(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    /// Blends `color` over the pixel with opacity `alpha`.
    pub fn blend(&mut self, x: u32, y: u32, color: [u8; 3], alpha: f64) {
        let i = self.offset(x, y);
        for (dst, &src) in self.data[i..i + 3].iter_mut().zip(&color) {
            let v = alpha * f64::from(src) + (1.0 - alpha) * f64::from(*dst);
            *dst = v.round().clamp(0.0, 255.0) as u8;
        }
    }

    /// Fills every pixel whose center lies within `radius` of `(u, v)`.
    /// Pixel `(x, y)` covers `[x, x+1) × [y, y+1)`.
    pub fn fill_disc(&mut self, u: f64, v: f64, radius: f64, color: [u8; 3], alpha: f64) {
        let r2 = radius * radius;
        let x0 = (u - radius - 0.5).floor().max(0.0);
        let x1 = (u + radius - 0.5).ceil().min(f64::from(self.width) - 1.0);
        let y0 = (v - radius - 0.5).floor().max(0.0);
        let y1 = (v + radius - 0.5).ceil().min(f64::from(self.height) - 1.0);
        if x0 > x1 || y0 > y1 {
            return;
        }
        for y in y0 as u32..=y1 as u32 {
            let dy = f64::from(y) + 0.5 - v;
            for x in x0 as u32..=x1 as u32 {
                let dx = f64::from(x) + 0.5 - u;
                if dx * dx + dy * dy <= r2 {
                    self.blend(x, y, color, alpha);
                }
            }
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let header = format!("P6\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.data.len());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.data);
        out
    }

    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.to_ppm())?;
        f.flush()?;
        Ok(())
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("ppm: {m}"));
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?);
        }
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(bad("only 8-bit P6 is supported"));
        }
        let width: u32 = fields[1].parse().map_err(|_| bad("width"))?;
        let height: u32 = fields[2].parse().map_err(|_| bad("height"))?;
        let data = bytes.get(pos + 1..).ok_or_else(|| bad("missing pixel data"))?;
        let mut r = Raster::new(width, height)?;
        if data.len() != r.data.len() {
            return Err(bad("pixel data length mismatch"));
        }
        r.data.copy_from_slice(data);
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_size_rejected() {
        assert!(Raster::new(0, 4).is_err());
    }

    #[test]
    fn disc_is_symmetric_about_integer_center() {
        let mut r = Raster::new(20, 20).unwrap();
        r.fill_disc(10.0, 10.0, 2.0, [255, 255, 255], 1.0);
        let lit: Vec<(u32, u32)> = (0..20)
            .flat_map(|y| (0..20).map(move |x| (x, y)))
            .filter(|&(x, y)| r.pixel(x, y) != [0, 0, 0])
            .collect();
        assert_eq!(lit.len(), 12);
        for &(x, y) in &lit {
            assert!(lit.contains(&(19 - x, 19 - y)));
            assert!(lit.contains(&(19 - x, y)));
        }
    }

    #[test]
    fn ppm_round_trip() {
        let mut r = Raster::new(3, 2).unwrap();
        r.blend(1, 1, [10, 20, 30], 1.0);
        let back = Raster::from_ppm(&r.to_ppm()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn alpha_blend_over_black() {
        let mut r = Raster::new(1, 1).unwrap();
        r.blend(0, 0, [200, 100, 0], 0.5);
        assert_eq!(r.pixel(0, 0), [100, 50, 0]);
    }
}
