use std::path::Path;

use crate::{Error, Result};

/// 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl PatternImage {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} pixels", width * height),
                actual: format!("{} pixels", pixels.len()),
            });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    /// ITU-R 601 luma, as floating point in [0, 255].
    pub fn to_gray(&self) -> GrayImage {
        let data = self
            .pixels
            .iter()
            .map(|&[r, g, b]| 0.299 * r as f32 + 0.587 * g as f32 + 0.114 * b as f32)
            .collect();
        GrayImage {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        image::save_buffer(
            path,
            &raw,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        let pixels = img.pixels().map(|p| p.0).collect();
        Self::from_pixels(w as usize, h as usize, pixels)
    }
}

/// Single-channel floating point image used internally by the flow solver.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub(crate) width: usize,
    pub(crate) height: usize,
    pub(crate) data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height);
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample with edge clamping.
    #[inline]
    pub fn sample(&self, x: f32, y: f32) -> f32 {
        let (x0, x1, fx) = clamp_taps(x, self.width);
        let (y0, y1, fy) = clamp_taps(y, self.height);
        let w = self.width;
        let a = self.data[y0 * w + x0];
        let b = self.data[y0 * w + x1];
        let c = self.data[y1 * w + x0];
        let d = self.data[y1 * w + x1];
        let top = a + (b - a) * fx;
        let bot = c + (d - c) * fx;
        top + (bot - top) * fy
    }

    /// Bilinear samples of the `ps × ps` block at `(x0, y0)` translated by
    /// `uv`, row-major into `out`. Matches [`Self::sample`] pixel for pixel.
    pub(crate) fn sample_block(&self, x0: usize, y0: usize, ps: usize, uv: [f32; 2], out: &mut [f32]) {
        let px = x0 as f32 + uv[0];
        let py = y0 as f32 + uv[1];
        let inside = px >= 0.0
            && py >= 0.0
            && px + (ps as f32) < (self.width - 1) as f32
            && py + (ps as f32) < (self.height - 1) as f32;
        if !inside {
            for (k, o) in out.iter_mut().enumerate().take(ps * ps) {
                *o = self.sample(px + (k % ps) as f32, py + (k / ps) as f32);
            }
            return;
        }
        let (bx, by) = (px as usize, py as usize);
        let (fx, fy) = (px - bx as f32, py - by as f32);
        let w = self.width;
        for r in 0..ps {
            let top = &self.data[(by + r) * w + bx..(by + r) * w + bx + ps + 1];
            let bot = &self.data[(by + r + 1) * w + bx..(by + r + 1) * w + bx + ps + 1];
            let dst = &mut out[r * ps..(r + 1) * ps];
            for c in 0..ps {
                let t = top[c] + (top[c + 1] - top[c]) * fx;
                let b = bot[c] + (bot[c + 1] - bot[c]) * fx;
                dst[c] = t + (b - t) * fy;
            }
        }
    }

    /// Central-difference gradients (one-sided at the border).
    pub fn gradients(&self) -> (GrayImage, GrayImage) {
        let (w, h) = (self.width, self.height);
        let mut gx = vec![0.0f32; w * h];
        let mut gy = vec![0.0f32; w * h];
        for y in 0..h {
            let ym = y.saturating_sub(1);
            let yp = (y + 1).min(h - 1);
            for x in 0..w {
                let xm = x.saturating_sub(1);
                let xp = (x + 1).min(w - 1);
                let dx = (xp - xm).max(1) as f32;
                let dy = (yp - ym).max(1) as f32;
                gx[y * w + x] = (self.at(xp, y) - self.at(xm, y)) / dx;
                gy[y * w + x] = (self.at(x, yp) - self.at(x, ym)) / dy;
            }
        }
        (GrayImage::new(w, h, gx), GrayImage::new(w, h, gy))
    }
}

/// Integer taps and fractional weight for clamped bilinear sampling along one axis.
#[inline]
pub(crate) fn clamp_taps(p: f32, len: usize) -> (usize, usize, f32) {
    let max = (len - 1) as f32;
    let p = p.clamp(0.0, max);
    // p >= 0, so truncation is floor
    let i0 = p as usize;
    let f = p - i0 as f32;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, f)
}
