//! Image containers shared across rendering, contact detection, and view
//! synthesis.
//!
//! Canonical storage matches the on-disk episode format: RGB as 8-bit
//! channels, depth as 16-bit millimeters (0 = invalid), masks as one byte per
//! pixel. Float views ([0,1] RGB, meters depth) are derived on demand.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
}

/// 8-bit RGB image, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rgb8Image {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl Rgb8Image {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; (width * height * 3) as usize],
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = ((y * self.width + x) * 3) as usize;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn to_f64(&self) -> RgbImageF {
        RgbImageF {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v as f64 / 255.0).collect(),
        }
    }

    /// Luma conversion (Rec. 601 weights), values in [0,1].
    pub fn to_gray(&self) -> GrayImage {
        let mut data = Vec::with_capacity((self.width * self.height) as usize);
        for px in self.data.chunks_exact(3) {
            let y = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            data.push(y / 255.0);
        }
        GrayImage {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Floating-point RGB image with values in [0,1], 3 f64 per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImageF {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
}

impl RgbImageF {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; (width * height * 3) as usize],
        }
    }

    pub fn constant(width: u32, height: u32, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity((width * height * 3) as usize);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f64; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [f64; 3]) {
        let i = ((y * self.width + x) * 3) as usize;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Quantizes to 8-bit with round-to-nearest after clamping to [0,1].
    pub fn to_u8(&self) -> Rgb8Image {
        Rgb8Image {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
                .collect(),
        }
    }

    /// Mean absolute per-channel difference.
    pub fn mean_abs_diff(&self, other: &RgbImageF) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        let sum: f64 = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        sum / self.data.len() as f64
    }
}

/// Depth image in millimeters, 0 = invalid pixel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Depth16Image {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u16>,
}

impl Depth16Image {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; (width * height) as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> u16 {
        self.data[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, mm: u16) {
        self.data[(y * self.width + x) as usize] = mm;
    }

    /// Depth in meters, or `None` for invalid pixels.
    pub fn meters(&self, x: u32, y: u32) -> Option<f64> {
        match self.get(x, y) {
            0 => None,
            mm => Some(mm as f64 / 1000.0),
        }
    }

    pub fn from_meters(width: u32, height: u32, meters: &[f64]) -> Self {
        let data = meters
            .iter()
            .map(|&m| {
                if m <= 0.0 {
                    0
                } else {
                    (m * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16
                }
            })
            .collect();
        Self {
            width,
            height,
            data,
        }
    }
}

/// Binary mask, one byte per pixel (nonzero = set).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask8Image {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl Mask8Image {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; (width * height) as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize] != 0
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.data[(y * self.width + x) as usize] = value as u8;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// One round of 3×3 dilation.
    pub fn dilated(&self) -> Mask8Image {
        self.morph(true)
    }

    /// One round of 3×3 erosion.
    pub fn eroded(&self) -> Mask8Image {
        self.morph(false)
    }

    fn morph(&self, dilate: bool) -> Mask8Image {
        let (w, h) = (self.width as i64, self.height as i64);
        let mut out = Mask8Image::new(self.width, self.height);
        for y in 0..h {
            for x in 0..w {
                let mut hit = !dilate;
                'scan: for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        // Out-of-bounds neighbors count as unset.
                        let v = if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            false
                        } else {
                            self.get(nx as u32, ny as u32)
                        };
                        if dilate && v {
                            hit = true;
                            break 'scan;
                        }
                        if !dilate && !v {
                            hit = false;
                            break 'scan;
                        }
                    }
                }
                out.set(x as u32, y as u32, hit);
            }
        }
        out
    }

    /// Morphological closing (dilate then erode), `iterations` rounds each.
    pub fn closed(&self, iterations: usize) -> Mask8Image {
        let mut m = self.clone();
        for _ in 0..iterations {
            m = m.dilated();
        }
        for _ in 0..iterations {
            m = m.eroded();
        }
        m
    }

    /// Pixels of `self` dilated `ring_width` times, minus `self`.
    pub fn ring(&self, ring_width: usize) -> Mask8Image {
        let mut grown = self.clone();
        for _ in 0..ring_width {
            grown = grown.dilated();
        }
        let mut out = Mask8Image::new(self.width, self.height);
        for (i, v) in out.data.iter_mut().enumerate() {
            *v = (grown.data[i] != 0 && self.data[i] == 0) as u8;
        }
        out
    }

    /// Tight bounding box of set pixels: (x0, y0, x1, y1) inclusive.
    pub fn bounding_box(&self) -> Option<(u32, u32, u32, u32)> {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
        let mut any = false;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    any = true;
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        any.then_some((x0, y0, x1, y1))
    }
}

/// Grayscale image with f64 values, nominally in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; (width * height) as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: f64) {
        self.data[(y * self.width + x) as usize] = v;
    }

    /// Rectangular crop, (x0, y0) inclusive origin.
    pub fn crop(&self, x0: u32, y0: u32, w: u32, h: u32) -> GrayImage {
        assert!(x0 + w <= self.width && y0 + h <= self.height);
        let mut out = GrayImage::new(w, h);
        for y in 0..h {
            for x in 0..w {
                out.set(x, y, self.get(x0 + x, y0 + y));
            }
        }
        out
    }
}

/// Peak signal-to-noise ratio between two RGB float images over masked-in
/// pixels, with unit dynamic range. Returns +inf for identical inputs.
pub fn masked_psnr(a: &RgbImageF, b: &RgbImageF, valid: &Mask8Image) -> f64 {
    assert_eq!(a.width, b.width);
    assert_eq!(a.height, b.height);
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..a.height {
        for x in 0..a.width {
            if valid.get(x, y) {
                let pa = a.pixel(x, y);
                let pb = b.pixel(x, y);
                for c in 0..3 {
                    let d = pa[c] - pb[c];
                    sum += d * d;
                }
                n += 3;
            }
        }
    }
    if n == 0 {
        return f64::NAN;
    }
    let mse = sum / n as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}
