//! Floating-point RGB raster used throughout the pipeline.
//!
//! Pixels are stored row-major with interleaved channels, values nominally in
//! `[0, 1]`. Disk I/O goes through 8-bit PNG, quantized as `round(255 v)`.

use std::path::Path;

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Image {
            width,
            height,
            data,
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * CHANNELS {
            return Err(Error::invalid(format!(
                "raw buffer of {} values does not match {width}x{height}x3",
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * CHANNELS
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.offset(x, y) + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let o = self.offset(x, y);
        self.data[o + c] = v;
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let o = self.offset(x, y);
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    /// Bilinear sample with edge clamping.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> [f64; 3] {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let mut out = [0.0; 3];
        let (p00, p10, p01, p11) = (
            self.pixel(x0, y0),
            self.pixel(x1, y0),
            self.pixel(x0, y1),
            self.pixel(x1, y1),
        );
        for c in 0..3 {
            // Exact pass-through at integer coordinates.
            let top = if fx == 0.0 {
                p00[c]
            } else {
                p00[c] * (1.0 - fx) + p10[c] * fx
            };
            let bottom = if fx == 0.0 {
                p01[c]
            } else {
                p01[c] * (1.0 - fx) + p11[c] * fx
            };
            out[c] = if fy == 0.0 {
                top
            } else {
                top * (1.0 - fy) + bottom * fy
            };
        }
        out
    }

    pub fn clip(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    pub fn clipped(mut self) -> Self {
        self.clip();
        self
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn channel_means(&self) -> [f64; 3] {
        let mut m = [0.0; 3];
        for px in self.data.chunks_exact(3) {
            for c in 0..3 {
                m[c] += px[c];
            }
        }
        let n = (self.width * self.height) as f64;
        m.map(|v| v / n)
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn mean_abs_diff(&self, other: &Image) -> f64 {
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .sum();
        s / self.data.len() as f64
    }

    /// Peak signal-to-noise ratio in dB for unit peak. Identical images give `+inf`.
    pub fn psnr(&self, other: &Image) -> f64 {
        let mse: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / self.data.len() as f64;
        if mse == 0.0 {
            f64::INFINITY
        } else {
            -10.0 * mse.log10()
        }
    }

    /// Bilinear resize with pixel-center alignment.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Image {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = Image::new(width, height);
        for y in 0..height {
            let src_y = (y as f64 + 0.5) * sy - 0.5;
            for x in 0..width {
                let src_x = (x as f64 + 0.5) * sx - 0.5;
                out.set_pixel(x, y, self.sample_bilinear(src_x, src_y));
            }
        }
        out
    }

    /// Bicubic (Keys, a = -0.5) resize with pixel-center alignment and edge clamping.
    pub fn resize_bicubic(&self, width: usize, height: usize) -> Image {
        fn kernel(t: f64) -> f64 {
            let a = -0.5;
            let t = t.abs();
            if t <= 1.0 {
                (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
            } else if t < 2.0 {
                a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
            } else {
                0.0
            }
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = Image::new(width, height);
        let clamp_x = |v: i64| v.clamp(0, self.width as i64 - 1) as usize;
        let clamp_y = |v: i64| v.clamp(0, self.height as i64 - 1) as usize;
        for y in 0..height {
            let src_y = (y as f64 + 0.5) * sy - 0.5;
            let y0 = src_y.floor() as i64;
            let fy = src_y - y0 as f64;
            let wy: [f64; 4] = std::array::from_fn(|k| kernel(fy - (k as f64 - 1.0)));
            for x in 0..width {
                let src_x = (x as f64 + 0.5) * sx - 0.5;
                let x0 = src_x.floor() as i64;
                let fx = src_x - x0 as f64;
                let wx: [f64; 4] = std::array::from_fn(|k| kernel(fx - (k as f64 - 1.0)));
                let mut acc = [0.0; 3];
                for (j, wyj) in wy.iter().enumerate() {
                    let py = clamp_y(y0 + j as i64 - 1);
                    for (i, wxi) in wx.iter().enumerate() {
                        let px = self.pixel(clamp_x(x0 + i as i64 - 1), py);
                        let w = wxi * wyj;
                        for c in 0..3 {
                            acc[c] += w * px[c];
                        }
                    }
                }
                out.set_pixel(x, y, acc);
            }
        }
        out
    }

    /// Separable Gaussian blur, kernel radius `ceil(3 sigma)`, edge clamping.
    /// `sigma <= 0` returns an exact copy.
    pub fn gaussian_blur(&self, sigma: f64) -> Image {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as i64;
        let mut kernel: Vec<f64> = (-radius..=radius)
            .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let norm: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= norm);

        let (w, h) = (self.width as i64, self.height as i64);
        let mut tmp = Image::new(self.width, self.height);
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0; 3];
                for (k, kv) in kernel.iter().enumerate() {
                    let sx = (x + k as i64 - radius).clamp(0, w - 1) as usize;
                    let p = self.pixel(sx, y as usize);
                    for c in 0..3 {
                        acc[c] += kv * p[c];
                    }
                }
                tmp.set_pixel(x as usize, y as usize, acc);
            }
        }
        let mut out = Image::new(self.width, self.height);
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0; 3];
                for (k, kv) in kernel.iter().enumerate() {
                    let sy = (y + k as i64 - radius).clamp(0, h - 1) as usize;
                    let p = tmp.pixel(x as usize, sy);
                    for c in 0..3 {
                        acc[c] += kv * p[c];
                    }
                }
                out.set_pixel(x as usize, y as usize, acc);
            }
        }
        out
    }

    pub fn to_rgb8(&self) -> image::RgbImage {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Image {
        let data = img.as_raw().iter().map(|&b| b as f64 / 255.0).collect();
        Image {
            width: img.width() as usize,
            height: img.height() as usize,
            data,
        }
    }

    /// Round-trip through 8-bit quantization without touching disk.
    pub fn quantized(&self) -> Image {
        Image::from_rgb8(&self.to_rgb8())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.to_rgb8().write_to(
            &mut std::io::Cursor::new(&mut buf),
            image::ImageFormat::Png,
        )?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Image> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let img = image::load_from_memory(&bytes)?.to_rgb8();
        Ok(Image::from_rgb8(&img))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Image {
        let mut img = Image::new(w, h);
        for y in 0..h {
            for x in 0..w {
                img.set_pixel(
                    x,
                    y,
                    [x as f64 / w as f64, y as f64 / h as f64, 0.5],
                );
            }
        }
        img
    }

    #[test]
    fn bilinear_is_exact_on_grid() {
        let img = ramp(8, 6);
        assert_eq!(img.sample_bilinear(3.0, 2.0), img.pixel(3, 2));
        let mid = img.sample_bilinear(3.5, 2.0);
        assert!((mid[0] - 3.5 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn blur_preserves_constant() {
        let img = Image::filled(10, 10, [0.2, 0.4, 0.6]);
        let b = img.gaussian_blur(1.5);
        assert!(img.max_abs_diff(&b) < 1e-12);
        assert_eq!(img.gaussian_blur(0.0), img);
    }

    #[test]
    fn same_size_resize_is_identity() {
        let img = ramp(9, 7);
        assert_eq!(img.resize_bilinear(9, 7), img);
        assert!(img.resize_bicubic(9, 7).max_abs_diff(&img) < 1e-12);
    }

    #[test]
    fn png_round_trip_is_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = ramp(5, 4);
        img.save_png(&p).unwrap();
        let back = Image::load(&p).unwrap();
        assert_eq!(back, img.quantized());
        assert!(back.max_abs_diff(&img) <= 0.5 / 255.0 + 1e-12);
    }
}
