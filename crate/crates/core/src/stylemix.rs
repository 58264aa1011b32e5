//! Inter-domain style mixup: move low-level color/spectral statistics from
//! a style image onto a content image while keeping its geometry.
//!
//! Two closed-form realizations are provided. `color_wct` whitens the content
//! pixels with their 3x3 color covariance and re-colors them with the style
//! covariance and mean. `fourier_mix` swaps the low-frequency amplitude
//! spectrum while keeping the content phase.

use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng as _;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::sample::FaceSample;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleMode {
    ColorWct,
    FourierMix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleSpec {
    pub mode: StyleMode,
    pub epsilon: f64,
    pub beta_low: f64,
}

impl Default for StyleSpec {
    fn default() -> Self {
        StyleSpec {
            mode: StyleMode::ColorWct,
            epsilon: 1e-5,
            beta_low: 0.1,
        }
    }
}

impl StyleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("style epsilon must be positive"));
        }
        if !(self.beta_low > 0.0 && self.beta_low <= 0.5) {
            return Err(Error::invalid("beta_low outside (0, 0.5]"));
        }
        Ok(())
    }
}

/// Channel mean and population covariance of an image's pixels.
pub fn color_moments(img: &Image) -> (Vector3<f64>, Matrix3<f64>) {
    let n = (img.width() * img.height()) as f64;
    let mut mean = Vector3::zeros();
    for px in img.data().chunks_exact(3) {
        mean += Vector3::new(px[0], px[1], px[2]);
    }
    mean /= n;
    let mut cov = Matrix3::zeros();
    for px in img.data().chunks_exact(3) {
        let d = Vector3::new(px[0], px[1], px[2]) - mean;
        cov += d * d.transpose();
    }
    (mean, cov / n)
}

fn sym_power(m: &Matrix3<f64>, power: f64) -> Matrix3<f64> {
    let eig = SymmetricEigen::new(*m);
    let d = Matrix3::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).powf(power)));
    eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Whitening-coloring transform before clipping. Both covariances are
/// regularized by `epsilon * I`, so `color_wct_raw(x, x, e)` maps `x` to itself.
pub fn color_wct_raw(content: &Image, style: &Image, epsilon: f64) -> Image {
    let (mu_c, cov_c) = color_moments(content);
    let (mu_s, cov_s) = color_moments(style);
    let reg = Matrix3::identity() * epsilon;
    let transform = sym_power(&(cov_s + reg), 0.5) * sym_power(&(cov_c + reg), -0.5);
    let mut out = content.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        let v = transform * (Vector3::new(px[0], px[1], px[2]) - mu_c) + mu_s;
        px.copy_from_slice(v.as_slice());
    }
    out
}

pub fn color_wct(content: &Image, style: &Image, epsilon: f64) -> Image {
    color_wct_raw(content, style, epsilon).clipped()
}

/// Row-major 2-D FFT of one channel, in place.
fn fft2(buf: &mut [Complex<f64>], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    for r in buf.chunks_exact_mut(width) {
        row.process(r);
    }
    let mut column = vec![Complex::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = buf[y * width + x];
        }
        col.process(&mut column);
        for y in 0..height {
            buf[y * width + x] = column[y];
        }
    }
    if inverse {
        let scale = 1.0 / (width * height) as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Per-channel spectrum of an image (`[channel][y * width + x]`).
pub fn spectrum(img: &Image) -> [Vec<Complex<f64>>; 3] {
    let (w, h) = (img.width(), img.height());
    std::array::from_fn(|c| {
        let mut buf: Vec<Complex<f64>> = img
            .data()
            .chunks_exact(3)
            .map(|px| Complex::new(px[c], 0.0))
            .collect();
        fft2(&mut buf, w, h, false);
        buf
    })
}

fn signed_freq(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Half-width in bins of the swapped low-frequency square.
pub fn low_band_radius(width: usize, height: usize, beta_low: f64) -> i64 {
    (beta_low * width.min(height) as f64).floor() as i64
}

/// Fourier amplitude mixing before clipping.
pub fn fourier_mix_raw(content: &Image, style: &Image, beta_low: f64) -> Result<Image> {
    if !content.same_shape(style) {
        return Err(Error::invalid("content and style images differ in shape"));
    }
    if !(beta_low > 0.0 && beta_low <= 0.5) {
        return Err(Error::invalid(format!("beta_low {beta_low} outside (0, 0.5]")));
    }
    let (w, h) = (content.width(), content.height());
    let radius = low_band_radius(w, h, beta_low);
    let sc = spectrum(content);
    let ss = spectrum(style);
    let mut out = Image::new(w, h);
    for c in 0..3 {
        let mut mixed = sc[c].clone();
        for y in 0..h {
            let fy = signed_freq(y, h);
            for x in 0..w {
                let fx = signed_freq(x, w);
                if fx.abs() <= radius && fy.abs() <= radius {
                    let i = y * w + x;
                    let amp = ss[c][i].norm();
                    let phase = mixed[i].arg();
                    mixed[i] = Complex::from_polar(amp, phase);
                }
            }
        }
        fft2(&mut mixed, w, h, true);
        for (i, v) in mixed.iter().enumerate() {
            out.data_mut()[i * 3 + c] = v.re;
        }
    }
    Ok(out)
}

pub fn fourier_mix(content: &Image, style: &Image, beta_low: f64) -> Result<Image> {
    Ok(fourier_mix_raw(content, style, beta_low)?.clipped())
}

/// Restyle a sample with a seeded choice from `style_pool`. Label, identity
/// references, and landmarks are carried over unchanged.
pub fn ism_augment(
    sample: &FaceSample,
    style_pool: &[Image],
    spec: &StyleSpec,
    seed: u64,
) -> Result<FaceSample> {
    if style_pool.is_empty() {
        return Err(Error::invalid("style pool is empty"));
    }
    spec.validate()?;
    let pick = seed::rng(seed::derive_tag(seed, &sample.id)).gen_range(0..style_pool.len());
    let style = &style_pool[pick];
    let style = if style.same_shape(&sample.image) {
        style.clone()
    } else {
        style.resize_bilinear(sample.image.width(), sample.image.height())
    };
    let image = match spec.mode {
        StyleMode::ColorWct => color_wct(&sample.image, &style, spec.epsilon),
        StyleMode::FourierMix => fourier_mix(&sample.image, &style, spec.beta_low)?,
    };
    Ok(FaceSample {
        id: format!("{}+ism", sample.id),
        image,
        domain: "ism".to_string(),
        ..sample.clone()
    })
}

/// Every PNG or JPEG file directly inside `dir`, in file-name order.
pub fn load_style_pool(dir: &Path) -> Result<Vec<Image>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for e in entries {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        let ext = p.extension().and_then(|x| x.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(format!("no style images in {}", dir.display())));
    }
    paths.iter().map(|p| Image::load(p)).collect()
}
