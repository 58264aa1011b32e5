//! Pre-augmentation transform bank applied before self-morphing.
//!
//! Magnitude `m` in `[0, 1]` maps to op parameters as follows (`u` is a
//! seeded uniform draw in `[-1, 1]`):
//!
//! | op | effect |
//! |----|--------|
//! | `color_shift` | per-channel offset, each `0.1 m u` |
//! | `gaussian_noise` | additive noise, sigma `0.05 m` |
//! | `blur` | Gaussian blur, sigma `2 m` px |
//! | `contrast` | scale about the image mean by `1 + 0.5 m u` |
//! | `brightness` | offset `0.2 m u` |
//! | `shear` | horizontal shear `0.2 m u` about the image center |
//! | `translate` | shift of `round(8 m)` px along a seeded axis direction |
//! | `jpeg_compress` | JPEG cycle at quality `round(100 - 70 m)` |
//!
//! A magnitude of exactly zero leaves the image untouched.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::postops;
use crate::sample::LandmarkSet;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    ColorShift,
    GaussianNoise,
    Blur,
    Contrast,
    Brightness,
    Shear,
    Translate,
    JpegCompress,
}

impl TransformKind {
    pub const ALL: [TransformKind; 8] = [
        TransformKind::ColorShift,
        TransformKind::GaussianNoise,
        TransformKind::Blur,
        TransformKind::Contrast,
        TransformKind::Brightness,
        TransformKind::Shear,
        TransformKind::Translate,
        TransformKind::JpegCompress,
    ];

    pub fn is_geometric(self) -> bool {
        matches!(self, TransformKind::Shear | TransformKind::Translate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformOp {
    pub kind: TransformKind,
    pub magnitude: f64,
}

impl TransformOp {
    pub fn new(kind: TransformKind, magnitude: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&magnitude) {
            return Err(Error::invalid(format!("transform magnitude {magnitude} outside [0, 1]")));
        }
        Ok(TransformOp { kind, magnitude })
    }
}

/// Seeded random subset of one to three ops with magnitudes in `[0.1, 0.6]`.
pub fn random_transform_bank(seed: u64) -> Vec<TransformOp> {
    let mut rng = seed::rng(seed::derive_tag(seed, "bank"));
    let count = rng.gen_range(1..=3);
    let mut kinds = TransformKind::ALL.to_vec();
    kinds.shuffle(&mut rng);
    kinds
        .into_iter()
        .take(count)
        .map(|kind| TransformOp {
            kind,
            magnitude: rng.gen_range(0.1..=0.6),
        })
        .collect()
}

/// Apply `ops` in order. When `landmarks` is given, geometric ops move the
/// semantic points with the pixels (the trailing four corner points stay put).
pub fn pre_augment(
    img: &Image,
    landmarks: Option<&LandmarkSet>,
    ops: &[TransformOp],
    seed: u64,
) -> Result<(Image, Option<LandmarkSet>)> {
    let mut out = img.clone();
    let mut lm = landmarks.cloned();
    for (k, op) in ops.iter().enumerate() {
        if !(0.0..=1.0).contains(&op.magnitude) {
            return Err(Error::invalid(format!(
                "transform magnitude {} outside [0, 1]",
                op.magnitude
            )));
        }
        if op.magnitude == 0.0 {
            continue;
        }
        let mut rng = seed::rng(seed::derive(seed, k as u64));
        let m = op.magnitude;
        let u: f64 = rng.gen_range(-1.0..=1.0);
        out = match op.kind {
            TransformKind::ColorShift => {
                let offs: [f64; 3] = [u, rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)]
                    .map(|v| 0.1 * m * v);
                map_pixels(&out, |c, v| v + offs[c])
            }
            TransformKind::GaussianNoise => {
                let sigma = 0.05 * m;
                let mut o = out.clone();
                for v in o.data_mut() {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    *v += sigma * n;
                }
                o
            }
            TransformKind::Blur => out.gaussian_blur(2.0 * m),
            TransformKind::Contrast => {
                let means = out.channel_means();
                let mean = (means[0] + means[1] + means[2]) / 3.0;
                let f = 1.0 + 0.5 * m * u;
                map_pixels(&out, |_, v| mean + (v - mean) * f)
            }
            TransformKind::Brightness => {
                let b = 0.2 * m * u;
                map_pixels(&out, |_, v| v + b)
            }
            TransformKind::Shear => {
                let k = 0.2 * m * u;
                let cy = (out.height() as f64 - 1.0) / 2.0;
                let mut o = Image::new(out.width(), out.height());
                for y in 0..out.height() {
                    let shift = k * (y as f64 - cy);
                    for x in 0..out.width() {
                        o.set_pixel(x, y, out.sample_bilinear(x as f64 - shift, y as f64));
                    }
                }
                if let Some(l) = lm.as_mut() {
                    move_semantic(l, out.width(), out.height(), |p| [p[0] + k * (p[1] - cy), p[1]]);
                }
                o
            }
            TransformKind::Translate => {
                let d = (8.0 * m).round() as i64;
                let (dx, dy) = match rng.gen_range(0..4) {
                    0 => (d, 0),
                    1 => (-d, 0),
                    2 => (0, d),
                    _ => (0, -d),
                };
                let (w, h) = (out.width() as i64, out.height() as i64);
                let mut o = Image::new(out.width(), out.height());
                for y in 0..h {
                    for x in 0..w {
                        let sx = (x - dx).clamp(0, w - 1) as usize;
                        let sy = (y - dy).clamp(0, h - 1) as usize;
                        o.set_pixel(x as usize, y as usize, out.pixel(sx, sy));
                    }
                }
                if let Some(l) = lm.as_mut() {
                    move_semantic(l, out.width(), out.height(), |p| {
                        [p[0] + dx as f64, p[1] + dy as f64]
                    });
                }
                o
            }
            TransformKind::JpegCompress => {
                let quality = (100.0 - 70.0 * m).round() as u8;
                postops::jpeg_roundtrip(&out, quality)?
            }
        };
        out.clip();
    }
    Ok((out, lm))
}

fn map_pixels(img: &Image, f: impl Fn(usize, f64) -> f64) -> Image {
    let mut o = img.clone();
    for (i, v) in o.data_mut().iter_mut().enumerate() {
        *v = f(i % 3, *v);
    }
    o
}

fn move_semantic(
    lm: &mut LandmarkSet,
    width: usize,
    height: usize,
    f: impl Fn([f64; 2]) -> [f64; 2],
) {
    let keep_corners = lm.corners_exact(width, height);
    let n = if keep_corners { lm.len() - 4 } else { lm.len() };
    let (mx, my) = ((width - 1) as f64, (height - 1) as f64);
    for p in &mut lm.points[..n] {
        let q = f(*p);
        *p = [q[0].clamp(0.0, mx), q[1].clamp(0.0, my)];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_ops(m: f64) -> Vec<TransformOp> {
        TransformKind::ALL
            .iter()
            .map(|&kind| TransformOp { kind, magnitude: m })
            .collect()
    }

    fn textured(size: usize) -> Image {
        let mut img = Image::new(size, size);
        for y in 0..size {
            for x in 0..size {
                let v = ((x * 7 + y * 13) % 17) as f64 / 17.0;
                img.set_pixel(x, y, [v, 1.0 - v, 0.5 * v + 0.2]);
            }
        }
        img
    }

    #[test]
    fn zero_magnitude_is_identity() {
        let img = textured(32);
        let lm = LandmarkSet::with_corners(vec![[10.0, 12.0], [20.0, 5.0]], 32, 32);
        let (out, l) = pre_augment(&img, Some(&lm), &all_ops(0.0), 3).unwrap();
        assert_eq!(out, img);
        assert_eq!(l.unwrap(), lm);
    }

    #[test]
    fn noise_level_matches_magnitude() {
        let img = Image::filled(64, 64, [0.5; 3]);
        for m in [0.4, 1.0] {
            let op = TransformOp::new(TransformKind::GaussianNoise, m).unwrap();
            let (out, _) = pre_augment(&img, None, &[op], 17).unwrap();
            let n = out.data().len() as f64;
            let mean = out.data().iter().sum::<f64>() / n;
            let var = out.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let expected = 0.05 * m;
            assert!((var.sqrt() - expected).abs() <= 0.1 * expected, "m={m} sd={}", var.sqrt());
        }
    }

    #[test]
    fn translate_moves_delta_centroid() {
        let mut img = Image::new(48, 48);
        img.set_pixel(24, 24, [1.0; 3]);
        for (m, seed) in [(0.5, 1u64), (0.3, 2), (1.0, 5)] {
            let op = TransformOp::new(TransformKind::Translate, m).unwrap();
            let (out, _) = pre_augment(&img, None, &[op], seed).unwrap();
            let (mut sx, mut sy, mut total) = (0.0, 0.0, 0.0);
            for y in 0..48 {
                for x in 0..48 {
                    let v = out.get(x, y, 0);
                    sx += v * x as f64;
                    sy += v * y as f64;
                    total += v;
                }
            }
            let shift = ((sx / total - 24.0).powi(2) + (sy / total - 24.0).powi(2)).sqrt();
            assert_eq!(shift, (8.0 * m).round());
        }
    }

    #[test]
    fn geometric_ops_move_landmarks_with_pixels() {
        let mut img = Image::new(40, 40);
        img.set_pixel(15, 20, [1.0; 3]);
        let lm = LandmarkSet::with_corners(vec![[15.0, 20.0]], 40, 40);
        let op = TransformOp::new(TransformKind::Translate, 0.5).unwrap();
        let (out, l) = pre_augment(&img, Some(&lm), &[op], 9).unwrap();
        let l = l.unwrap();
        let p = l.points[0];
        assert_eq!(out.get(p[0] as usize, p[1] as usize, 0), 1.0);
        assert!(l.corners_exact(40, 40));
    }

    #[test]
    fn outputs_stay_in_range() {
        let img = textured(32);
        let (out, _) = pre_augment(&img, None, &all_ops(1.0), 4).unwrap();
        assert!(out.in_unit_range());
    }

    #[test]
    fn magnitude_is_validated() {
        assert!(TransformOp::new(TransformKind::Blur, 1.5).is_err());
    }
}
