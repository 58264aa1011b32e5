//! Post-processing artifacts for robustness protocols: a JPEG
//! resize-encode-decode cycle and a synthetic print-scan pipeline.

use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::manifest::{Corpus, CorpusWriter};
use crate::sample::FaceSample;
use crate::seed;

pub const MIN_RESOLUTION: usize = 16;

/// Encode as baseline JPEG at `quality` and decode, keeping the resolution.
pub fn jpeg_roundtrip(img: &Image, quality: u8) -> Result<Image> {
    if !(1..=100).contains(&quality) {
        return Err(Error::invalid(format!("jpeg quality {quality} outside [1, 100]")));
    }
    let rgb = img.to_rgb8();
    let mut buf = Vec::new();
    let mut enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut buf, quality);
    enc.encode_image(&rgb)?;
    let decoded = image::load_from_memory_with_format(&buf, image::ImageFormat::Jpeg)?.to_rgb8();
    Ok(Image::from_rgb8(&decoded))
}

/// Resize to `resolution x resolution`, then JPEG round-trip at `quality`.
pub fn jpeg_cycle(img: &Image, quality: u32, resolution: usize) -> Result<Image> {
    if !(1..=100).contains(&quality) {
        return Err(Error::invalid(format!("jpeg quality {quality} outside [1, 100]")));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::invalid(format!(
            "resolution {resolution} below minimum {MIN_RESOLUTION}"
        )));
    }
    let resized = img.resize_bilinear(resolution, resolution);
    jpeg_roundtrip(&resized, quality as u8)
}

/// Fixed print-scan simulation: Gaussian blur (sigma 0.8 px), per-channel
/// gamma jitter within 10%, additive noise (sigma 0.01), and a 2% bicubic
/// down-up resample.
pub fn print_scan_sim(img: &Image, seed: u64) -> Image {
    let mut rng = seed::rng(seed::derive_tag(seed, "print-scan"));
    let gammas: [f64; 3] = std::array::from_fn(|_| 1.0 + rng.gen_range(-0.1..=0.1));
    let mut out = img.gaussian_blur(0.8);
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let n: f64 = StandardNormal.sample(&mut rng);
        *v = v.clamp(0.0, 1.0).powf(gammas[i % 3]) + 0.01 * n;
    }
    let (w, h) = (img.width(), img.height());
    let dw = ((w as f64) * 0.98).round().max(1.0) as usize;
    let dh = ((h as f64) * 0.98).round().max(1.0) as usize;
    out.resize_bicubic(dw, dh).resize_bicubic(w, h).clipped()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PostOp {
    Jpeg { quality: u32, resolution: usize },
    PrintScan { seed: u64 },
}

impl PostOp {
    pub fn domain_tag(&self) -> String {
        match self {
            PostOp::Jpeg {
                quality,
                resolution,
            } => format!("jpg-{quality}-{resolution}"),
            PostOp::PrintScan { .. } => "ps".to_string(),
        }
    }
}

/// Apply a post-processing op to a sample. Only the image, landmark scale,
/// domain tag, and id suffix change.
pub fn apply(sample: &FaceSample, op: PostOp) -> Result<FaceSample> {
    let image = match op {
        PostOp::Jpeg {
            quality,
            resolution,
        } => jpeg_cycle(&sample.image, quality, resolution)?,
        PostOp::PrintScan { seed } => {
            print_scan_sim(&sample.image, seed::derive_tag(seed, &sample.id))
        }
    };
    let landmarks = sample.landmarks.rescaled(
        sample.image.width(),
        sample.image.height(),
        image.width(),
        image.height(),
    );
    let tag = op.domain_tag();
    Ok(FaceSample {
        id: format!("{}+{tag}", sample.id),
        image,
        landmarks,
        domain: tag,
        ..sample.clone()
    })
}

/// Post-process every sample of a stored corpus into a new corpus.
pub fn apply_corpus(corpus: &Corpus, op: PostOp, out_dir: &Path) -> Result<Corpus> {
    let mut w = CorpusWriter::create(out_dir)?;
    for s in corpus.load_where(|_| true)? {
        w.add(&apply(&s, op)?)?;
    }
    w.finish()
}
