//! Corpus-level augmentation: self-morphs and style-mixed views.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::manifest::{Corpus, CorpusWriter};
use crate::morphkit;
use crate::sample::{FaceSample, Split};
use crate::seed;
use crate::stylemix::{self, StyleSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Add self-morphs of the bona fide training instances.
    pub sm: bool,
    /// Add a style-mixed view of every training sample (self-morphs included).
    pub ism: bool,
    /// Chance that a given sample receives a style-mixed view; the same for
    /// both classes.
    pub ism_probability: f64,
    pub style: StyleSpec,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            sm: true,
            ism: true,
            ism_probability: 1.0,
            style: StyleSpec::default(),
            alpha: morphkit::DEFAULT_ALPHA,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// Parse an op list such as `sm,ism`.
    pub fn with_ops(mut self, ops: &str) -> Result<Self> {
        self.sm = false;
        self.ism = false;
        for op in ops.split(',').map(str::trim).filter(|o| !o.is_empty()) {
            match op {
                "sm" => self.sm = true,
                "ism" => self.ism = true,
                other => return Err(Error::invalid(format!("unknown augmentation {other:?}"))),
            }
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ism_probability) {
            return Err(Error::invalid("ism probability outside [0, 1]"));
        }
        self.style.validate()
    }
}

fn keeps_ism(cfg: &AugmentConfig, id: &str) -> bool {
    if cfg.ism_probability >= 1.0 {
        return true;
    }
    let u = (seed::derive_tag(seed::derive_tag(cfg.seed, "ism-keep"), id) >> 11) as f64 / (1u64 << 53) as f64;
    u < cfg.ism_probability
}

/// The inputs followed by the augmented samples. Only training-split samples
/// are augmented.
pub fn augment_samples(samples: &[FaceSample], pool: &[Image], cfg: &AugmentConfig) -> Result<Vec<FaceSample>> {
    cfg.validate()?;
    let mut out = samples.to_vec();
    let train: Vec<FaceSample> = samples.iter().filter(|s| s.split == Split::Train).cloned().collect();
    let mut base = train.clone();
    if cfg.sm {
        let sm = morphkit::self_morph_set(&train, cfg.alpha, cfg.seed)?;
        base.extend(sm.iter().cloned());
        out.extend(sm);
    }
    if cfg.ism {
        let tag = seed::derive_tag(cfg.seed, "ism");
        for s in &base {
            if keeps_ism(cfg, &s.id) {
                out.push(stylemix::ism_augment(s, pool, &cfg.style, tag)?);
            }
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Augment a stored corpus into a new one under `out_dir`.
pub fn augment_corpus(corpus: &Corpus, pool: &[Image], cfg: &AugmentConfig, out_dir: &Path) -> Result<Corpus> {
    let samples = corpus.load_where(|_| true)?;
    let all = augment_samples(&samples, pool, cfg)?;
    let mut w = CorpusWriter::create(out_dir)?;
    for s in &all {
        w.add(s)?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Label;
    use crate::synthface::{generate_samples, CorpusConfig};

    fn base() -> Vec<FaceSample> {
        let cfg = CorpusConfig {
            identities: 2,
            instances: 3,
            size: 32,
            ..CorpusConfig::default()
        };
        generate_samples(&cfg).unwrap()
    }

    #[test]
    fn counts_and_labels() {
        let bona = base();
        let pool = vec![Image::filled(32, 32, [0.8, 0.2, 0.1])];
        let out = augment_samples(&bona, &pool, &AugmentConfig::default()).unwrap();
        // 6 bona fide, 6 self-morphs, 12 style-mixed views
        assert_eq!(out.len(), 24);
        let ism: Vec<_> = out.iter().filter(|s| s.domain == "ism").collect();
        assert_eq!(ism.len(), 12);
        assert_eq!(ism.iter().filter(|s| s.label == Label::Morph).count(), 6);
        assert_eq!(augment_samples(&bona, &pool, &AugmentConfig::default()).unwrap(), out);
    }

    #[test]
    fn op_parsing_and_probability() {
        let c = AugmentConfig::default().with_ops("ism").unwrap();
        assert!(!c.sm && c.ism);
        assert!(AugmentConfig::default().with_ops("sm,warp").is_err());
        let pool = vec![Image::filled(32, 32, [0.5; 3])];
        let none = AugmentConfig {
            ism_probability: 0.0,
            ..c
        };
        assert_eq!(augment_samples(&base(), &pool, &none).unwrap().len(), 6);
    }

    #[test]
    fn empty_pool_is_rejected_when_ism_requested() {
        let c = AugmentConfig::default();
        assert!(augment_samples(&base(), &[], &c).is_err());
    }
}
