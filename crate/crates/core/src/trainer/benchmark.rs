//! Synthetic cross-domain benchmark.
//!
//! Training data: bona fide faces and cross-identity landmark morphs of a set
//! of identities, augmented with self-morphs and style-mixed views drawn from
//! style pool A. Held-out data: other identities, bona fide plus self-morphs
//! only, all restyled with a disjoint style pool B. A second held-out copy is
//! JPEG-cycled.

use serde::{Deserialize, Serialize};

use super::{ablate_multi, AblationTable, TrainConfig, Variant};
use crate::augment::{augment_samples, AugmentConfig};
use crate::error::Result;
use crate::image::Image;
use crate::postops::{self, PostOp};
use crate::sample::{FaceSample, Split};
use crate::seed;
use crate::stylemix::{self, StyleSpec};
use crate::synthface::{generate_samples, render_face, sample_identity, CorpusConfig, NuisanceDistribution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub train_identities: usize,
    pub test_identities: usize,
    pub instances: usize,
    /// Cap on training cross-identity morphs.
    pub max_morphs: usize,
    pub size: usize,
    pub style_pool_size: usize,
    pub jpeg_quality: u32,
    pub jpeg_resolution: usize,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            train_identities: 24,
            test_identities: 32,
            instances: 4,
            max_morphs: 96,
            size: 32,
            style_pool_size: 16,
            jpeg_quality: 50,
            jpeg_resolution: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CrossDomainBenchmark {
    pub train: Vec<FaceSample>,
    pub test: Vec<FaceSample>,
    pub test_jpeg: Vec<FaceSample>,
}

/// Faces rendered under the shifted nuisance distribution, used as style
/// references.
pub fn style_pool(n: usize, size: usize, seed: u64) -> Result<Vec<Image>> {
    let dist = NuisanceDistribution::shifted();
    (0..n as u64)
        .map(|k| {
            let s = seed::derive(seed, k);
            let face = render_face(&sample_identity(s), &dist.sample(seed::derive_tag(s, "style"), size), size)?;
            Ok(face.image)
        })
        .collect()
}

pub fn build(cfg: &BenchmarkConfig) -> Result<CrossDomainBenchmark> {
    let train_raw = generate_samples(&CorpusConfig {
        identities: cfg.train_identities,
        instances: cfg.instances,
        attacks: vec!["lm".into()],
        max_morphs: Some(cfg.max_morphs),
        size: cfg.size,
        seed: seed::derive_tag(cfg.seed, "train"),
        ..CorpusConfig::default()
    })?;
    let pool_a = style_pool(cfg.style_pool_size, cfg.size, seed::derive_tag(cfg.seed, "pool-a"))?;
    let train = augment_samples(
        &train_raw,
        &pool_a,
        &AugmentConfig {
            seed: seed::derive_tag(cfg.seed, "augment"),
            ..AugmentConfig::default()
        },
    )?;

    let test_raw = generate_samples(&CorpusConfig {
        identities: cfg.test_identities,
        instances: cfg.instances,
        attacks: vec!["self-morph".into()],
        test_fraction: 1.0,
        size: cfg.size,
        seed: seed::derive_tag(cfg.seed, "test"),
        ..CorpusConfig::default()
    })?;
    let pool_b = style_pool(cfg.style_pool_size, cfg.size, seed::derive_tag(cfg.seed, "pool-b"))?;
    let style_seed = seed::derive_tag(cfg.seed, "test-style");
    let test: Vec<FaceSample> = test_raw
        .iter()
        .map(|s| {
            let mut x = stylemix::ism_augment(s, &pool_b, &StyleSpec::default(), style_seed)?;
            x.split = Split::Test;
            Ok(x)
        })
        .collect::<Result<_>>()?;
    let op = PostOp::Jpeg {
        quality: cfg.jpeg_quality,
        resolution: cfg.jpeg_resolution,
    };
    let test_jpeg = test.iter().map(|s| postops::apply(s, op)).collect::<Result<_>>()?;
    Ok(CrossDomainBenchmark { train, test, test_jpeg })
}

/// Train configuration used for the benchmark runs: a narrower backbone
/// trained for longer than the desk defaults.
pub fn train_config(bench: &BenchmarkConfig, variant: Variant) -> TrainConfig {
    TrainConfig {
        image_size: bench.size,
        width: 8,
        epochs: 30,
        lr: 0.003,
        variant,
        ..TrainConfig::default()
    }
}

/// Train the named configurations once per seed; returns the tables for the
/// clean and the JPEG-cycled held-out sets.
pub fn run(
    bench: &CrossDomainBenchmark,
    entries: &[(String, TrainConfig)],
    seeds: &[u64],
) -> Result<(AblationTable, AblationTable)> {
    let mut t = ablate_multi(entries, &bench.train, &[&bench.test, &bench.test_jpeg], seeds)?;
    let jpeg = t.pop().expect("two tables");
    Ok((t.pop().expect("two tables"), jpeg))
}
