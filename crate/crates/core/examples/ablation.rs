//! Variant ablation on a small corpus (one seed, few epochs).

use grl_mad::augment::{augment_samples, AugmentConfig};
use grl_mad::synthface::{generate_samples, CorpusConfig};
use grl_mad::trainer::{ablate_samples, benchmark::style_pool, TrainConfig, Variant};

fn main() -> grl_mad::Result<()> {
    let raw = generate_samples(&CorpusConfig {
        identities: 12,
        instances: 3,
        attacks: vec!["lm".into()],
        test_fraction: 0.25,
        max_morphs: Some(30),
        size: 32,
        ..CorpusConfig::default()
    })?;
    let all = augment_samples(&raw, &style_pool(8, 32, 1)?, &AugmentConfig::default())?;
    let (train, test): (Vec<_>, Vec<_>) = all.into_iter().partition(|s| s.split == grl_mad::Split::Train);
    let base = TrainConfig {
        image_size: 32,
        width: 8,
        epochs: 3,
        ..TrainConfig::default()
    };
    let mut entries: Vec<(String, TrainConfig)> = Variant::ALL
        .iter()
        .map(|&v| (v.to_string(), TrainConfig { variant: v, ..base.clone() }))
        .collect();
    entries.push((
        "grl-1level".into(),
        TrainConfig {
            variant: Variant::Grl,
            emb_levels: Some(1),
            ..base.clone()
        },
    ));
    let table = ablate_samples(&entries, &train, &test, &[0])?;
    print!("{}", table.to_json());
    Ok(())
}
