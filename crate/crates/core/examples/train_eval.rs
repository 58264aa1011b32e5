//! Train one model on a generated corpus, save it, and evaluate the stripped
//! detector on the held-out split.

use grl_mad::augment::{augment_corpus, AugmentConfig};
use grl_mad::bioeval::{report, score_dataset};
use grl_mad::grlnet::load_checkpoint;
use grl_mad::sample::Split;
use grl_mad::synthface::{build_corpus, CorpusConfig};
use grl_mad::trainer::{benchmark::style_pool, fit, TrainConfig, Variant};

fn main() -> grl_mad::Result<()> {
    let dir = std::env::temp_dir().join("grl-train-eval");
    let raw = build_corpus(
        &CorpusConfig {
            identities: 12,
            instances: 3,
            attacks: vec!["lm".into()],
            test_fraction: 0.25,
            max_morphs: Some(30),
            size: 32,
            ..CorpusConfig::default()
        },
        &dir.join("raw"),
    )?;
    let pool = style_pool(8, 32, 5)?;
    let corpus = augment_corpus(&raw, &pool, &AugmentConfig::default(), &dir.join("aug"))?;

    let cfg = TrainConfig {
        variant: Variant::Grl,
        image_size: 32,
        width: 8,
        epochs: 10,
        ..TrainConfig::default()
    };
    let ckpt = dir.join("grl.ckpt");
    let out = fit(&cfg, &corpus, &ckpt, None)?;
    for r in &out.trace {
        println!("epoch {} l_cls {:.4} l_total {:.4}", r.epoch, r.metrics.l_cls, r.metrics.l_total);
    }
    let model = load_checkpoint(&ckpt)?.model.strip_inference();
    let scores = score_dataset(&model, &corpus, Split::Test)?;
    let r = report(&scores, &dir.join("report.json"))?;
    print!("{}", r.to_json());
    Ok(())
}
