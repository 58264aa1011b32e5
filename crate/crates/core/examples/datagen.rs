//! Generate a small synthetic corpus and print its manifest summary.
//!
//! cargo run --release --example datagen -- [OUT_DIR]

use std::path::PathBuf;

use grl_mad::synthface::{build_corpus, CorpusConfig};

fn main() -> grl_mad::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("grl-datagen"));
    let cfg = CorpusConfig {
        identities: 8,
        instances: 3,
        attacks: vec!["lm".into(), "self-morph".into()],
        test_fraction: 0.25,
        ..CorpusConfig::default()
    };
    let corpus = build_corpus(&cfg, &out)?;
    let morphs = corpus.records().iter().filter(|r| r.label == grl_mad::Label::Morph).count();
    println!("{} samples ({morphs} morphs) in {}", corpus.len(), out.display());
    println!("content hash {}", corpus.content_hash()?);
    for r in corpus.records().iter().take(5) {
        println!("{} {} {:?} {}", r.id, r.label.as_str(), r.identity_ids, r.attack);
    }
    Ok(())
}
