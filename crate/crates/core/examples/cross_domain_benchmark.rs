//! Baseline against the full method on the synthetic cross-domain benchmark:
//! train on landmark morphs, test on restyled self-morphs of unseen
//! identities, clean and JPEG-cycled.
//!
//! cargo run --release --example cross_domain_benchmark -- [SEEDS]

use grl_mad::trainer::benchmark::{build, run, train_config, BenchmarkConfig};
use grl_mad::trainer::{seeds_from, Variant};

fn main() -> grl_mad::Result<()> {
    let seeds: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = BenchmarkConfig::default();
    let bench = build(&cfg)?;
    println!("train {} samples, test {} samples", bench.train.len(), bench.test.len());
    let entries = vec![
        ("baseline".to_string(), train_config(&cfg, Variant::Baseline)),
        ("grl".to_string(), train_config(&cfg, Variant::Grl)),
    ];
    let (clean, jpeg) = run(&bench, &entries, &seeds_from(0, seeds))?;
    for (name, table) in [("held-out", &clean), ("held-out jpeg q50", &jpeg)] {
        for row in &table.rows {
            println!("{name:<18} {:<9} median EER {:6.2}  AUC {:6.2}", row.name, row.median_eer, row.median_auc);
        }
    }
    Ok(())
}
