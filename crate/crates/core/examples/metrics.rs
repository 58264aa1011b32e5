//! Compute the detection report and DET curve for a hand-made score set.

use grl_mad::bioeval::{det_curve, Report, ScoreSet};

fn main() -> grl_mad::Result<()> {
    let s = ScoreSet::from_scores(&[0.9, 0.6, 0.4, 0.85, 0.7], &[0.8, 0.3, 0.1, 0.2, 0.05]);
    let r = Report::compute(&s)?;
    print!("{}", r.to_json());
    for p in det_curve(&s)? {
        println!("t={:<6} bpcer={:.2} apcer={:.2}", p.threshold, p.bpcer, p.apcer);
    }
    Ok(())
}
