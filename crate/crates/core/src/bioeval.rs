//! Attack-detection metrics over morph scores.
//!
//! Scores are morph probabilities: a sample is declared a morph when
//! `score >= t`. At threshold `t`, APCER is the fraction of morphs scored
//! below `t` and BPCER the fraction of bona fide scored at or above `t`.
//! Thresholds are restricted to observed scores (plus `+inf` where noted);
//! no interpolation is performed.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grlnet::InferenceModel;
use crate::manifest::Corpus;
use crate::regloss;
use crate::sample::{FaceSample, Label, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub sample_id: String,
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    pub entries: Vec<ScoreEntry>,
}

/// Scores split by class and sorted ascending.
struct Sorted {
    morph: Vec<f64>,
    bona: Vec<f64>,
}

impl Sorted {
    /// Morphs scored strictly below `t`.
    fn morph_below(&self, t: f64) -> usize {
        self.morph.partition_point(|&s| s < t)
    }

    /// Bona fide scored at or above `t`.
    fn bona_at_or_above(&self, t: f64) -> usize {
        self.bona.len() - self.bona.partition_point(|&s| s < t)
    }

    fn rates(&self, t: f64) -> (f64, f64) {
        (
            self.morph_below(t) as f64 / self.morph.len() as f64,
            self.bona_at_or_above(t) as f64 / self.bona.len() as f64,
        )
    }

    fn thresholds(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.morph.iter().chain(&self.bona).copied().collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

impl ScoreSet {
    pub fn new() -> Self {
        ScoreSet::default()
    }

    pub fn push(&mut self, sample_id: impl Into<String>, label: Label, score: f64) {
        self.entries.push(ScoreEntry {
            sample_id: sample_id.into(),
            label,
            score,
        });
    }

    /// Build from parallel slices of morph and bona fide scores (ids are synthetic).
    pub fn from_scores(morph: &[f64], bona: &[f64]) -> Self {
        let mut s = ScoreSet::new();
        for (i, &v) in morph.iter().enumerate() {
            s.push(format!("m{i}"), Label::Morph, v);
        }
        for (i, &v) in bona.iter().enumerate() {
            s.push(format!("b{i}"), Label::Bonafide, v);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn sorted(&self) -> Result<Sorted> {
        if let Some(e) = self.entries.iter().find(|e| !e.score.is_finite()) {
            return Err(Error::invalid(format!("non-finite score for {}", e.sample_id)));
        }
        let mut morph: Vec<f64> = Vec::new();
        let mut bona: Vec<f64> = Vec::new();
        for e in &self.entries {
            match e.label {
                Label::Morph => morph.push(e.score),
                Label::Bonafide => bona.push(e.score),
            }
        }
        if morph.is_empty() || bona.is_empty() {
            return Err(Error::invalid("score set needs both morph and bona fide entries"));
        }
        morph.sort_by(f64::total_cmp);
        bona.sort_by(f64::total_cmp);
        Ok(Sorted { morph, bona })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("sample_id,label,score\n");
        for e in &self.entries {
            writeln!(out, "{},{},{}", e.sample_id, e.label.as_str(), e.score).unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<ScoreSet> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        if lines.next() != Some("sample_id,label,score") {
            return Err(Error::invalid(format!("{}: unexpected header", path.display())));
        }
        let mut s = ScoreSet::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let mut parts = line.rsplitn(3, ',');
            let (score, label, id) = (parts.next(), parts.next(), parts.next());
            let (Some(score), Some(label), Some(id)) = (score, label, id) else {
                return Err(Error::invalid(format!("malformed score row {line:?}")));
            };
            let score: f64 = score
                .parse()
                .map_err(|_| Error::invalid(format!("bad score in row {line:?}")))?;
            s.push(id, Label::parse(label)?, score);
        }
        Ok(s)
    }
}

/// APCER at the smallest observed threshold (or `+inf`) whose BPCER does not
/// exceed `bpcer_target`.
pub fn apcer_at_bpcer(s: &ScoreSet, bpcer_target: f64) -> Result<f64> {
    if !(bpcer_target > 0.0 && bpcer_target < 1.0) {
        return Err(Error::invalid(format!("bpcer target {bpcer_target} outside (0, 1)")));
    }
    let sorted = s.sorted()?;
    let nb = sorted.bona.len() as f64;
    for t in sorted.thresholds().into_iter().chain(std::iter::once(f64::INFINITY)) {
        if sorted.bona_at_or_above(t) as f64 / nb <= bpcer_target {
            return Ok(sorted.rates(t).0);
        }
    }
    unreachable!("BPCER at +inf is zero")
}

/// Detection equal error rate: mean of APCER and BPCER at the observed
/// threshold minimizing their gap, ties resolved toward the smaller threshold.
pub fn eer(s: &ScoreSet) -> Result<f64> {
    let sorted = s.sorted()?;
    let (na, nb) = (sorted.morph.len() as i128, sorted.bona.len() as i128);
    let mut best: Option<(i128, f64)> = None;
    for t in sorted.thresholds() {
        let a = sorted.morph_below(t) as i128;
        let b = sorted.bona_at_or_above(t) as i128;
        // |a/na - b/nb| scaled by na*nb keeps the comparison exact.
        let gap = (a * nb - b * na).abs();
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, t));
        }
    }
    let (_, t) = best.expect("at least one threshold");
    let (apcer, bpcer) = sorted.rates(t);
    Ok((apcer + bpcer) / 2.0)
}

/// `P(morph score > bona fide score) + P(equal) / 2` over all cross pairs.
pub fn auc(s: &ScoreSet) -> Result<f64> {
    let sorted = s.sorted()?;
    let mut twice: u128 = 0;
    for &m in &sorted.morph {
        let below = sorted.bona.partition_point(|&b| b < m);
        let not_above = sorted.bona.partition_point(|&b| b <= m);
        twice += 2 * below as u128 + (not_above - below) as u128;
    }
    let denom = 2 * sorted.morph.len() as u128 * sorted.bona.len() as u128;
    Ok(twice as f64 / denom as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub bpcer: f64,
    pub apcer: f64,
}

/// One operating point per distinct observed threshold plus both infinities,
/// ordered by increasing BPCER.
pub fn det_curve(s: &ScoreSet) -> Result<Vec<DetPoint>> {
    let sorted = s.sorted()?;
    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(sorted.thresholds());
    thresholds.push(f64::INFINITY);
    Ok(thresholds
        .into_iter()
        .rev()
        .map(|t| {
            let (apcer, bpcer) = sorted.rates(t);
            DetPoint {
                threshold: t,
                bpcer,
                apcer,
            }
        })
        .collect())
}

pub fn write_det_csv(points: &[DetPoint], path: &Path) -> Result<()> {
    let mut out = String::from("bpcer,apcer\n");
    for p in points {
        writeln!(out, "{},{}", p.bpcer, p.apcer).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Table-style summary, all values in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Report {
    pub apcer1: f64,
    pub apcer5: f64,
    pub apcer10: f64,
    pub eer: f64,
    pub auc: f64,
}

impl Report {
    pub fn compute(s: &ScoreSet) -> Result<Report> {
        Ok(Report {
            apcer1: 100.0 * apcer_at_bpcer(s, 0.01)?,
            apcer5: 100.0 * apcer_at_bpcer(s, 0.05)?,
            apcer10: 100.0 * apcer_at_bpcer(s, 0.10)?,
            eer: 100.0 * eer(s)?,
            auc: 100.0 * auc(s)?,
        })
    }

    /// JSON object with two-decimal percentages.
    pub fn to_json(&self) -> String {
        format!(
            "{{\"apcer@1\": {:.2}, \"apcer@5\": {:.2}, \"apcer@10\": {:.2}, \"eer\": {:.2}, \"auc\": {:.2}}}\n",
            self.apcer1, self.apcer5, self.apcer10, self.eer, self.auc
        )
    }

    pub fn to_csv(&self) -> String {
        format!(
            "apcer@1,apcer@5,apcer@10,eer,auc\n{:.2},{:.2},{:.2},{:.2},{:.2}\n",
            self.apcer1, self.apcer5, self.apcer10, self.eer, self.auc
        )
    }
}

/// Write the JSON report at `out_path` and the same numbers as CSV next to it.
pub fn report(s: &ScoreSet, out_path: &Path) -> Result<Report> {
    let r = Report::compute(s)?;
    std::fs::write(out_path, r.to_json()).map_err(|e| Error::io(out_path, e))?;
    let csv = out_path.with_extension("csv");
    std::fs::write(&csv, r.to_csv()).map_err(|e| Error::io(&csv, e))?;
    Ok(r)
}

/// Morph probability `softmax(logits)[morph]` at unit temperature.
pub fn morph_score(logits: [f64; 2]) -> f64 {
    let p = regloss::tempered_softmax(&logits, 1.0).expect("unit temperature");
    p[Label::Morph.index()]
}

/// Score samples with a stripped model. Images whose size differs from the
/// model input are resized bilinearly first.
pub fn score_samples(model: &InferenceModel, samples: &[FaceSample]) -> Result<ScoreSet> {
    let size = model.spec().input_size;
    let mut out = ScoreSet::new();
    for s in samples {
        let logits = if s.image.width() == size && s.image.height() == size {
            model.logits(&s.image)?
        } else {
            model.logits(&s.image.resize_bilinear(size, size))?
        };
        out.push(s.id.clone(), s.label, morph_score(logits));
    }
    Ok(out)
}

/// Score one split of a corpus.
pub fn score_dataset(model: &InferenceModel, corpus: &Corpus, split: Split) -> Result<ScoreSet> {
    let samples = corpus.load_split(split)?;
    score_samples(model, &samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_scores() {
        let s = ScoreSet::from_scores(&[0.9, 0.8, 0.7], &[0.1, 0.2, 0.3]);
        for t in [0.01, 0.05, 0.1, 0.5] {
            assert_eq!(apcer_at_bpcer(&s, t).unwrap(), 0.0);
        }
        assert_eq!(eer(&s).unwrap(), 0.0);
        assert_eq!(auc(&s).unwrap(), 1.0);
        let r = Report::compute(&s).unwrap();
        assert_eq!(
            r.to_json(),
            "{\"apcer@1\": 0.00, \"apcer@5\": 0.00, \"apcer@10\": 0.00, \"eer\": 0.00, \"auc\": 100.00}\n"
        );
    }

    #[test]
    fn swapped_labels_give_full_error() {
        let s = ScoreSet::from_scores(&[0.1, 0.2, 0.3], &[0.9, 0.8, 0.7]);
        assert_eq!(eer(&s).unwrap(), 1.0);
        assert_eq!(auc(&s).unwrap(), 0.0);
    }

    #[test]
    fn mixed_example_eer_is_one_third() {
        let s = ScoreSet::from_scores(&[0.9, 0.6, 0.4], &[0.8, 0.3, 0.1]);
        assert!((eer(&s).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // BPCER <= 0.5 first holds at t = 0.4 (only 0.8 at or above), where no morph is below.
        assert_eq!(apcer_at_bpcer(&s, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn ties_give_half_auc() {
        let s = ScoreSet::from_scores(&[0.5; 4], &[0.5; 3]);
        assert_eq!(auc(&s).unwrap(), 0.5);
        // Only +inf reaches BPCER <= 0.5, where every morph counts as missed.
        assert_eq!(apcer_at_bpcer(&s, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn det_curve_endpoints_and_monotone() {
        let s = ScoreSet::from_scores(&[0.9, 0.6, 0.4, 0.4], &[0.8, 0.4, 0.1]);
        let c = det_curve(&s).unwrap();
        assert_eq!((c[0].bpcer, c[0].apcer), (0.0, 1.0));
        let last = c.last().unwrap();
        assert_eq!((last.bpcer, last.apcer), (1.0, 0.0));
        for w in c.windows(2) {
            assert!(w[1].bpcer >= w[0].bpcer);
            assert!(w[1].apcer <= w[0].apcer);
        }
    }

    #[test]
    fn missing_class_is_rejected() {
        let s = ScoreSet::from_scores(&[0.2, 0.4], &[]);
        assert!(matches!(eer(&s), Err(Error::InvalidArgument(_))));
        assert!(matches!(auc(&s), Err(Error::InvalidArgument(_))));
        let ok = ScoreSet::from_scores(&[0.2], &[0.1]);
        assert!(apcer_at_bpcer(&ok, 0.0).is_err());
        assert!(apcer_at_bpcer(&ok, 1.0).is_err());
    }

    #[test]
    fn scores_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = ScoreSet::from_scores(&[0.25, 0.125], &[0.5]);
        s.write_csv(&p).unwrap();
        assert_eq!(ScoreSet::read_csv(&p).unwrap(), s);
    }
}
