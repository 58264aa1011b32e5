use std::collections::BTreeMap;

use crate::sample::{FaceSample, Label};
use crate::seed;

/// Domain tag carried by style-mixed samples.
pub const ISM_DOMAIN: &str = "ism";
/// Attack tag carried by self-morphs.
pub const SM_ATTACK: &str = "self-morph";

/// Whether a sample is an augmented view (a consistency target, never a source).
pub fn is_target_view(s: &FaceSample) -> bool {
    s.domain == ISM_DOMAIN
}

fn pair_key(s: &FaceSample) -> Vec<u64> {
    let mut ids = s.identity_ids.clone();
    ids.sort_unstable();
    ids
}

/// Lookup tables over a training corpus for target selection.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    samples: Vec<FaceSample>,
    by_origin: BTreeMap<String, Vec<usize>>,
    by_pair: BTreeMap<Vec<u64>, Vec<usize>>,
}

impl CorpusIndex {
    pub fn new(mut samples: Vec<FaceSample>) -> Self {
        samples.sort_by(|a, b| a.id.cmp(&b.id));
        let mut by_origin: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut by_pair: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            by_origin.entry(s.origin().to_string()).or_default().push(i);
            if s.label == Label::Morph {
                by_pair.entry(pair_key(s)).or_default().push(i);
            }
        }
        CorpusIndex {
            samples,
            by_origin,
            by_pair,
        }
    }

    pub fn samples(&self) -> &[FaceSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Target for `source`: a same-content sample under another domain tag,
    /// else (morphs only) a morph of the same identity pair under another
    /// attack. Ties are broken by a seeded draw. Never crosses labels.
    pub fn find_target(&self, source: &FaceSample, seed: u64) -> Option<usize> {
        if is_target_view(source) {
            return None;
        }
        let same_content: Vec<usize> = self
            .by_origin
            .get(source.origin())
            .into_iter()
            .flatten()
            .copied()
            .filter(|&i| {
                let t = &self.samples[i];
                t.id != source.id && t.domain != source.domain && t.label == source.label
            })
            .collect();
        let candidates = if !same_content.is_empty() || source.label != Label::Morph {
            same_content
        } else {
            self.by_pair
                .get(&pair_key(source))
                .into_iter()
                .flatten()
                .copied()
                .filter(|&i| {
                    let t = &self.samples[i];
                    t.attack != source.attack && t.label == Label::Morph
                })
                .collect()
        };
        if candidates.is_empty() {
            return None;
        }
        let pick = seed::derive_tag(seed, &source.id) % candidates.len() as u64;
        Some(candidates[pick as usize])
    }
}

/// Sources with their consistency targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedBatch {
    pub source: Vec<FaceSample>,
    pub target: Vec<FaceSample>,
    /// `pairing[i]` indexes `target` for `source[i]`; `None` means the sample
    /// only enters the classification loss.
    pub pairing: Vec<Option<usize>>,
}

impl PairedBatch {
    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn pair_count(&self) -> usize {
        self.pairing.iter().flatten().count()
    }

    /// Batch without any pairing.
    pub fn unpaired(source: Vec<FaceSample>) -> Self {
        let n = source.len();
        PairedBatch {
            source,
            target: vec![],
            pairing: vec![None; n],
        }
    }
}

/// Pair every sample of `batch` against `index`.
pub fn make_pairs(batch: &[FaceSample], index: &CorpusIndex, seed: u64) -> PairedBatch {
    let mut target = Vec::new();
    let mut pairing = Vec::with_capacity(batch.len());
    for s in batch {
        match index.find_target(s, seed) {
            Some(i) => {
                pairing.push(Some(target.len()));
                target.push(index.samples[i].clone());
            }
            None => pairing.push(None),
        }
    }
    PairedBatch {
        source: batch.to_vec(),
        target,
        pairing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;
    use crate::sample::{LandmarkSet, Split};

    fn sample(id: &str, label: Label, ids: &[u64], domain: &str, attack: &str) -> FaceSample {
        FaceSample {
            id: id.to_string(),
            image: Image::new(4, 4),
            landmarks: LandmarkSet::new(vec![]),
            label,
            identity_ids: ids.to_vec(),
            domain: domain.to_string(),
            attack: attack.to_string(),
            split: Split::Train,
        }
    }

    fn corpus() -> Vec<FaceSample> {
        vec![
            sample("bf-0001-00", Label::Bonafide, &[1], "raw", "none"),
            sample("bf-0001-00+ism", Label::Bonafide, &[1], "ism", "none"),
            sample("lm-0001-0002", Label::Morph, &[1, 2], "raw", "lm"),
            sample("lm-0001-0002+ism", Label::Morph, &[1, 2], "ism", "lm"),
            sample("lm-0001-0003", Label::Morph, &[1, 3], "raw", "lm"),
            sample("wm-0003-0001", Label::Morph, &[3, 1], "raw", "other"),
            sample("lm-0002-0003", Label::Morph, &[2, 3], "raw", "lm"),
        ]
    }

    #[test]
    fn pairs_follow_the_rules() {
        let all = corpus();
        let index = CorpusIndex::new(all.clone());
        let find = |id: &str| {
            let s = all.iter().find(|s| s.id == id).unwrap();
            index.find_target(s, 0).map(|i| index.samples()[i].id.clone())
        };
        assert_eq!(find("bf-0001-00").as_deref(), Some("bf-0001-00+ism"));
        assert_eq!(find("lm-0001-0002").as_deref(), Some("lm-0001-0002+ism"));
        assert_eq!(find("lm-0001-0003").as_deref(), Some("wm-0003-0001"));
        assert_eq!(find("lm-0002-0003"), None);
        assert_eq!(find("bf-0001-00+ism"), None);
    }

    #[test]
    fn no_augmentations_means_no_pairs() {
        let raw: Vec<FaceSample> = corpus().into_iter().filter(|s| s.domain == "raw" && s.attack != "other").collect();
        let index = CorpusIndex::new(raw.clone());
        let pb = make_pairs(&raw, &index, 3);
        assert_eq!(pb.pair_count(), 0);
        assert!(pb.target.is_empty());
    }

    #[test]
    fn labels_never_cross() {
        let mut all = corpus();
        all.push(sample("lm-0001-0002+x", Label::Bonafide, &[1, 2], "odd", "none"));
        let index = CorpusIndex::new(all.clone());
        let pb = make_pairs(&all, &index, 9);
        for (i, p) in pb.pairing.iter().enumerate() {
            if let Some(j) = p {
                assert_eq!(pb.source[i].label, pb.target[*j].label);
            }
        }
        assert_eq!(make_pairs(&all, &index, 9), pb);
    }
}
