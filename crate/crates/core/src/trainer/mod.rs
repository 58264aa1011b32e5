//! Source/target pairing, the optimization loop, and the ablation harness.
//!
//! One step draws a mini-batch from the classification pool of the variant,
//! pairs each source with an augmented view (see [`CorpusIndex::find_target`]),
//! and applies a single SGD-with-momentum update to the network against
//! `L_total` and, simultaneously, to the discriminator bank against its own
//! cross-entropy. Both updates use gradients computed from the pre-step state.
//! Batch order depends only on `(seed, epoch)`, so a resumed run replays the
//! uninterrupted one exactly.

pub mod benchmark;
mod config;
mod pairing;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{TrainConfig, Variant};
pub use pairing::{is_target_view, make_pairs, CorpusIndex, PairedBatch, ISM_DOMAIN, SM_ATTACK};

use rand::seq::SliceRandom;

use crate::bioeval::{self, ScoreSet};
use crate::error::{Error, Result};
use crate::grlnet::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, DiscriminatorBank, ForwardCache,
    GrlNet, LevelOutputs, OutputGrads, FORMAT_VERSION,
};
use crate::grlnet::layers::Param;
use crate::manifest::Corpus;
use crate::regloss;
use crate::sample::{FaceSample, Split};
use crate::seed;

pub const LOSS_LOG_HEADER: &str = "epoch,l_cls,l_label,l_emb,l_disc,l_total";

/// Losses of one step (or the batch-weighted mean over an epoch).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepMetrics {
    pub l_cls: f64,
    pub l_label: f64,
    pub l_emb: f64,
    pub l_disc: f64,
    pub l_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub metrics: StepMetrics,
}

/// Model, bank, and the number of completed epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: GrlNet,
    pub bank: DiscriminatorBank,
    pub epoch: usize,
}

impl TrainState {
    pub fn new(cfg: &TrainConfig) -> Result<TrainState> {
        cfg.validate()?;
        let spec = cfg.spec();
        Ok(TrainState {
            model: GrlNet::new(&spec, seed::derive_tag(cfg.seed, "model"))?,
            bank: DiscriminatorBank::new(spec.n(), spec.aligned_dim, seed::derive_tag(cfg.seed, "bank")),
            epoch: 0,
        })
    }
}

fn sgd<'a>(params: impl IntoIterator<Item = &'a mut Param>, lr: f64, momentum: f64) {
    for p in params {
        for ((w, v), g) in p.value.iter_mut().zip(p.velocity.iter_mut()).zip(&p.grad) {
            *v = momentum * *v + g;
            *w -= lr * *v;
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64], scale: f64) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += scale * b;
    }
}

/// One optimization step on `batch`.
pub fn train_step(
    model: &mut GrlNet,
    bank: &mut DiscriminatorBank,
    batch: &PairedBatch,
    cfg: &TrainConfig,
) -> Result<StepMetrics> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if batch.pairing.len() != batch.source.len() {
        return Err(Error::invalid("pairing map does not cover the batch"));
    }
    let w = cfg.weights();
    let spec = model.spec().clone();
    model.zero_grad();
    bank.zero_grad();

    let src: Vec<(LevelOutputs, ForwardCache)> = batch
        .source
        .iter()
        .map(|s| model.forward_cached(&s.image))
        .collect::<Result<_>>()?;
    let outputs: Vec<LevelOutputs> = src.iter().map(|(o, _)| o.clone()).collect();
    let labels: Vec<_> = batch.source.iter().map(|s| s.label).collect();
    let (l_cls, mut src_grads) = regloss::loss_cls_batch(&outputs, &labels, &w, &spec)?;

    let mut m = StepMetrics {
        l_cls,
        ..StepMetrics::default()
    };
    let pairs: Vec<(usize, usize)> = batch
        .pairing
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|j| (i, j)))
        .collect();
    let mut tgt: Vec<(ForwardCache, OutputGrads)> = Vec::new();
    if cfg.variant.uses_pairs() && !pairs.is_empty() {
        let scale = 1.0 / pairs.len() as f64;
        let active = cfg.active_levels();
        for &(i, j) in &pairs {
            let t = batch
                .target
                .get(j)
                .ok_or_else(|| Error::invalid(format!("pairing index {j} out of range")))?;
            if t.label != batch.source[i].label {
                return Err(Error::invalid(format!("{} paired across labels", batch.source[i].id)));
            }
            let (t_out, t_cache) = model.forward_cached(&t.image)?;
            let mut t_grads = OutputGrads::zeros(&spec);
            let s_out = &src[i].0;
            if cfg.variant.uses_label() {
                let (l, g) = regloss::loss_label(s_out, &t_out, &w, &spec)?;
                m.l_label += scale * l;
                t_grads.add_scaled(&g, w.mu * scale);
            }
            if cfg.variant.uses_emb() {
                let fs = s_out.embeddings();
                let ft = t_out.embeddings();
                let e = regloss::loss_emb(&fs, &ft, bank, &w, &active)?;
                m.l_emb += scale * e.feature_loss;
                m.l_disc += scale * e.disc_loss;
                for k in &active {
                    add_into(&mut src_grads[i].embeddings[*k], &e.d_source[*k], w.delta * scale);
                    add_into(&mut t_grads.embeddings[*k], &e.d_target[*k], w.delta * scale);
                }
                regloss::disc_backward(bank, &fs, &ft, &active, scale)?;
            }
            tgt.push((t_cache, t_grads));
        }
    }
    m.l_total = regloss::loss_total(m.l_cls, m.l_label, m.l_emb, &w)?;
    if !m.l_disc.is_finite() {
        return Err(Error::Numeric(format!("l_disc is not finite ({})", m.l_disc)));
    }

    for ((_, cache), g) in src.iter().zip(&src_grads) {
        model.backward(cache, g);
    }
    for (cache, g) in &tgt {
        model.backward(cache, g);
    }
    sgd(model.params_mut(), cfg.lr, cfg.momentum);
    if cfg.variant.uses_emb() && !tgt.is_empty() {
        sgd(bank.params_mut(), cfg.lr, cfg.momentum);
    }
    Ok(m)
}

/// Samples that enter the classification loss for `variant`.
pub fn classification_pool(samples: &[FaceSample], variant: Variant) -> Vec<FaceSample> {
    samples
        .iter()
        .filter(|s| variant.classifies_ism() || !is_target_view(s))
        .filter(|s| variant.classifies_sm() || s.attack != SM_ATTACK)
        .cloned()
        .collect()
}

/// Resize every image to the model input size where needed.
pub fn fit_to_input(samples: &mut [FaceSample], size: usize) {
    for s in samples {
        if s.image.width() != size || s.image.height() != size {
            let (w, h) = (s.image.width(), s.image.height());
            s.image = s.image.resize_bilinear(size, size);
            s.landmarks = s.landmarks.rescaled(w, h, size, size);
        }
    }
}

/// Batch order of one epoch.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed::derive_tag(seed, "shuffle"), epoch as u64)));
    order
}

/// Run one epoch; returns batch-size-weighted mean metrics.
pub fn run_epoch(
    state: &mut TrainState,
    pool: &[FaceSample],
    index: &CorpusIndex,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<StepMetrics> {
    if pool.is_empty() {
        return Err(Error::invalid("training pool is empty"));
    }
    let order = epoch_order(pool.len(), cfg.seed, epoch);
    let pair_seed = seed::derive_tag(cfg.seed, "pairs");
    let mut acc = StepMetrics::default();
    for chunk in order.chunks(cfg.batch_size) {
        let batch: Vec<FaceSample> = chunk.iter().map(|&i| pool[i].clone()).collect();
        let pb = if cfg.variant.uses_pairs() {
            make_pairs(&batch, index, pair_seed)
        } else {
            PairedBatch::unpaired(batch)
        };
        let m = train_step(&mut state.model, &mut state.bank, &pb, cfg)?;
        let wgt = chunk.len() as f64 / pool.len() as f64;
        acc.l_cls += wgt * m.l_cls;
        acc.l_label += wgt * m.l_label;
        acc.l_emb += wgt * m.l_emb;
        acc.l_disc += wgt * m.l_disc;
        acc.l_total += wgt * m.l_total;
    }
    state.epoch = epoch;
    Ok(acc)
}

/// Train on in-memory training samples from `state` (or a fresh state) up to
/// `cfg.epochs`.
pub fn train_samples(
    cfg: &TrainConfig,
    samples: &[FaceSample],
    state: Option<TrainState>,
) -> Result<(TrainState, Vec<EpochRecord>)> {
    cfg.validate()?;
    let mut samples = samples.to_vec();
    fit_to_input(&mut samples, cfg.image_size);
    let pool = classification_pool(&samples, cfg.variant);
    let index = CorpusIndex::new(samples);
    let mut state = match state {
        Some(s) => s,
        None => TrainState::new(cfg)?,
    };
    let mut trace = Vec::new();
    for epoch in state.epoch + 1..=cfg.epochs {
        let metrics = run_epoch(&mut state, &pool, &index, cfg, epoch)?;
        trace.push(EpochRecord { epoch, metrics });
    }
    Ok((state, trace))
}

pub fn loss_log_csv(trace: &[EpochRecord]) -> String {
    let mut s = String::from(LOSS_LOG_HEADER);
    s.push('\n');
    for r in trace {
        let m = &r.metrics;
        writeln!(s, "{},{},{},{},{},{}", r.epoch, m.l_cls, m.l_label, m.l_emb, m.l_disc, m.l_total)
            .expect("write to string");
    }
    s
}

pub fn read_loss_log(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(LOSS_LOG_HEADER) {
        return Err(Error::invalid(format!("{} is not a loss log", path.display())));
    }
    let bad = || Error::invalid(format!("malformed row in {}", path.display()));
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(bad());
            }
            let v = |k: usize| f[k].parse::<f64>().map_err(|_| bad());
            Ok(EpochRecord {
                epoch: f[0].parse().map_err(|_| bad())?,
                metrics: StepMetrics {
                    l_cls: v(1)?,
                    l_label: v(2)?,
                    l_emb: v(3)?,
                    l_disc: v(4)?,
                    l_total: v(5)?,
                },
            })
        })
        .collect()
}

/// Loss log written next to a checkpoint archive.
pub fn loss_log_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".losses.csv");
    PathBuf::from(s)
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub checkpoint: Checkpoint,
    pub trace: Vec<EpochRecord>,
    pub log_path: PathBuf,
}

/// Train on the corpus' train split, write the checkpoint (plus sidecar) to
/// `out` and the loss log to [`loss_log_path`]. With `resume`, training
/// continues from that checkpoint and its logged epochs are carried over.
pub fn fit(cfg: &TrainConfig, corpus: &Corpus, out: &Path, resume: Option<&Path>) -> Result<FitOutcome> {
    cfg.validate()?;
    corpus.check_integrity()?;
    let corpus_hash = corpus.content_hash()?;
    let samples = corpus.load_split(Split::Train)?;
    for s in &samples {
        s.validate()?;
    }
    if samples.is_empty() {
        return Err(Error::invalid("corpus has no training samples"));
    }
    let (state, mut trace) = match resume {
        None => (None, vec![]),
        Some(path) => {
            let ck = load_checkpoint(path)?;
            if ck.meta.spec != cfg.spec() {
                return Err(Error::invalid("checkpoint architecture differs from the config"));
            }
            if ck.meta.corpus_hash != corpus_hash {
                return Err(Error::invalid("checkpoint was trained on a different corpus"));
            }
            let log = loss_log_path(path);
            let mut prior = if log.exists() { read_loss_log(&log)? } else { vec![] };
            prior.retain(|r| r.epoch <= ck.meta.epoch);
            let state = TrainState {
                model: ck.model,
                bank: ck.bank,
                epoch: ck.meta.epoch,
            };
            (Some(state), prior)
        }
    };
    let (state, new) = train_samples(cfg, &samples, state)?;
    trace.extend(new);
    let checkpoint = Checkpoint {
        meta: CheckpointMeta {
            spec: cfg.spec(),
            loss_weights: cfg.weights(),
            seed: cfg.seed,
            epoch: state.epoch,
            corpus_hash,
            format_version: FORMAT_VERSION,
            config: serde_json::to_value(cfg)?,
        },
        model: state.model,
        bank: state.bank,
    };
    save_checkpoint(&checkpoint, out)?;
    let log_path = loss_log_path(out);
    std::fs::write(&log_path, loss_log_csv(&trace)).map_err(|e| Error::io(&log_path, e))?;
    Ok(FitOutcome {
        checkpoint,
        trace,
        log_path,
    })
}

/// Evaluation of one trained configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub seed: u64,
    /// Percent.
    pub eer: f64,
    /// Percent.
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub variant: Variant,
    pub mu: f64,
    pub delta: f64,
    pub emb_levels: usize,
    pub runs: Vec<AblationRun>,
    pub median_eer: f64,
    pub median_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes") + "\n"
    }

    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `n` consecutive seeds starting at `base`.
pub fn seeds_from(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|k| base.wrapping_add(k)).collect()
}

/// Train every named configuration once per seed and score it on `test`.
pub fn ablate_samples(
    entries: &[(String, TrainConfig)],
    train: &[FaceSample],
    test: &[FaceSample],
    seeds: &[u64],
) -> Result<AblationTable> {
    Ok(ablate_multi(entries, train, &[test], seeds)?.remove(0))
}

/// As [`ablate_samples`], scoring each trained model on several test sets;
/// returns one table per test set.
pub fn ablate_multi(
    entries: &[(String, TrainConfig)],
    train: &[FaceSample],
    tests: &[&[FaceSample]],
    seeds: &[u64],
) -> Result<Vec<AblationTable>> {
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    if tests.is_empty() {
        return Err(Error::invalid("at least one test set is required"));
    }
    let mut runs: Vec<Vec<Vec<AblationRun>>> = vec![vec![]; tests.len()];
    for (_, base) in entries {
        let mut per_test: Vec<Vec<AblationRun>> = vec![Vec::with_capacity(seeds.len()); tests.len()];
        for &s in seeds {
            let cfg = TrainConfig { seed: s, ..base.clone() };
            let (state, _) = train_samples(&cfg, train, None)?;
            let model = state.model.strip_inference();
            for (t, test) in tests.iter().enumerate() {
                let scores = bioeval::score_samples(&model, test)?;
                per_test[t].push(AblationRun {
                    seed: s,
                    eer: 100.0 * bioeval::eer(&scores)?,
                    auc: 100.0 * bioeval::auc(&scores)?,
                });
            }
        }
        for (t, r) in per_test.into_iter().enumerate() {
            runs[t].push(r);
        }
    }
    Ok(runs
        .into_iter()
        .map(|per_entry| AblationTable {
            rows: entries
                .iter()
                .zip(per_entry)
                .map(|((name, base), runs)| {
                    let eers: Vec<f64> = runs.iter().map(|r| r.eer).collect();
                    let aucs: Vec<f64> = runs.iter().map(|r| r.auc).collect();
                    AblationRow {
                        name: name.clone(),
                        variant: base.variant,
                        mu: base.mu,
                        delta: base.delta,
                        emb_levels: base.active_levels().len() - 1,
                        median_eer: median(&eers),
                        median_auc: median(&aucs),
                        runs,
                    }
                })
                .collect(),
        })
        .collect())
}

/// Ablate `variants` on a corpus: train on its train split, evaluate on its
/// test split.
pub fn ablate(cfg: &TrainConfig, corpus: &Corpus, variants: &[Variant], n_seeds: usize) -> Result<AblationTable> {
    cfg.validate()?;
    corpus.check_integrity()?;
    let train = corpus.load_split(Split::Train)?;
    let test = corpus.load_split(Split::Test)?;
    if test.is_empty() {
        return Err(Error::invalid("corpus has no test split"));
    }
    let entries: Vec<(String, TrainConfig)> = variants
        .iter()
        .map(|&v| (v.to_string(), TrainConfig { variant: v, ..cfg.clone() }))
        .collect();
    ablate_samples(&entries, &train, &test, &seeds_from(cfg.seed, n_seeds))
}

/// Scores of a trained state on `samples`.
pub fn score(state: &TrainState, samples: &[FaceSample]) -> Result<ScoreSet> {
    bioeval::score_samples(&state.model.strip_inference(), samples)
}
