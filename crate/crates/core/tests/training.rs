use grl_mad::bioeval;
use grl_mad::grlnet::load_checkpoint;
use grl_mad::sample::Split;
use grl_mad::synthface::{build_corpus, CorpusConfig};
use grl_mad::trainer::{
    fit, loss_log_path, make_pairs, read_loss_log, train_step, CorpusIndex, PairedBatch, TrainConfig, TrainState, Variant,
};

fn corpus(root: &std::path::Path, identities: usize, instances: usize) -> grl_mad::manifest::Corpus {
    build_corpus(
        &CorpusConfig {
            identities,
            instances,
            attacks: vec!["lm".into(), "self-morph".into()],
            test_fraction: 0.25,
            max_morphs: Some(identities * instances),
            size: 32,
            seed: 3,
            ..CorpusConfig::default()
        },
        &root.join("data"),
    )
    .unwrap()
}

fn cfg(variant: Variant, epochs: usize) -> TrainConfig {
    TrainConfig {
        variant,
        image_size: 32,
        width: 4,
        epochs,
        batch_size: 16,
        seed: 1,
        ..TrainConfig::default()
    }
}

#[test]
fn repeated_steps_reduce_classification_loss() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 12, 3);
    let mut samples = c.load_split(Split::Train).unwrap();
    samples.truncate(64);
    let cfg = TrainConfig { batch_size: 64, lr: 0.01, ..cfg(Variant::Grl, 1) };
    let mut state = TrainState::new(&cfg).unwrap();
    let index = CorpusIndex::new(samples.clone());
    let batch = make_pairs(&samples, &index, 0);
    let first = train_step(&mut state.model, &mut state.bank, &batch, &cfg).unwrap().l_cls;
    let mut last = first;
    for _ in 0..49 {
        last = train_step(&mut state.model, &mut state.bank, &batch, &cfg).unwrap().l_cls;
    }
    assert!(last < first, "l_cls {first} -> {last}");
}

#[test]
fn unpaired_batch_trains_classification_only() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 4, 2);
    let samples = c.load_split(Split::Train).unwrap();
    let cfg = cfg(Variant::Grl, 1);
    let mut state = TrainState::new(&cfg).unwrap();
    let m = train_step(&mut state.model, &mut state.bank, &PairedBatch::unpaired(samples), &cfg).unwrap();
    assert_eq!((m.l_label, m.l_emb), (0.0, 0.0));
    assert!(m.l_cls > 0.0);
}

#[test]
fn fit_writes_checkpoint_log_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 16, 2);
    let two = cfg(Variant::Grl, 2);
    let full = fit(&two, &c, &dir.path().join("full.ckpt"), None).unwrap();
    assert_eq!(full.trace.len(), 2);
    let logged = read_loss_log(&loss_log_path(&dir.path().join("full.ckpt"))).unwrap();
    assert_eq!(logged, full.trace);
    let loaded = load_checkpoint(&dir.path().join("full.ckpt")).unwrap();
    assert_eq!(loaded.meta.epoch, 2);
    assert!(grl_mad::grlnet::sidecar_path(&dir.path().join("full.ckpt")).exists());

    let one = cfg(Variant::Grl, 1);
    fit(&one, &c, &dir.path().join("half.ckpt"), None).unwrap();
    let resumed = fit(&two, &c, &dir.path().join("resumed.ckpt"), Some(&dir.path().join("half.ckpt"))).unwrap();
    assert_eq!(resumed.trace, full.trace);

    let scores = bioeval::score_dataset(&loaded.model.strip_inference(), &c, Split::Test).unwrap();
    assert_eq!(scores.len(), c.load_split(Split::Test).unwrap().len());
    let eer = bioeval::eer(&scores).unwrap();
    assert!((0.0..=1.0).contains(&eer));
}
