use std::path::Path;
use std::process::Command;

fn grl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_grl")).args(args).output().expect("spawn grl")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn datagen_writes_every_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bona");
    let r = grl(&["datagen", "--out", s(&out), "--identities", "10", "--instances", "4", "--size", "32"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let manifest = std::fs::read_to_string(out.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 40);
}

#[test]
fn pipeline_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let r = grl(&[
        "datagen", "--out", s(&p("data")), "--identities", "6", "--instances", "2", "--attacks", "lm",
        "--test-fraction", "0.34", "--max-morphs", "6", "--size", "32",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    std::fs::write(p("cfg.toml"), "variant = \"baseline\"\nimage_size = 32\nwidth = 4\nepochs = 1\nbatch_size = 8\n").unwrap();
    let r = grl(&["train", "--config", s(&p("cfg.toml")), "--data", s(&p("data")), "--out", s(&p("m.ckpt"))]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let r = grl(&["eval", "--ckpt", s(&p("m.ckpt")), "--data", s(&p("data")), "--report", s(&p("r.json"))]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("r.json")).unwrap()).unwrap();
    assert!(report.get("eer").is_some());

    let r = grl(&["eval", "--ckpt", s(&p("missing.ckpt")), "--data", s(&p("data")), "--report", s(&p("x.json"))]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("kind=io"));

    std::fs::write(p("bad.toml"), "tau = -1.0\n").unwrap();
    let r = grl(&["train", "--config", s(&p("bad.toml")), "--data", s(&p("data")), "--out", s(&p("n.ckpt"))]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("kind=invalid-argument"));
}
