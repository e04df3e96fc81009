//! Drives the `semaug` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use semaug::config::RunConfig;

fn semaug(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semaug"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = semaug(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    semaug(dir, args).status.code().unwrap()
}

const CONFIG: &str = "\
# small end-to-end run
seed = 5
data_dir = data
checkpoint = model.trin
trinet.preset = small_data
trinet.epochs = 8
eval.episodes = 20
";

fn pipeline(dir: &Path) -> String {
    fs::write(dir.join("run.cfg"), CONFIG).unwrap();
    ok(dir, &["--config", "run.cfg", "gen-synth"]);
    ok(dir, &["--config", "run.cfg", "train"]);
    ok(dir, &["--config", "run.cfg", "--set", "out=aug.mlfa", "augment"]);
    ok(dir, &["--config", "run.cfg", "--set", "out=report.txt", "eval"]);
    fs::read_to_string(dir.join("report.txt")).unwrap()
}

#[test]
fn pipeline_is_reproducible_and_echoes_protocol() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = pipeline(a.path());
    let rb = pipeline(b.path());
    assert_eq!(ra, rb);
    assert!(ra.lines().any(|l| l == "way = 5"));
    assert!(ra.lines().any(|l| l == "shot = 1"));
    assert!(ra.lines().last().unwrap().starts_with("mean "));
    for f in [
        "model.trin",
        "model.trin.log",
        "model.trin.run",
        "aug.mlfa",
        "aug.mlfa.manifest",
        "report.txt.csv",
        "report.txt.run",
        "data/run.txt",
    ] {
        assert!(a.path().join(f).exists(), "{f} missing");
    }
    for f in ["model.trin", "aug.mlfa", "data/base.mlfa", "report.txt.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
    let run = fs::read_to_string(a.path().join("report.txt.run")).unwrap();
    assert!(run.lines().any(|l| l == "command = eval"));
    assert!(run
        .lines()
        .any(|l| l.starts_with("input.checkpoint = ") && l.len() > 80));

    // Workers do not change results; augmentation off is the plain baseline.
    ok(
        a.path(),
        &["--config", "run.cfg", "--workers", "3", "--set", "out=par.txt", "eval"],
    );
    assert_eq!(fs::read_to_string(a.path().join("par.txt")).unwrap(), ra);
    ok(
        a.path(),
        &[
            "--config",
            "run.cfg",
            "--set",
            "augment.methods=none",
            "--set",
            "out=plain.txt",
            "eval",
        ],
    );
    assert_ne!(fs::read_to_string(a.path().join("plain.txt")).unwrap(), ra);

    ok(a.path(), &["--config", "run.cfg", "--set", "out=inv.txt", "invert"]);
    assert!(a.path().join("inv.txt.trace").exists());
    ok(a.path(), &["--config", "run.cfg", "--set", "out=feat.mlfa", "export"]);
    ok(a.path(), &["--config", "run.cfg", "--set", "out=svd.txt", "svd"]);
}

#[test]
fn exit_codes_name_the_failure_class() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(p.join("run.cfg"), CONFIG).unwrap();
    // Configuration problems.
    assert_eq!(code(p, &["--set", "out=x", "gen-synth"]), 2, "missing seed");
    assert_eq!(
        code(p, &["--config", "run.cfg", "--set", "no.such.key=1", "gen-synth"]),
        2
    );
    assert_eq!(code(p, &["--config", "missing.cfg", "gen-synth"]), 2);
    assert_eq!(code(p, &["--config", "run.cfg", "train"]), 2, "no data yet");
    assert_eq!(code(p, &["--config", "run.cfg", "--set", "eval.way=0", "eval"]), 2);
    // Malformed data.
    ok(p, &["--config", "run.cfg", "gen-synth"]);
    fs::write(p.join("data/base.mlfa"), b"MLFA garbage").unwrap();
    assert_eq!(code(p, &["--config", "run.cfg", "train"]), 3);
    let err = String::from_utf8(semaug(p, &["--config", "run.cfg", "train"]).stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn config_text_round_trips() {
    let mut cfg = RunConfig::parse(CONFIG, "test").unwrap();
    cfg.apply(&[
        ("augment.methods".into(), "SG,SN,NOISE".into()),
        ("eval.classifier".into(), "lr".into()),
        ("eval.lr_penalty".into(), "0.5".into()),
        ("invert.level".into(), "2".into()),
    ])
    .unwrap();
    let text = cfg.to_text();
    let back = RunConfig::parse(&text, "round trip").unwrap();
    assert_eq!(back.to_text(), text);
    assert_eq!(back, cfg);
}

#[test]
fn show_config_applies_precedence() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("run.cfg"), CONFIG).unwrap();
    let text = ok(
        d.path(),
        &["--config", "run.cfg", "--set", "seed=6", "--seed", "7", "show-config"],
    );
    assert!(text.lines().any(|l| l == "seed = 7"));
    assert!(text.lines().any(|l| l == "trinet.epochs = 8"));
}
