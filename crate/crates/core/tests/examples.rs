//! Runs every example binary that `cargo test` builds alongside the tests.

use std::path::PathBuf;
use std::process::Command;

const EXAMPLES: &[&str] = &[
    "autodiff_gradcheck",
    "extract_and_invert",
    "semantic_spaces",
    "train_trinet",
    "augment_support",
    "fewshot_eval",
    "pipeline",
];

fn example_path(name: &str) -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let dir = exe.parent().unwrap().parent().unwrap().join("examples");
    dir.join(format!("{name}{}", std::env::consts::EXE_SUFFIX))
}

#[test]
fn every_example_runs() {
    for name in EXAMPLES {
        let path = example_path(name);
        assert!(path.exists(), "{} not built", path.display());
        let out = Command::new(&path).output().unwrap();
        assert!(
            out.status.success(),
            "{name} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stdout.is_empty(), "{name} printed nothing");
    }
}
