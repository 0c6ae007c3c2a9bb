use std::fs;
use std::process::Command;

const TINY: &str = r#"
experiment = "logistic_bifurcation"
methods = ["metafors", "multitask"]
[seeds]
replicates = 1
[data]
n_train = 300
n_for = 200
n_eval_discard = 100
stride = 5
[library]
members = 3
[test]
n_test = [4]
[test.mu]
min = 3.6
max = 4.0
count = 3
[forecaster]
n_nodes = 30
[signal_mapper]
n_nodes = 40
"#;

fn metafors() -> Command {
    Command::new(env!("CARGO_BIN_EXE_metafors"))
}

#[test]
fn run_then_summarize() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let out = tmp.path().join("out");
    let status = metafors()
        .args(["run", cfg.to_str().unwrap(), "--threads", "1", "--seed", "7"])
        .env("METAFORS_OUT_DIR", &out)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["results.csv", "timings.csv", "manifest.json", "config.toml", "bifurcation.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let s = metafors()
        .args(["summarize", out.join("results.csv").to_str().unwrap(), "--stat", "median"])
        .output()
        .unwrap();
    assert!(s.status.success());
    let text = String::from_utf8(s.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().contains("metafors"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "experiment = \"logistic_bifurcation\"\nbogus = true\n").unwrap();
    let code = |args: &[&str]| metafors().args(args).env("METAFORS_OUT_DIR", tmp.path()).status().unwrap().code();
    assert_eq!(code(&["run", bad.to_str().unwrap()]), Some(2));
    assert_eq!(code(&["run", "not_a_preset"]), Some(2));
    assert_eq!(code(&["summarize", tmp.path().join("missing.csv").to_str().unwrap()]), Some(1));
    assert_eq!(code(&["list-presets"]), Some(0));
}
