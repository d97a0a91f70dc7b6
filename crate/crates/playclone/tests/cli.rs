use std::path::Path;
use std::process::{Command, Output};

use playclone::dataset::load_dataset;

fn playclone(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_playclone"))
        .arg("--root")
        .arg(root)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(root: &Path, args: &[&str]) -> String {
    let out = playclone(root, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails_with(root: &Path, args: &[&str], code: i32, kind: &str) {
    let out = playclone(root, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    let line = err.lines().rev().find(|l| l.starts_with("error: ")).unwrap_or_else(|| panic!("no error line in {err}"));
    assert!(line.starts_with(&format!("error: kind={kind} msg=")), "{line}");
}

const SMALL: [&str; 6] = ["--set", "bc.width=12", "--set", "lfp.width=12", "--set", "bc.batch=4"];

fn small(extra: &[&'static str]) -> Vec<&'static str> {
    let mut v = SMALL.to_vec();
    v.extend_from_slice(&["--set", "lfp.batch=4"]);
    v.extend_from_slice(extra);
    v
}

fn pipeline(root: &Path) -> Vec<u8> {
    let run = |args: &[&'static str]| ok(root, &small(args));
    run(&["--seed", "11", "collect", "--minutes", "2", "--out", "human"]);
    run(&["--seed", "11", "train-bc", "--data", "human", "--out", "bc.ckpt", "--steps", "20"]);
    run(&["--seed", "11", "clone", "--policy", "bc.ckpt", "--source", "human", "--out", "cloned", "--episodes", "2", "--minutes", "0.2"]);
    run(&["--seed", "11", "merge", "--out", "combined", "human", "cloned"]);
    run(&["--seed", "11", "train-lfp", "--data", "combined", "--out", "lfp.ckpt", "--steps", "20"]);
    run(&["--seed", "11", "eval", "--policy", "lfp.ckpt", "--out", "eval.csv", "--trials", "1"]);
    std::fs::read(root.join("reports/eval.csv")).unwrap()
}

#[test]
fn pipeline_twice_gives_identical_eval_csv() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = pipeline(a.path());
    let rb = pipeline(b.path());
    assert_eq!(ra, rb);
    let text = String::from_utf8(ra).unwrap();
    assert_eq!(text.lines().count(), 20);
    for dir in ["human", "cloned", "combined"] {
        ok(a.path(), &["validate", a.path().join(dir).to_str().unwrap()]);
    }
    ok(a.path(), &["validate", a.path().join("checkpoints/lfp.ckpt").to_str().unwrap()]);
    let merged = load_dataset(&a.path().join("combined")).unwrap();
    assert_eq!(merged.frame_count(), 2 * 1800 + 2 * 360);
}

#[test]
fn collected_data_validates_and_replays_exactly() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(d.path(), &["collect", "--minutes", "2", "--out", "human"]);
    assert!(out.contains("3600 frames"), "{out}");
    ok(d.path(), &["validate", d.path().join("human").to_str().unwrap()]);
    let ep = d.path().join("human/ep_00000.play");
    ok(d.path(), &["validate", ep.to_str().unwrap()]);
    let r = ok(d.path(), &["replay", ep.to_str().unwrap(), "--verify"]);
    assert!(r.contains("1800 frames"));
    let csv = ok(d.path(), &["replay", ep.to_str().unwrap(), "--every", "100"]);
    assert_eq!(csv.lines().count(), 1 + 18);

    ok(d.path(), &["collect", "--policy", "random", "--reference", "human", "--minutes", "1", "--out", "random"]);
    let cov = ok(d.path(), &["coverage", "--reference", "human", "--segment", "random=random", "--out", "cov.csv", "--stride", "600"]);
    assert_eq!(cov.lines().count(), 2);
    ok(d.path(), &["plot", "--kind", "coverage", "--input", "cov.csv", "--out", "cov.svg"]);
    assert!(std::fs::read_to_string(d.path().join("reports/cov.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn clone_ten_one_minute_episodes() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &small(&["collect", "--minutes", "1", "--out", "human"]));
    ok(d.path(), &small(&["train-bc", "--data", "human", "--out", "bc.ckpt", "--steps", "0"]));
    ok(d.path(), &small(&["clone", "--policy", "bc.ckpt", "--source", "human", "--out", "cloned", "--episodes", "10", "--minutes", "1"]));
    let c = load_dataset(&d.path().join("cloned")).unwrap();
    assert_eq!(c.episodes.len(), 10);
    assert_eq!(c.frame_count(), 18_000);
}

#[test]
fn failures_have_distinct_codes() {
    let d = tempfile::tempdir().unwrap();
    fails_with(d.path(), &["collect", "--bogus"], 2, "usage");
    fails_with(d.path(), &["eval", "--policy", "nope.ckpt", "--out", "e.csv"], 3, "missing");
    fails_with(d.path(), &["train-bc", "--data", "nowhere", "--out", "x.ckpt"], 3, "missing");
    fails_with(d.path(), &["--set", "bc.depth=3", "show-config"], 5, "config");
    fails_with(d.path(), &["--set", "bc.batch=0", "show-config"], 5, "config");

    ok(d.path(), &["collect", "--minutes", "1", "--out", "human"]);
    let ep = d.path().join("human/ep_00000.play");
    let text = std::fs::read_to_string(&ep).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let corrupted = lines[5].replacen('0', "1", 1);
    lines[5] = &corrupted;
    std::fs::write(&ep, lines.join("\n") + "\n").unwrap();
    fails_with(d.path(), &["validate", ep.to_str().unwrap()], 4, "schema");
    fails_with(d.path(), &["validate", d.path().join("human").to_str().unwrap()], 4, "schema");

    // A Play-BC checkpoint cannot be evaluated on goals.
    ok(d.path(), &small(&["collect", "--minutes", "1", "--out", "h2"]));
    ok(d.path(), &small(&["train-bc", "--data", "h2", "--out", "bc.ckpt", "--steps", "0"]));
    fails_with(d.path(), &["eval", "--policy", "bc.ckpt", "--out", "e.csv", "--trials", "1"], 4, "schema");
}

#[test]
fn config_file_and_environment_root() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.cfg");
    std::fs::write(&cfg, "seed=3\ncollect.minutes=1\npaths.reports=out\n").unwrap();
    let shown = ok(d.path(), &["--config", cfg.to_str().unwrap(), "show-config"]);
    assert!(shown.contains("seed=3\n") && shown.contains("collect.minutes=1\n"));

    let out = Command::new(env!("CARGO_BIN_EXE_playclone"))
        .args(["--config", cfg.to_str().unwrap(), "collect", "--out", "h"])
        .env("PLAYCLONE_ROOT", d.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(load_dataset(&d.path().join("h")).unwrap().frame_count(), 1800);
}

#[test]
fn help_lists_subcommands() {
    let out = Command::new(env!("CARGO_BIN_EXE_playclone")).arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["collect", "train-bc", "clone", "merge", "train-lfp", "eval", "coverage", "sweep", "serve", "replay", "validate", "plot"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}
