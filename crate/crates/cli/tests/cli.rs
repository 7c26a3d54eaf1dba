//! End-to-end checks of the `deceptgan` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"{"seq_len": 16, "rollouts": 2, "episodes": 2, "d_steps": 1,
 "gen_pretrain_steps": 2, "d_pretrain_steps": 2, "dprime_pretrain_steps": 2,
 "embed_dim": 4, "hidden": 6, "windows": [2, 3], "filters": 4,
 "max_iterations": 2, "convergence_window": 2, "folds": 3}"#;

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deceptgan"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.json"), TINY).unwrap();
    let o = bin(
        dir.path(),
        &[
            "--config", "tiny.json", "--preset", "desk", "synth", "gen", "--per-class", "24", "--out",
            "c.json", "--text-dir", "txt",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    dir
}

fn entries(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for sub in ["ingest", "pretrain", "train", "ablate", "kfold", "classify", "synth", "gradcheck", "sweep-gd"] {
        assert!(stdout(&o).contains(sub), "help lists {sub}");
    }
}

#[test]
fn ingest_prints_class_counts() {
    let dir = workspace();
    let o = bin(dir.path(), &["--config", "tiny.json", "ingest", "txt", "--out", "again.json"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "truthful=24 deceptive=24\n");
    assert!(dir.path().join("again.json").is_file());
}

#[test]
fn ingest_without_deceptive_dir_is_a_layout_error() {
    let dir = workspace();
    fs::create_dir_all(dir.path().join("bad/truthful")).unwrap();
    let o = bin(dir.path(), &["--config", "tiny.json", "ingest", "bad"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_then_classify_one_file() {
    let dir = workspace();
    let o = bin(dir.path(), &["--config", "tiny.json", "--preset", "desk", "train", "--corpus", "c.json", "--out", "run"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("best_d_accuracy="));
    let files = entries(&dir.path().join("run"));
    for f in ["checkpoints", "d.ckpt", "d_prime.ckpt", "generator.ckpt", "history.csv", "summary.json"] {
        assert!(files.contains(&f.to_string()), "{f} in {files:?}");
    }
    let header = fs::read_to_string(dir.path().join("run/history.csv")).unwrap();
    assert!(header.starts_with("step,phase,d_acc,dprime_acc,d_loss,dprime_loss,gen_reward,seconds\n"));

    let o = bin(dir.path(), &["classify", "txt/deceptive/00030.txt", "--model", "run/d.ckpt"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 1);
    let fields: Vec<&str> = lines[0].split('\t').collect();
    assert_eq!(fields.len(), 3);
    assert_eq!(fields[0], "txt/deceptive/00030.txt");
    assert!(fields[1] == "truthful" || fields[1] == "deceptive");
    let score: f64 = fields[2].parse().unwrap();
    assert!((0.0..=1.0).contains(&score));

    let o = bin(dir.path(), &["classify", "txt", "--model", "run/d.ckpt"]);
    assert_eq!(stdout(&o).lines().count(), 48);
}

#[test]
fn contract_errors_leave_no_outputs() {
    let dir = workspace();
    let before = entries(dir.path());
    // Single-discriminator ablation cannot be `full`.
    let o = bin(dir.path(), &["--config", "tiny.json", "ablate", "--mode", "full", "--corpus", "c.json", "--out", "a"]);
    assert_eq!(o.status.code(), Some(1));
    // Unknown mode.
    let o = bin(dir.path(), &["--config", "tiny.json", "ablate", "--mode", "both", "--corpus", "c.json", "--out", "a"]);
    assert_eq!(o.status.code(), Some(1));
    // Corpus length disagrees with the configuration.
    let o = bin(dir.path(), &["--config", "tiny.json", "--seq-len", "20", "train", "--corpus", "c.json", "--out", "a"]);
    assert_eq!(o.status.code(), Some(1));
    // Invalid configuration value.
    fs::write(dir.path().join("bad.json"), r#"{"folds": 1}"#).unwrap();
    let o = bin(dir.path(), &["--config", "bad.json", "train", "--corpus", "c.json", "--out", "a"]);
    assert_eq!(o.status.code(), Some(1));
    // Unknown configuration field.
    fs::write(dir.path().join("typo.json"), r#"{"sequence_length": 16}"#).unwrap();
    let o = bin(dir.path(), &["--config", "typo.json", "train", "--corpus", "c.json", "--out", "a"]);
    assert_eq!(o.status.code(), Some(1));
    let mut after = entries(dir.path());
    after.retain(|f| f != "bad.json" && f != "typo.json");
    assert_eq!(before, after);
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["--preset", "desk", "train", "--corpus", "nope.json", "--out", "run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("run").exists());
    let o = bin(dir.path(), &["--config", "nope.json", "gradcheck"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn existing_output_needs_force() {
    let dir = workspace();
    fs::create_dir(dir.path().join("run")).unwrap();
    fs::write(dir.path().join("run/keep"), "x").unwrap();
    let o = bin(dir.path(), &["--config", "tiny.json", "pretrain", "--corpus", "c.json", "--out", "run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(dir.path().join("run/keep").exists());
    let o = bin(dir.path(), &["--config", "tiny.json", "pretrain", "--corpus", "c.json", "--out", "run", "--force"]);
    assert!(o.status.success());
    assert!(!dir.path().join("run/keep").exists());
    assert!(dir.path().join("run/d.ckpt").exists());
}

#[test]
fn kfold_reports_every_fold() {
    let dir = workspace();
    let o = bin(dir.path(), &["--config", "tiny.json", "kfold", "--corpus", "c.json", "--out", "kf"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("fold=")).count(), 3);
    assert!(out.contains("accuracy mean="));
    assert!(dir.path().join("kf/kfold.json").is_file());
}

#[test]
fn sweep_writes_one_row_per_pair() {
    let dir = workspace();
    let o = bin(
        dir.path(),
        &["--config", "tiny.json", "--max-iterations", "1", "sweep-gd", "--values", "1,2", "--corpus", "c.json", "--out", "sw"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn synth_bayes_reports_an_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["synth", "bayes", "--samples", "2000"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().strip_prefix("bayes_accuracy=").unwrap().parse().unwrap();
    assert!((0.5..=1.0).contains(&v));
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["gradcheck", "--seeds", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| !l.starts_with("FAIL")));
}
