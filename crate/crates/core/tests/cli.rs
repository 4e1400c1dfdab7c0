//! The `lagr` binary end to end on tiny synthetic files.

use std::path::Path;
use std::process::Command;

use lagr::cfq::synth as cfq_synth;
use lagr::cfq::write_cfq;
use lagr::cogs::synth::{generate, SynthConfig};
use lagr::cogs::write_cogs_tsv;
use lagr::harness::{evaluate, load_checkpoint, Dataset};

fn lagr(args: &[&str]) -> (bool, serde_json::Value, String) {
    let (code, json, err) = lagr_code(args);
    (code == Some(0), json, err)
}

fn lagr_code(args: &[&str]) -> (Option<i32>, serde_json::Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lagr"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    let stderr = String::from_utf8_lossy(&out.stderr).to_string();
    let json = serde_json::from_str(&stdout).unwrap_or(serde_json::Value::Null);
    (out.status.code(), json, stderr)
}

fn write_config(path: &Path, dir: &Path, extra: &str) {
    let text = format!(
        "dataset = cogs\ntrain = {}\ndev = {}\n\
         d = 16\nencoder_layers = 1\nheads = 2\nff = 32\n\
         batch_size = 8\nlr = 5e-3\ntrain_steps = 200\neval_every = 100\n\
         restart_threshold = 0.01\nmax_restarts = 0\nseed = 3\n\
         ckpt_dir = {}\nmetrics = {}\n{extra}",
        dir.join("train.tsv").display(),
        dir.join("dev.tsv").display(),
        dir.join("ckpt").display(),
        dir.join("metrics.jsonl").display(),
    );
    std::fs::write(path, text).unwrap();
}

fn cogs_files(dir: &Path) {
    let all = generate(60, 8, &SynthConfig::default());
    write_cogs_tsv(&dir.join("train.tsv"), &all[..40]).unwrap();
    write_cogs_tsv(&dir.join("dev.tsv"), &all[40..]).unwrap();
}

#[test]
fn train_then_eval_reproduces_the_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    cogs_files(dir);
    let cfg = dir.join("run.cfg");
    write_config(&cfg, dir, "");

    let (ok, summary, err) = lagr(&["train", "--config", cfg.to_str().unwrap()]);
    assert!(ok, "{err}");
    assert_eq!(summary["accepted"], true);
    assert_eq!(summary["seed"], 3);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    let metrics = std::fs::read_to_string(dir.join("metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 2);

    let ckpt = dir.join("ckpt");
    let (ok, report, err) = lagr(&["eval", "--ckpt", ckpt.to_str().unwrap(), "--split", "dev"]);
    assert!(ok, "{err}");
    assert_eq!(report["n"], 20);
    assert_eq!(report["dataset_hash"], summary["dataset_hash"]);
    let preds = std::fs::read_to_string(ckpt.join("predictions_dev.txt")).unwrap();
    assert_eq!(preds.lines().count(), 20);

    // The reloaded model scores the same as the library does on it.
    let ck = load_checkpoint(&ckpt).unwrap();
    let data = Dataset::load(&ck.config).unwrap();
    let again = evaluate(&ck.model, &ck.store, &data, &data.dev, 1).unwrap();
    assert_eq!(again.predictions.join("\n") + "\n", preds);
    assert_eq!(report["accuracy"].as_f64().unwrap(), again.accuracy);

    let (ok, _, err) = lagr(&["eval", "--ckpt", ckpt.to_str().unwrap(), "--split", "nope"]);
    assert!(!ok);
    assert!(err.contains("nope"), "{err}");
}

#[test]
fn weak_run_then_retrain_from_its_alignments() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    cogs_files(dir);
    let cfg = dir.join("weak.cfg");
    write_config(&cfg, dir, "supervision = weak\nk = 3\n");
    // A tiny weak run may miss the restart threshold; that exits with 2
    // but still leaves a full checkpoint behind.
    let (code, summary, err) = lagr_code(&["train", "--config", cfg.to_str().unwrap()]);
    let accepted = summary["accepted"].as_bool().expect(&err);
    assert_eq!(code, Some(if accepted { 0 } else { 2 }));
    let agreement = summary["gold_alignment_agreement"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&agreement));
    let dump = dir.join("ckpt").join("alignments.jsonl");
    assert_eq!(std::fs::read_to_string(&dump).unwrap().lines().count(), 40);

    let re_cfg = dir.join("re.cfg");
    write_config(&re_cfg, dir, "");
    let (ok, summary, err) = lagr(&["retrain", "--alignments", dump.to_str().unwrap(), "--config", re_cfg.to_str().unwrap()]);
    assert!(ok, "{err}");
    assert_eq!(summary["accepted"], true);

    std::fs::write(dir.join("empty.jsonl"), "").unwrap();
    let (ok, _, _) = lagr(&["retrain", "--alignments", dir.join("empty.jsonl").to_str().unwrap(), "--config", re_cfg.to_str().unwrap()]);
    assert!(!ok);
}

#[test]
fn convert_and_graph_accuracy() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    cogs_files(dir);
    let out = dir.join("graphs.jsonl");
    let (ok, summary, err) = lagr(&[
        "convert",
        "--dataset",
        "cogs",
        "--in",
        dir.join("train.tsv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(ok, "{err}");
    assert_eq!(summary["written"], 40);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 40);

    let qs = cfq_synth::generate(5, 1, &cfq_synth::SynthConfig::default());
    write_cfq(&dir.join("q.jsonl"), &qs).unwrap();
    let (ok, summary, err) = lagr(&[
        "convert",
        "--dataset",
        "cfq",
        "--in",
        dir.join("q.jsonl").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(ok, "{err}");
    assert_eq!(summary["written"], 5);

    let gold: Vec<String> = qs.iter().map(|q| q.sparql.replace('\n', " ")).collect();
    let mut pred = gold.clone();
    pred[0] = "SELECT count(*) WHERE { M0 ns:people.person.spouse_s M9 }".into();
    std::fs::write(dir.join("gold.txt"), gold.join("\n") + "\n").unwrap();
    std::fs::write(dir.join("pred.txt"), pred.join("\n") + "\n").unwrap();
    let (ok, acc, err) = lagr(&[
        "graph-acc",
        "--pred",
        dir.join("pred.txt").to_str().unwrap(),
        "--gold",
        dir.join("gold.txt").to_str().unwrap(),
    ]);
    assert!(ok, "{err}");
    assert_eq!(acc["correct"], 4);
    assert_eq!(acc["total"], 5);

    let (ok, _, _) = lagr(&["convert", "--dataset", "sql", "--in", "x", "--out", "y"]);
    assert!(!ok);
}
