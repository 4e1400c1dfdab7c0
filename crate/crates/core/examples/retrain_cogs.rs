//! Weak supervision followed by retraining: alignments inferred by a weakly
//! supervised run become the targets of a fresh strongly supervised one.
//!
//! `cargo run --release --example retrain_cogs -- [key=value ...]` with
//! run-config keys plus `size`.

use lagr::cogs::synth::{generate, SynthConfig};
use lagr::harness::{evaluate, infer_alignments, retrain, train_with_restarts, Dataset, RunConfig};

fn main() -> lagr::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut size = 300;
    let mut cfg = RunConfig::default();
    for (k, v) in [
        ("supervision", "weak"),
        ("d", "64"),
        ("encoder_layers", "2"),
        ("heads", "4"),
        ("ff", "128"),
        ("dropout", "0.2"),
        ("batch_size", "16"),
        ("lr", "3e-3"),
        ("encoder_mode", "separate"),
        ("warmup", "200"),
        ("eval_every", "1000"),
        ("train_steps", "2000"),
        ("max_restarts", "1"),
    ] {
        cfg.set(k, v)?;
    }
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("arguments are key=value");
        if k == "size" {
            size = v.parse().expect("size is a number");
        } else {
            cfg.set(k, v)?;
        }
    }
    let all = generate(size + 200, 11, &SynthConfig::default());
    let data = Dataset::cogs(&all[..size], &all[size..], &[])?;

    let weak = train_with_restarts(&cfg, &data)?;
    let w = &weak.outcome;
    let cache = infer_alignments(&w.model, &w.store, &data, &cfg.align, &w.cache, w.seed)?;
    let weak_dev = evaluate(&w.model, &w.store, &data, &data.dev, 0)?;

    let re = retrain(&cfg, &data, &cache)?;
    let r = &re.outcome;
    let re_dev = evaluate(&r.model, &r.store, &data, &data.dev, 0)?;
    println!("weak:    train {:.4} dev {:.4}", w.train_acc, weak_dev.accuracy);
    println!("retrain: train {:.4} dev {:.4}", r.train_acc, re_dev.accuracy);
    Ok(())
}
