//! Weakly supervised training on synthetic CFQ questions: two graph layers,
//! no gold alignments, scored by graph isomorphism.
//!
//! `cargo run --release --example cfq_weak -- [key=value ...]` with
//! run-config keys plus `size`.

use lagr::cfq::synth::{generate, SynthConfig};
use lagr::cfq::CFQ_LAYERS;
use lagr::harness::{evaluate, train_with_restarts, Dataset, DatasetKind, RunConfig};

fn main() -> lagr::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut size = 400;
    let mut cfg = RunConfig::for_dataset(DatasetKind::Cfq);
    for (k, v) in [
        ("supervision", "weak"),
        ("d", "64"),
        ("encoder_layers", "2"),
        ("heads", "4"),
        ("ff", "128"),
        ("batch_size", "16"),
        ("lr", "1e-3"),
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
    let all = generate(size + 100, 9, &SynthConfig::default());
    let data = Dataset::cfq(&all[..size], &all[size..], &[], CFQ_LAYERS)?;
    let report = train_with_restarts(&cfg, &data)?;
    let out = &report.outcome;
    let dev = evaluate(&out.model, &out.store, &data, &data.dev, 0)?;
    println!("accepted {}, train {:.4}, dev graph accuracy {:.4}", report.accepted, out.train_acc, dev.accuracy);
    for (ex, (hit, pred)) in data.dev.iter().zip(dev.hits.iter().zip(&dev.predictions)).take(3) {
        println!("{} -> {pred} [{}]", ex.tokens.join(" "), if *hit { "ok" } else { "wrong" });
    }
    Ok(())
}
