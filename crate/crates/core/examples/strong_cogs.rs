//! Strongly supervised training on a synthetic COGS-style corpus.
//!
//! `cargo run --release --example strong_cogs -- [key=value ...]`, where
//! keys are run-config keys plus `size` for the number of training examples
//! and `show` for the number of dev misses to print.

use lagr::cogs::synth::{generate, SynthConfig};
use lagr::harness::{evaluate, train, Dataset, Reference, RunConfig};

fn main() -> lagr::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut size = 500;
    let mut show = 3;
    let mut overrides = Vec::new();
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("arguments are key=value");
        if k == "size" {
            size = v.parse().expect("size is a number");
        } else if k == "show" {
            show = v.parse().expect("show is a number");
        } else {
            overrides.push((k.to_string(), v.to_string()));
        }
    }

    let all = generate(size + 200, 11, &SynthConfig::default());
    let (train_set, dev_set) = all.split_at(size);
    let data = Dataset::cogs(train_set, dev_set, &[])?;
    println!(
        "{} train / {} dev, {} tokens, {} node labels, {} edge labels",
        data.train.len(),
        data.dev.len(),
        data.vocab.len(),
        data.graph_vocab.nodes.len(),
        data.graph_vocab.edges.len()
    );

    let mut cfg = RunConfig::default();
    for (k, v) in [
        ("d", "64"),
        ("encoder_layers", "2"),
        ("heads", "4"),
        ("ff", "128"),
        ("dropout", "0.1"),
        ("batch_size", "16"),
        ("lr", "1e-3"),
        ("warmup", "200"),
        ("eval_every", "500"),
        ("train_steps", "3000"),
    ] {
        cfg.set(k, v)?;
    }
    for (k, v) in &overrides {
        cfg.set(k, v)?;
    }
    let out = train(&cfg, &data)?;
    let dev = evaluate(&out.model, &out.store, &data, &data.dev, 0)?;
    println!("train exact match {:.4}, dev exact match {:.4}", out.train_acc, dev.accuracy);
    for (p, (_, pred)) in data.dev.iter().zip(dev.hits.iter().zip(&dev.predictions)).filter(|(_, (h, _))| !**h).take(show) {
        let gold = match &p.reference {
            Reference::Lf(lf) => lf.as_str(),
            Reference::Graph(_) => "",
        };
        println!("miss: {}\n  gold {gold}\n  got  {pred}", p.tokens.join(" "));
    }
    Ok(())
}
