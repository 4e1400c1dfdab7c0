//! Train briefly, save a checkpoint, load it back and check that the
//! reloaded model predicts exactly what the trained one did.
//!
//! `cargo run --release --example checkpoint_eval -- [dir]`

use lagr::cogs::synth::{generate, SynthConfig};
use lagr::harness::{evaluate, load_checkpoint, save_checkpoint, train, Dataset, RunConfig};

fn main() -> lagr::Result<()> {
    let dir = match std::env::args().nth(1) {
        Some(d) => std::path::PathBuf::from(d),
        None => std::env::temp_dir().join("lagr-checkpoint-example"),
    };
    let all = generate(300, 2, &SynthConfig::default());
    let data = Dataset::cogs(&all[..250], &all[250..], &[])?;
    let mut cfg = RunConfig::default();
    for (k, v) in [
        ("d", "32"),
        ("encoder_layers", "1"),
        ("heads", "2"),
        ("ff", "64"),
        ("batch_size", "16"),
        ("lr", "1e-3"),
        ("warmup", "50"),
        ("train_steps", "300"),
        ("eval_every", "300"),
    ] {
        cfg.set(k, v)?;
    }
    let out = train(&cfg, &data)?;
    save_checkpoint(&dir, &cfg, &data, &out.store, &out.cache, out.metrics.last())?;
    println!("saved to {}", dir.display());

    let ck = load_checkpoint(&dir)?;
    ck.check_dataset(&data)?;
    let before = evaluate(&out.model, &out.store, &data, &data.dev, 1)?;
    let after = evaluate(&ck.model, &ck.store, &data, &data.dev, 1)?;
    println!(
        "dev accuracy {:.4} before, {:.4} after reload; predictions identical: {}",
        before.accuracy,
        after.accuracy,
        before.predictions == after.predictions
    );
    println!("report: {:?}", ck.report);
    Ok(())
}
