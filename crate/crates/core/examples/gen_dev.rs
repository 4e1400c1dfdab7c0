//! Out-of-distribution COGS cases and the random gen-dev sample drawn from
//! them for model selection.
//!
//! `cargo run --example gen_dev -- [per_case] [sample] [seed]`

use std::collections::BTreeMap;

use lagr::cogs::synth::{generate_gen, SynthConfig};
use lagr::harness::sample_gen_dev;

fn main() -> lagr::Result<()> {
    let mut args = std::env::args().skip(1);
    let per_case: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(30);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let gen = generate_gen(per_case, 4, &SynthConfig::default());
    let (sample, rest) = sample_gen_dev(&gen, n, seed)?;
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for ex in &sample {
        counts.entry(&ex.tag).or_default().0 += 1;
    }
    for ex in &rest {
        counts.entry(&ex.tag).or_default().1 += 1;
    }
    println!("{} generalization examples, {} sampled for gen-dev", gen.len(), sample.len());
    for (tag, (s, r)) in counts {
        println!("  {tag:<20} {s:>4} sampled {r:>5} kept for test");
    }
    for ex in sample.iter().take(3) {
        println!("{} [{}]", ex.sentence(), ex.tag);
    }
    Ok(())
}
