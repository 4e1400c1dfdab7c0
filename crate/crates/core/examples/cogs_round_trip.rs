//! Logical form -> aligned graph -> logical form on a COGS file, or on the
//! synthetic grammar when no file is given.
//!
//! `cargo run --example cogs_round_trip -- [train.tsv]`

use lagr::cogs::synth::{generate, SynthConfig};
use lagr::cogs::{lf_to_graph, load_cogs, parse_lf, serialize_lf, CogsExample};

fn main() -> lagr::Result<()> {
    let examples: Vec<CogsExample> = match std::env::args().nth(1) {
        Some(path) => {
            let (examples, skipped) = load_cogs(path.as_ref())?;
            if skipped > 0 {
                eprintln!("{skipped} malformed lines skipped");
            }
            examples
        }
        None => generate(1000, 3, &SynthConfig::default()),
    };

    let mut exact = 0;
    let mut failures = Vec::new();
    for ex in &examples {
        let result = parse_lf(&ex.lf)
            .and_then(|lf| lf_to_graph(&lf, &ex.tokens))
            .and_then(|g| serialize_lf(&g));
        match result {
            Ok(text) if text == ex.lf => exact += 1,
            Ok(text) => failures.push(format!("{}\n  gold {}\n  back {text}", ex.sentence(), ex.lf)),
            Err(e) => failures.push(format!("{}\n  error {e}", ex.sentence())),
        }
    }
    println!("{exact}/{} logical forms reproduced exactly", examples.len());
    for f in failures.iter().take(5) {
        println!("{f}");
    }

    let ex = &examples[0];
    let g = lf_to_graph(&parse_lf(&ex.lf)?, &ex.tokens)?;
    println!("\n{}\n{}", ex.sentence(), ex.lf);
    for n in &g.nodes {
        let (_, pos) = n.slot.expect("COGS nodes are aligned");
        println!("  node {:>2} `{}` on `{}`", pos, n.label, ex.tokens[pos]);
    }
    for e in &g.edges {
        println!("  edge {} -{}-> {}", g.nodes[e.src].label, e.label, g.nodes[e.dst].label);
    }
    Ok(())
}
