//! SPARQL -> compressed query -> two-layer graph -> SPARQL, checked by
//! graph isomorphism. Reads a CFQ JSON-lines file or uses synthetic data.
//!
//! `cargo run --example cfq_round_trip -- [dataset.jsonl]`

use lagr::cfq::synth::{generate, SynthConfig};
use lagr::cfq::{compress, graph_isomorphic, graph_to_sparql, load_cfq, parse_sparql, query_graph, sparql_to_graph, CFQ_LAYERS};

fn main() -> lagr::Result<()> {
    let examples = match std::env::args().nth(1) {
        Some(path) => load_cfq(path.as_ref())?,
        None => generate(500, 5, &SynthConfig::default()),
    };

    let mut iso = 0;
    let mut too_big = 0;
    for ex in &examples {
        let g = query_graph(&ex.sparql)?;
        if g.nodes.len() > ex.tokens.len() * CFQ_LAYERS {
            too_big += 1;
        }
        let back = query_graph(&graph_to_sparql(&g))?;
        if graph_isomorphic(&g, &back) {
            iso += 1;
        }
    }
    println!(
        "{iso}/{} graphs survive the round trip; {too_big} need more than {CFQ_LAYERS} nodes per token",
        examples.len()
    );

    let ex = &examples[0];
    let q = parse_sparql(&ex.sparql)?;
    let c = compress(&q);
    let g = sparql_to_graph(&c);
    println!("\n{}\n{}\ncompressed: {c}", ex.question(), q);
    println!("{} nodes for {} tokens", g.nodes.len(), ex.tokens.len());
    for e in &g.edges {
        println!("  {} -{}-> {}", g.nodes[e.src].label, e.label, g.nodes[e.dst].label);
    }
    Ok(())
}
