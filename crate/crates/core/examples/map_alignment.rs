//! MAP alignment search on untrained toy models: noisy matching candidates
//! compared with the exhaustive best over all permutations. `sharpen`
//! multiplies the head weights so that the label distributions are far
//! from uniform, as they are once training is under way. Targets are the
//! model's own argmax graph with shuffled slots, so a perfect alignment
//! exists but duplicated node labels leave the node costs ambiguous.
//!
//! `cargo run --example map_alignment -- [k] [sigma] [trials] [sharpen]`

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng as _;

use lagr::align::{candidate_alignments, score_alignment, select_map_alignment, AlignmentConfig};
use lagr::encoder::EncoderConfig;
use lagr::graph::UnalignedTarget;
use lagr::heads::decode_argmax;
use lagr::model::{Lagr, ModelConfig};
use lagr::rng::seeded;
use lagr::tensor::ParamStore;

fn main() -> lagr::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(24);
    let sigma: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let trials: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let sharpen: f32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5.0);
    let (n, layers, node_labels, edge_labels) = (2, 2, 3, 3);
    let m = n * layers;
    let cfg = AlignmentConfig {
        k,
        sigma,
        cache_enabled: false,
        include_noiseless: false,
    };

    let mut rng = seeded(7);
    let mut found = 0;
    for t in 0..trials {
        let mut store = ParamStore::new();
        let model = Lagr::new(
            &mut store,
            ModelConfig {
                encoder: EncoderConfig {
                    d: 12,
                    layers: 1,
                    heads: 2,
                    ff: 16,
                    dropout: 0.0,
                    ..EncoderConfig::default()
                },
                layers,
                tokens: 5,
                node_labels,
                edge_labels,
            },
            &mut seeded(t as u64),
        )?;
        for p in store.iter_mut().filter(|p| p.name.contains("_head.")) {
            p.tensor.data_mut().iter_mut().for_each(|w| *w *= sharpen);
        }
        let ids: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let lp = model.log_probs(&store, &ids)?;
        let mut shuffle: Vec<usize> = (0..m).collect();
        shuffle.shuffle(&mut rng);
        let target: UnalignedTarget = decode_argmax(&lp).permute_slots(&shuffle)?;
        let cands = candidate_alignments(&lp, &target, &cfg, &mut rng)?;
        let chosen = select_map_alignment(&cands, None, &target, &lp)?;
        let best = (0..m)
            .permutations(m)
            .map(|a| score_alignment(&a, &target, &lp))
            .fold(f64::NEG_INFINITY, f64::max);
        if chosen.alignment.score >= best - 1e-9 {
            found += 1;
        }
    }
    println!("K={k}, sigma={sigma}: exhaustive best found in {found}/{trials} trials");
    Ok(())
}
