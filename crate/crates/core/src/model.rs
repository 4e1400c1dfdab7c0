//! The full parser: encoder plus node and edge heads.

use crate::encoder::{Encoder, EncoderConfig, Forward};
use crate::error::{LagrError, Result};
use crate::graph::AlignedGraph;
use crate::heads::{decode_argmax, supervised_loss, EdgeHead, LogProbs, NodeHead};
use crate::rng::Rng;
use crate::tensor::{ParamStore, Scalar, Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    /// Graph layers per token.
    pub layers: usize,
    pub tokens: usize,
    pub node_labels: usize,
    pub edge_labels: usize,
}

#[derive(Debug, Clone)]
pub struct Lagr {
    pub config: ModelConfig,
    pub encoder: Encoder,
    pub node_head: NodeHead,
    pub edge_head: EdgeHead,
}

/// Log-probability variables from one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Output {
    pub n: usize,
    pub layers: usize,
    pub node_logp: Var,
    pub edge_logp: Var,
}

impl Output {
    pub fn log_probs<T: Scalar>(&self, tape: &Tape<'_, T>) -> LogProbs {
        LogProbs::from_tape(tape, self.n, self.layers, self.node_logp, self.edge_logp)
    }

    pub fn loss<T: Scalar>(&self, tape: &mut Tape<'_, T>, target: &AlignedGraph) -> Result<Var> {
        if target.n != self.n || target.layers != self.layers {
            return Err(LagrError::invalid(format!(
                "target is {}x{} but the input has {} tokens and {} layers",
                target.layers, target.n, self.n, self.layers
            )));
        }
        supervised_loss(tape, self.node_logp, self.edge_logp, target)
    }
}

impl Lagr {
    pub fn new(store: &mut ParamStore, config: ModelConfig, rng: &mut Rng) -> Result<Self> {
        if config.layers == 0 {
            return Err(LagrError::Config("graph layers must be positive".into()));
        }
        let d = config.encoder.d;
        let encoder = Encoder::new(store, config.tokens, config.encoder.clone(), rng)?;
        let node_head = NodeHead::new(store, "node_head", d, config.layers, config.node_labels, rng)?;
        let edge_head = EdgeHead::new(store, "edge_head", d, config.layers, config.edge_labels, rng)?;
        Ok(Lagr {
            config,
            encoder,
            node_head,
            edge_head,
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, ids: &[usize], fwd: &mut Forward<'_>) -> Result<Output> {
        let h = self.encoder.encode(tape, ids, fwd)?;
        let nl = self.node_head.logits(tape, h.node)?;
        let el = self.edge_head.logits(tape, h.edge)?;
        Ok(Output {
            n: ids.len(),
            layers: self.config.layers,
            node_logp: tape.log_softmax(nl),
            edge_logp: tape.log_softmax(el),
        })
    }

    /// Eval-mode log-probabilities.
    pub fn log_probs(&self, store: &ParamStore, ids: &[usize]) -> Result<LogProbs> {
        let mut tape = Tape::<f32>::new(store);
        let out = self.forward(&mut tape, ids, &mut Forward::eval())?;
        Ok(out.log_probs(&tape))
    }

    pub fn predict(&self, store: &ParamStore, ids: &[usize]) -> Result<AlignedGraph> {
        Ok(decode_argmax(&self.log_probs(store, ids)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::EncoderMode;
    use crate::rng::seeded;

    fn toy(mode: EncoderMode) -> (ParamStore, Lagr) {
        let mut store = ParamStore::new();
        let cfg = ModelConfig {
            encoder: EncoderConfig {
                d: 8,
                layers: 1,
                heads: 2,
                ff: 8,
                dropout: 0.0,
                mode,
                max_len: 6,
            },
            layers: 2,
            tokens: 7,
            node_labels: 4,
            edge_labels: 3,
        };
        let model = Lagr::new(&mut store, cfg, &mut seeded(8)).unwrap();
        (store, model)
    }

    #[test]
    fn shapes() {
        let (store, model) = toy(EncoderMode::Shared);
        let lp = model.log_probs(&store, &[2, 3, 4]).unwrap();
        assert_eq!(lp.m(), 6);
        assert_eq!(lp.node.len(), 6 * 4);
        assert_eq!(lp.edge.len(), 36 * 3);
        let g = model.predict(&store, &[2, 3, 4]).unwrap();
        assert_eq!((g.n, g.layers), (3, 2));
    }

    #[test]
    fn separate_mode_isolates_heads() {
        let (mut store, model) = toy(EncoderMode::Separate);
        let before = model.log_probs(&store, &[2, 3]).unwrap();
        let syn = model.encoder.stacks()[0].tok_emb();
        store.get_mut(syn).tensor.data_mut()[2 * 8 + 1] += 0.5;
        let after = model.log_probs(&store, &[2, 3]).unwrap();
        assert_ne!(before.node, after.node);
        assert_eq!(before.edge, after.edge);
    }

    #[test]
    fn loss_rejects_mismatched_target() {
        let (store, model) = toy(EncoderMode::Shared);
        let mut tape = Tape::<f32>::new(&store);
        let out = model.forward(&mut tape, &[2, 3], &mut Forward::eval()).unwrap();
        assert!(out.loss(&mut tape, &AlignedGraph::empty(3, 2)).is_err());
        assert!(out.loss(&mut tape, &AlignedGraph::empty(2, 2)).is_ok());
    }
}
