//! JSON interchange for MR graphs, used by `lagr convert` and golden tests.

use serde::{Deserialize, Serialize};

use super::{MrGraph, MrNode};
use crate::error::{LagrError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonNode {
    pub id: usize,
    pub label: String,
    pub layer: Option<usize>,
    pub pos: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonEdge {
    pub src: usize,
    pub dst: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct GraphJson {
    pub nodes: Vec<JsonNode>,
    pub edges: Vec<JsonEdge>,
}

impl From<&MrGraph> for GraphJson {
    fn from(g: &MrGraph) -> Self {
        GraphJson {
            nodes: g
                .nodes
                .iter()
                .enumerate()
                .map(|(id, n)| JsonNode {
                    id,
                    label: n.label.clone(),
                    layer: n.slot.map(|s| s.0),
                    pos: n.slot.map(|s| s.1),
                })
                .collect(),
            edges: g
                .edges
                .iter()
                .map(|e| JsonEdge {
                    src: e.src,
                    dst: e.dst,
                    label: e.label.clone(),
                })
                .collect(),
        }
    }
}

impl GraphJson {
    /// Node ids may be arbitrary; they are renumbered in listing order.
    pub fn to_graph(&self) -> Result<MrGraph> {
        let mut remap = std::collections::HashMap::new();
        let mut g = MrGraph::default();
        for n in &self.nodes {
            let slot = match (n.layer, n.pos) {
                (Some(l), Some(p)) => Some((l, p)),
                (None, None) => None,
                _ => return Err(LagrError::invalid(format!("node {} has only one of layer/pos", n.id))),
            };
            if remap.insert(n.id, g.nodes.len()).is_some() {
                return Err(LagrError::invalid(format!("duplicate node id {}", n.id)));
            }
            g.nodes.push(MrNode {
                label: n.label.clone(),
                slot,
            });
        }
        for e in &self.edges {
            let (Some(&s), Some(&d)) = (remap.get(&e.src), remap.get(&e.dst)) else {
                return Err(LagrError::invalid(format!("edge {}->{} has a missing endpoint", e.src, e.dst)));
            };
            g.add_edge(s, d, e.label.clone());
        }
        g.validate()?;
        Ok(g)
    }
}
