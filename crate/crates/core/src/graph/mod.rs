//! Aligned multi-layer graphs, plain MR graphs and the conversions between
//! them.
//!
//! Slots are 0-based: the node for layer `l` and token position `i` lives in
//! slot `l * n + i`.

mod iso;
mod json;

use std::collections::HashMap;
use std::path::Path;

use crate::error::{LagrError, Result};

pub use iso::graph_isomorphic;
pub use json::{GraphJson, JsonEdge, JsonNode};

pub const NULL: usize = 0;
pub const NULL_LABEL: &str = "null";

/// Label inventory with `null` fixed at id 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocab {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for LabelVocab {
    fn default() -> Self {
        Self::new()
    }
}

impl LabelVocab {
    pub fn new() -> Self {
        let mut index = HashMap::new();
        index.insert(NULL_LABEL.to_string(), NULL);
        LabelVocab {
            labels: vec![NULL_LABEL.to_string()],
            index,
        }
    }

    /// Sorted vocabulary over the given labels, plus null.
    pub fn build<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all: Vec<String> = labels.into_iter().map(Into::into).collect();
        all.sort();
        all.dedup();
        let mut v = Self::new();
        for l in all {
            v.insert(&l);
        }
        v
    }

    pub fn from_list(labels: Vec<String>) -> Result<Self> {
        if labels.first().map(String::as_str) != Some(NULL_LABEL) {
            return Err(LagrError::invalid("label vocab must start with null"));
        }
        let mut v = Self::new();
        for l in &labels[1..] {
            if v.index.contains_key(l) {
                return Err(LagrError::invalid(format!("duplicate label `{l}`")));
            }
            v.insert(l);
        }
        Ok(v)
    }

    pub fn insert(&mut self, label: &str) -> usize {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), id);
        id
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LagrError::io(path, e))?;
        Self::from_list(text.lines().map(str::to_string).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.labels.join("\n");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| LagrError::io(path, e))
    }
}

/// Node and edge label inventories for one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GraphVocab {
    pub nodes: LabelVocab,
    pub edges: LabelVocab,
}

impl GraphVocab {
    pub fn from_graphs<'a>(graphs: impl IntoIterator<Item = &'a MrGraph>) -> Self {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for g in graphs {
            nodes.extend(g.nodes.iter().map(|n| n.label.clone()));
            edges.extend(g.edges.iter().map(|e| e.label.clone()));
        }
        GraphVocab {
            nodes: LabelVocab::build(nodes),
            edges: LabelVocab::build(edges),
        }
    }
}

/// 0-based slot for `layer` and token `pos`.
pub fn slot_index(layer: usize, pos: usize, n: usize, layers: usize) -> Result<usize> {
    if layer >= layers || pos >= n {
        return Err(LagrError::invalid(format!(
            "slot (layer {layer}, pos {pos}) outside {layers} layers x {n} tokens"
        )));
    }
    Ok(layer * n + pos)
}

fn check_perm(a: &[usize], len: usize) -> Result<()> {
    if a.len() != len {
        return Err(LagrError::invalid(format!("permutation has length {}, expected {len}", a.len())));
    }
    let mut seen = vec![false; len];
    for &x in a {
        if x >= len || std::mem::replace(&mut seen[x], true) {
            return Err(LagrError::invalid(format!("{a:?} is not a permutation")));
        }
    }
    Ok(())
}

/// The complete `layers x n` slot graph; `nodes[j]` and `edges[j * m + k]`
/// hold label ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedGraph {
    pub n: usize,
    pub layers: usize,
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
}

impl AlignedGraph {
    pub fn empty(n: usize, layers: usize) -> Self {
        let m = n * layers;
        AlignedGraph {
            n,
            layers,
            nodes: vec![NULL; m],
            edges: vec![NULL; m * m],
        }
    }

    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge(&self, j: usize, k: usize) -> usize {
        self.edges[j * self.m() + k]
    }

    pub fn set_edge(&mut self, j: usize, k: usize, label: usize) {
        let m = self.m();
        self.edges[j * m + k] = label;
    }

    pub fn check_ids(&self, vocab: &GraphVocab) -> Result<()> {
        let bad_node = self.nodes.iter().find(|&&z| z >= vocab.nodes.len());
        let bad_edge = self.edges.iter().find(|&&x| x >= vocab.edges.len());
        if let Some(z) = bad_node {
            return Err(LagrError::UnknownLabel {
                kind: "node",
                label: z.to_string(),
            });
        }
        if let Some(x) = bad_edge {
            return Err(LagrError::UnknownLabel {
                kind: "edge",
                label: x.to_string(),
            });
        }
        Ok(())
    }

    /// Reorder slots: slot `j` of the result takes slot `a[j]` of `self`.
    /// The result's `align(a)` gives back `self`.
    pub fn permute_slots(&self, a: &[usize]) -> Result<UnalignedTarget> {
        let m = self.m();
        check_perm(a, m)?;
        let nodes = a.iter().map(|&aj| self.nodes[aj]).collect();
        let mut edges = vec![NULL; m * m];
        for j in 0..m {
            for k in 0..m {
                edges[j * m + k] = self.edge(a[j], a[k]);
            }
        }
        Ok(UnalignedTarget {
            n: self.n,
            layers: self.layers,
            nodes,
            edges,
        })
    }

    /// Column `a[j]` of `self` becomes column `j`; every layer moves together.
    pub fn permute_columns(&self, a: &[usize]) -> Result<UnalignedTarget> {
        check_perm(a, self.n)?;
        let slots: Vec<usize> = (0..self.layers)
            .flat_map(|l| a.iter().map(move |&c| l * self.n + c))
            .collect();
        self.permute_slots(&slots)
    }
}

/// Dataset MR with null-padded slots but no alignment to tokens yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnalignedTarget {
    pub n: usize,
    pub layers: usize,
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
}

impl UnalignedTarget {
    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge(&self, j: usize, k: usize) -> usize {
        self.edges[j * self.m() + k]
    }

    /// Place unaligned slot `j` into aligned slot `a[j]`.
    pub fn align(&self, a: &[usize]) -> Result<AlignedGraph> {
        let m = self.m();
        check_perm(a, m)?;
        let mut g = AlignedGraph::empty(self.n, self.layers);
        for j in 0..m {
            g.nodes[a[j]] = self.nodes[j];
            for k in 0..m {
                g.edges[a[j] * m + a[k]] = self.edges[j * m + k];
            }
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MrNode {
    pub label: String,
    /// `(layer, position)` when the node came from an aligned graph.
    pub slot: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MrEdge {
    pub src: usize,
    pub dst: usize,
    pub label: String,
}

/// Meaning-representation graph with string labels and no nulls.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MrGraph {
    pub nodes: Vec<MrNode>,
    pub edges: Vec<MrEdge>,
}

impl MrGraph {
    pub fn add_node(&mut self, label: impl Into<String>, slot: Option<(usize, usize)>) -> usize {
        self.nodes.push(MrNode {
            label: label.into(),
            slot,
        });
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, src: usize, dst: usize, label: impl Into<String>) {
        self.edges.push(MrEdge {
            src,
            dst,
            label: label.into(),
        });
    }

    pub fn validate(&self) -> Result<()> {
        for n in &self.nodes {
            if n.label == NULL_LABEL {
                return Err(LagrError::invalid("MR graph contains a null node"));
            }
        }
        for e in &self.edges {
            if e.src >= self.nodes.len() || e.dst >= self.nodes.len() {
                return Err(LagrError::invalid(format!("edge {}->{} has a missing endpoint", e.src, e.dst)));
            }
            if e.label == NULL_LABEL {
                return Err(LagrError::invalid("MR graph contains a null edge"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stripped {
    pub graph: MrGraph,
    /// Non-null edges dropped because an endpoint was null.
    pub dangling: usize,
}

/// Remove null nodes and edges. Edges touching a null node are dropped and
/// counted rather than treated as errors, since decoded graphs can be
/// inconsistent.
pub fn strip_nulls(g: &AlignedGraph, vocab: &GraphVocab) -> Stripped {
    let m = g.m();
    let mut out = MrGraph::default();
    let mut id_of = vec![usize::MAX; m];
    for (j, &z) in g.nodes.iter().enumerate() {
        if z != NULL {
            id_of[j] = out.add_node(vocab.nodes.label(z), Some((j / g.n, j % g.n)));
        }
    }
    let mut dangling = 0;
    for j in 0..m {
        for k in 0..m {
            let x = g.edge(j, k);
            if x == NULL {
                continue;
            }
            if id_of[j] == usize::MAX || id_of[k] == usize::MAX {
                dangling += 1;
                continue;
            }
            out.add_edge(id_of[j], id_of[k], vocab.edges.label(x));
        }
    }
    if dangling > 0 {
        log::debug!("dropped {dangling} edge(s) incident to null nodes");
    }
    Stripped { graph: out, dangling }
}

/// Lay the MR's nodes into the first slots, sorted by label and then by
/// their order in `g`; the rest stay null.
pub fn pad_to_slots(g: &MrGraph, vocab: &GraphVocab, n: usize, layers: usize) -> Result<UnalignedTarget> {
    let m = n * layers;
    if g.nodes.len() > m {
        return Err(LagrError::TooManyNodes {
            nodes: g.nodes.len(),
            slots: m,
            n,
            layers,
        });
    }
    let mut order: Vec<usize> = (0..g.nodes.len()).collect();
    order.sort_by(|&a, &b| g.nodes[a].label.cmp(&g.nodes[b].label).then(a.cmp(&b)));
    let mut slot_of = vec![0; g.nodes.len()];
    let mut nodes = vec![NULL; m];
    for (slot, &i) in order.iter().enumerate() {
        slot_of[i] = slot;
        nodes[slot] = vocab.nodes.id(&g.nodes[i].label).ok_or_else(|| LagrError::UnknownLabel {
            kind: "node",
            label: g.nodes[i].label.clone(),
        })?;
    }
    let mut edges = vec![NULL; m * m];
    for e in &g.edges {
        let id = vocab.edges.id(&e.label).ok_or_else(|| LagrError::UnknownLabel {
            kind: "edge",
            label: e.label.clone(),
        })?;
        edges[slot_of[e.src] * m + slot_of[e.dst]] = id;
    }
    Ok(UnalignedTarget {
        n,
        layers,
        nodes,
        edges,
    })
}

/// Convert an MR whose nodes all carry slots into an aligned graph.
pub fn to_aligned(g: &MrGraph, vocab: &GraphVocab, n: usize, layers: usize) -> Result<AlignedGraph> {
    let mut out = AlignedGraph::empty(n, layers);
    let mut slots = Vec::with_capacity(g.nodes.len());
    for node in &g.nodes {
        let (l, i) = node
            .slot
            .ok_or_else(|| LagrError::invalid(format!("node `{}` has no slot", node.label)))?;
        let j = slot_index(l, i, n, layers)?;
        if out.nodes[j] != NULL {
            return Err(LagrError::invalid(format!("slot ({l}, {i}) used twice")));
        }
        out.nodes[j] = vocab.nodes.id(&node.label).ok_or_else(|| LagrError::UnknownLabel {
            kind: "node",
            label: node.label.clone(),
        })?;
        slots.push(j);
    }
    for e in &g.edges {
        let id = vocab.edges.id(&e.label).ok_or_else(|| LagrError::UnknownLabel {
            kind: "edge",
            label: e.label.clone(),
        })?;
        out.set_edge(slots[e.src], slots[e.dst], id);
    }
    Ok(out)
}
