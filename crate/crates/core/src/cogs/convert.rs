//! Logical forms to single-layer graphs and back.
//!
//! Variables are not nodes: `x_i` becomes the node at token `i`, labelled by
//! the predicate that owns it. A definite noun gets a `*` node on the
//! article token before it, joined by an `article` edge. Proper nouns sit on
//! their own token.

use std::collections::{BTreeMap, HashMap};

use super::lf::{is_name, Arg, Conjunct, Definite, LogicalForm};
use crate::error::{LagrError, Result};
use crate::graph::{to_aligned, AlignedGraph, GraphVocab, MrGraph};

pub const ARTICLE: &str = "article";
pub const STAR: &str = "*";

struct Builder<'t> {
    tokens: &'t [String],
    graph: MrGraph,
    at_pos: HashMap<usize, usize>,
}

impl Builder<'_> {
    fn claim(&mut self, pos: usize, label: &str) -> Result<usize> {
        if pos >= self.tokens.len() {
            return Err(LagrError::invalid(format!(
                "variable x_{pos} is past the last token ({} tokens)",
                self.tokens.len()
            )));
        }
        if let Some(&id) = self.at_pos.get(&pos) {
            let have = &self.graph.nodes[id].label;
            if have != label {
                return Err(LagrError::invalid(format!(
                    "token {pos} claimed by both `{have}` and `{label}`"
                )));
            }
            return Ok(id);
        }
        let id = self.graph.add_node(label, Some((0, pos)));
        self.at_pos.insert(pos, id);
        Ok(id)
    }

    fn name(&mut self, name: &str) -> Result<usize> {
        let pos = self
            .tokens
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| LagrError::invalid(format!("proper noun `{name}` not found in the sentence")))?;
        self.claim(pos, name)
    }

    fn arg(&mut self, arg: &Arg) -> Result<usize> {
        match arg {
            Arg::Name(n) => self.name(n),
            Arg::Var(i) => self
                .at_pos
                .get(i)
                .copied()
                .ok_or_else(|| LagrError::invalid(format!("variable x_{i} has no predicate"))),
        }
    }
}

/// Build the MR graph of `lf` for the given sentence tokens.
pub fn lf_to_graph(lf: &LogicalForm, tokens: &[String]) -> Result<MrGraph> {
    let mut b = Builder {
        tokens,
        graph: MrGraph::default(),
        at_pos: HashMap::new(),
    };
    match lf {
        LogicalForm::Lambda(text) => {
            if tokens.len() != 1 {
                return Err(LagrError::invalid("lambda forms only label single-word inputs"));
            }
            b.claim(0, text)?;
        }
        LogicalForm::Name(n) => {
            b.name(n)?;
        }
        LogicalForm::Clauses { definites, conjuncts } => {
            // owners first, so argument order does not matter
            for d in definites {
                b.claim(d.var, &d.noun)?;
            }
            for c in conjuncts {
                match c {
                    Conjunct::Unary { pred, arg: Arg::Var(i) } => {
                        b.claim(*i, pred)?;
                    }
                    Conjunct::Unary { arg: Arg::Name(n), .. } => {
                        return Err(LagrError::invalid(format!("unary predicate over proper noun `{n}`")));
                    }
                    Conjunct::Role { pred, head, .. } => match head {
                        Arg::Var(i) => {
                            b.claim(*i, pred)?;
                        }
                        Arg::Name(n) => {
                            b.name(n)?;
                        }
                    },
                }
            }
            for Definite { var, .. } in definites {
                if *var == 0 {
                    return Err(LagrError::invalid("definite noun at token 0 has no article slot"));
                }
                let star = b.claim(var - 1, STAR)?;
                let noun = b.at_pos[var];
                b.graph.add_edge(star, noun, ARTICLE);
            }
            for c in conjuncts {
                if let Conjunct::Role { role, head, arg, .. } = c {
                    let h = b.arg(head)?;
                    let a = b.arg(arg)?;
                    b.graph.add_edge(h, a, role.clone());
                }
            }
        }
    }
    Ok(b.graph)
}

pub fn lf_to_aligned_graph(lf: &LogicalForm, tokens: &[String], vocab: &GraphVocab) -> Result<AlignedGraph> {
    to_aligned(&lf_to_graph(lf, tokens)?, vocab, tokens.len(), 1)
}

fn is_event_role(label: &str) -> bool {
    label != ARTICLE && !label.starts_with("nmod")
}

/// Canonical COGS text for a decoded graph.
///
/// Definite clauses come first, ordered by noun position. Conjuncts follow,
/// ordered by head position, a noun's unary clause before its roles, then by
/// argument position. Nodes without any edge are not printed unless the
/// whole graph is one bare node (a primitive).
pub fn serialize_lf(g: &MrGraph) -> Result<String> {
    let pos: Vec<usize> = g
        .nodes
        .iter()
        .map(|n| {
            n.slot
                .map(|s| s.1)
                .ok_or_else(|| LagrError::invalid(format!("node `{}` has no token position", n.label)))
        })
        .collect::<Result<_>>()?;
    if g.edges.is_empty() {
        return Ok(match g.nodes.as_slice() {
            [only] => only.label.clone(),
            _ => String::new(),
        });
    }

    let n = g.nodes.len();
    let mut touched = vec![false; n];
    let mut is_event = vec![false; n];
    let mut definite = vec![false; n];
    for e in &g.edges {
        touched[e.src] = true;
        touched[e.dst] = true;
        if is_event_role(&e.label) {
            is_event[e.src] = true;
        }
        if e.label == ARTICLE && g.nodes[e.src].label == STAR {
            definite[e.dst] = true;
        }
    }
    let arg_of = |i: usize| {
        if is_name(&g.nodes[i].label) {
            Arg::Name(g.nodes[i].label.clone())
        } else {
            Arg::Var(pos[i])
        }
    };

    let mut definites: Vec<Definite> = (0..n)
        .filter(|&i| definite[i])
        .map(|i| Definite {
            noun: g.nodes[i].label.clone(),
            var: pos[i],
        })
        .collect();
    definites.sort_by_key(|d| d.var);

    let mut keyed: BTreeMap<(usize, usize, usize, usize), Vec<Conjunct>> = BTreeMap::new();
    for i in 0..n {
        let label = &g.nodes[i].label;
        if touched[i] && !definite[i] && !is_event[i] && label != STAR && !is_name(label) {
            keyed.entry((pos[i], 0, 0, 0)).or_default().push(Conjunct::Unary {
                pred: label.clone(),
                arg: Arg::Var(pos[i]),
            });
        }
    }
    for (ei, e) in g.edges.iter().enumerate() {
        if e.label == ARTICLE {
            continue;
        }
        keyed.entry((pos[e.src], 1, pos[e.dst], ei)).or_default().push(Conjunct::Role {
            pred: g.nodes[e.src].label.clone(),
            role: e.label.clone(),
            head: arg_of(e.src),
            arg: arg_of(e.dst),
        });
    }
    let conjuncts = keyed.into_values().flatten().collect();
    Ok(LogicalForm::Clauses { definites, conjuncts }.to_string())
}
