//! SPARQL queries as MR graphs. Entities and predicate occurrences become
//! nodes; `agent`, `theme` and `FILTER` are the edge labels.

use std::collections::{BTreeSet, HashMap};

use super::sparql::{compress, is_entity, parse_sparql, Constraint, Select, SparqlQuery, SELECT_VAR};
use crate::error::Result;
use crate::graph::MrGraph;

pub const AGENT: &str = "agent";
pub const THEME: &str = "theme";
pub const FILTER: &str = "FILTER";

/// Build the graph of `q` as given; callers compress first. Each
/// constraint gets its own predicate node, even when labels repeat.
pub fn sparql_to_graph(q: &SparqlQuery) -> MrGraph {
    let mut g = MrGraph::default();
    let mut entities: HashMap<String, usize> = HashMap::new();
    let mut entity = |g: &mut MrGraph, name: &str| -> usize {
        let name = if q.select == Select::Distinct && name == "?x0" {
            SELECT_VAR
        } else {
            name
        };
        *entities
            .entry(name.to_string())
            .or_insert_with(|| g.add_node(name, None))
    };
    if q.select == Select::Distinct {
        entity(&mut g, "?x0");
    }
    for c in &q.constraints {
        match c {
            Constraint::Filter(a, b) => {
                let (a, b) = (entity(&mut g, a), entity(&mut g, b));
                g.add_edge(a, b, FILTER);
            }
            Constraint::Category { entities: es, category } => {
                let p = g.add_node(category.as_str(), None);
                for e in es {
                    let e = entity(&mut g, e);
                    g.add_edge(e, p, AGENT);
                }
            }
            Constraint::Relation { subjects, pred, objects } => {
                let p = g.add_node(pred.as_str(), None);
                for s in subjects {
                    let s = entity(&mut g, s);
                    g.add_edge(p, s, AGENT);
                }
                for o in objects {
                    let o = entity(&mut g, o);
                    g.add_edge(p, o, THEME);
                }
            }
        }
    }
    g
}

/// Parse, compress and convert in one step.
pub fn query_graph(text: &str) -> Result<MrGraph> {
    Ok(sparql_to_graph(&compress(&parse_sparql(text)?)))
}

/// Read a query back off a graph. Malformed predicate nodes are logged and
/// dropped; constraints come out in lexicographic order.
pub fn graph_to_query(g: &MrGraph) -> SparqlQuery {
    let select = if g.nodes.iter().any(|n| n.label == SELECT_VAR) {
        Select::Distinct
    } else {
        Select::Count
    };
    let name = |i: usize| -> String {
        let l = &g.nodes[i].label;
        if l == SELECT_VAR { "?x0".to_string() } else { l.clone() }
    };
    let entity = |i: usize| is_entity(&g.nodes[i].label);
    let mut constraints = BTreeSet::new();
    for (p, node) in g.nodes.iter().enumerate() {
        if entity(p) {
            continue;
        }
        let mut members = Vec::new();
        let mut subjects = Vec::new();
        let mut objects = Vec::new();
        for e in &g.edges {
            if e.dst == p && e.label == AGENT && entity(e.src) {
                members.push(name(e.src));
            } else if e.src == p && e.label == AGENT && entity(e.dst) {
                subjects.push(name(e.dst));
            } else if e.src == p && e.label == THEME && entity(e.dst) {
                objects.push(name(e.dst));
            } else if e.src == p || e.dst == p {
                log::warn!("predicate `{}`: ignoring unexpected {} edge", node.label, e.label);
            }
        }
        let mut handled = false;
        if !members.is_empty() {
            members.sort();
            constraints.insert(Constraint::Category {
                entities: members,
                category: node.label.clone(),
            });
            handled = true;
        }
        if !subjects.is_empty() && !objects.is_empty() {
            subjects.sort();
            objects.sort();
            constraints.insert(Constraint::Relation {
                subjects,
                pred: node.label.clone(),
                objects,
            });
            handled = true;
        } else if !subjects.is_empty() || !objects.is_empty() {
            log::warn!("predicate `{}` lacks an agent or a theme; dropped", node.label);
        }
        if !handled {
            log::warn!("predicate `{}` has no agent edge; dropped", node.label);
        }
    }
    for e in &g.edges {
        if e.label == FILTER && entity(e.src) && entity(e.dst) {
            constraints.insert(Constraint::Filter(name(e.src), name(e.dst)));
        }
    }
    SparqlQuery {
        select,
        constraints: constraints.into_iter().collect(),
    }
}

/// Canonical SPARQL text for a graph.
pub fn graph_to_sparql(g: &MrGraph) -> String {
    graph_to_query(g).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::graph_isomorphic;

    fn labels(g: &MrGraph) -> Vec<String> {
        let mut l: Vec<String> = g.nodes.iter().map(|n| n.label.clone()).collect();
        l.sort();
        l
    }

    fn edge(g: &MrGraph, src: &str, dst: &str) -> Vec<String> {
        g.edges
            .iter()
            .filter(|e| g.nodes[e.src].label == src && g.nodes[e.dst].label == dst)
            .map(|e| e.label.clone())
            .collect()
    }

    #[test]
    fn parent_sibling_actor_fragment() {
        let g = query_graph("SELECT count(*) WHERE { ?x0 a actor . ?x0 parent M1 . ?x0 sibling ?x1 . FILTER ?x0 != M1 }")
            .unwrap();
        assert_eq!(labels(&g), ["?x0", "?x1", "M1", "actor", "parent", "sibling"]);
        assert_eq!(edge(&g, "?x0", "actor"), [AGENT]);
        assert_eq!(edge(&g, "parent", "?x0"), [AGENT]);
        assert_eq!(edge(&g, "parent", "M1"), [THEME]);
        assert_eq!(edge(&g, "sibling", "?x1"), [THEME]);
        assert_eq!(edge(&g, "?x0", "M1"), [FILTER]);
        assert_eq!(g.edges.len(), 6);
    }

    #[test]
    fn male_dutch_editor() {
        let text = "SELECT DISTINCT ?x0 WHERE { ?x0 a editor . ?x0 director M3 . ?x0 gender ns:m.05zppz . ?x0 nationality ns:m.059j2 }";
        let g = query_graph(text).unwrap();
        assert_eq!(
            labels(&g),
            ["M3", "director", "editor", "gender", "nationality", "ns:m.059j2", "ns:m.05zppz", SELECT_VAR]
        );
        assert_eq!(edge(&g, SELECT_VAR, "editor"), [AGENT]);
        assert_eq!(edge(&g, "director", SELECT_VAR), [AGENT]);
        assert_eq!(edge(&g, "director", "M3"), [THEME]);
        assert_eq!(
            graph_to_sparql(&g),
            "SELECT DISTINCT ?x0 WHERE { ?x0 a editor . ?x0 director M3 . ?x0 gender ns:m.05zppz . ?x0 nationality ns:m.059j2 }"
        );
    }

    #[test]
    fn ten_node_example() {
        let text = "SELECT DISTINCT ?x0 WHERE { ?x0 a person . ?x0 spouses ?x1 . ?x1 executive_produced M1 . \
                    ?x1 gender ns:m.02zsn . ?x1 nationality ns:m.0345h }";
        let g = query_graph(text).unwrap();
        assert_eq!(g.nodes.len(), 10);
        let question = "Who married M1 's female German executive producer";
        assert_eq!(question.split_whitespace().count(), 8);
        assert!(g.nodes.len() > question.split_whitespace().count());
        assert!(g.nodes.len() <= 2 * question.split_whitespace().count());
    }

    #[test]
    fn repeated_predicates_get_their_own_nodes() {
        let g = query_graph("SELECT count(*) WHERE { M1 influenced M2 . M3 influenced M4 }").unwrap();
        assert_eq!(g.nodes.iter().filter(|n| n.label == "influenced").count(), 2);
        let merged = query_graph("SELECT count(*) WHERE { M1 influenced M2 . M3 influenced M2 }").unwrap();
        assert_eq!(merged.nodes.iter().filter(|n| n.label == "influenced").count(), 1);
    }

    #[test]
    fn empty_queries() {
        let count = query_graph("SELECT count(*) WHERE { }").unwrap();
        assert!(count.nodes.is_empty());
        assert_eq!(graph_to_sparql(&count), "SELECT count(*) WHERE { }");
        let distinct = query_graph("SELECT DISTINCT ?x0 WHERE { }").unwrap();
        assert_eq!(labels(&distinct), [SELECT_VAR]);
        assert_eq!(graph_to_sparql(&distinct), "SELECT DISTINCT ?x0 WHERE { }");
    }

    #[test]
    fn round_trip_is_isomorphic() {
        let text = "SELECT DISTINCT ?x0 WHERE { ?x0 a ns:film.director . M2 ns:film.film.directed_by ?x0 . \
                    M3 ns:film.film.directed_by ?x0 . ?x0 ns:film.producer.film M1 . FILTER ( ?x0 != M1 ) }";
        let g = query_graph(text).unwrap();
        let back = graph_to_sparql(&g);
        assert!(back.contains("[M2, M3] ns:film.film.directed_by ?x0"), "{back}");
        assert!(graph_isomorphic(&g, &query_graph(&back).unwrap()));
    }

    #[test]
    fn dangling_predicates_are_dropped() {
        let mut g = query_graph("SELECT count(*) WHERE { M1 influenced M2 }").unwrap();
        g.add_node("orphan", None);
        let agent_only = g.add_node("half", None);
        g.add_edge(agent_only, 0, AGENT);
        assert_eq!(graph_to_sparql(&g), "SELECT count(*) WHERE { M1 influenced M2 }");
    }

    #[test]
    fn constraint_order_does_not_matter() {
        let a = query_graph("SELECT count(*) WHERE { ?x0 a actor . M1 p ?x0 . FILTER ( ?x0 != M1 ) }").unwrap();
        let b = query_graph("SELECT count(*) WHERE { FILTER ( ?x0 != M1 ) . M1 p ?x0 . ?x0 a actor }").unwrap();
        assert!(graph_isomorphic(&a, &b));
    }
}
