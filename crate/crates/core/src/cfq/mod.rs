//! CFQ: questions paired with SPARQL, converted to two-layer graphs and
//! scored by graph isomorphism.

pub mod convert;
pub mod io;
pub mod sparql;
pub mod synth;

pub use crate::graph::graph_isomorphic;
pub use convert::{graph_to_query, graph_to_sparql, query_graph, sparql_to_graph, AGENT, FILTER, THEME};
pub use io::{cfq_graphs, load_cfq, write_cfq, CfqExample, CfqSplit};
pub use sparql::{compress, compress_with, is_entity, parse_sparql, Constraint, MergeRule, Select, SparqlQuery, SELECT_VAR};

/// Layers per token used for CFQ.
pub const CFQ_LAYERS: usize = 2;
