//! COGS: sentence / logical-form pairs, converted to single-layer graphs.

pub mod convert;
pub mod io;
pub mod lf;
pub mod synth;

pub use convert::{lf_to_aligned_graph, lf_to_graph, serialize_lf};
pub use io::{load_cogs, read_cogs_tsv, write_cogs_tsv, CogsExample, CogsReader};
pub use lf::{normalize, parse_lf, Arg, Conjunct, Definite, LogicalForm};
