//! Dataset files to graph JSON lines.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::DatasetKind;
use crate::cfq;
use crate::cogs;
use crate::error::{LagrError, Result};
use crate::graph::GraphJson;

#[derive(Serialize)]
struct Line<'a> {
    id: &'a str,
    tokens: &'a [String],
    graph: GraphJson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConvertSummary {
    pub written: usize,
    /// Examples whose meaning representation could not be converted.
    pub failed: usize,
}

/// Write one `{id, tokens, graph}` line per convertible example. COGS
/// nodes carry their slots; CFQ graphs are compressed and unaligned.
pub fn convert_file(kind: DatasetKind, input: &Path, output: &Path) -> Result<ConvertSummary> {
    let file = std::fs::File::create(output).map_err(|e| LagrError::io(output, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut summary = ConvertSummary { written: 0, failed: 0 };
    let mut emit = |id: &str, tokens: &[String], graph: Result<crate::graph::MrGraph>| -> Result<()> {
        match graph {
            Ok(g) => {
                let line = serde_json::to_string(&Line {
                    id,
                    tokens,
                    graph: GraphJson::from(&g),
                })?;
                writeln!(w, "{line}").map_err(|e| LagrError::io(output, e))?;
                summary.written += 1;
            }
            Err(e) => {
                log::warn!("{id}: {e}");
                summary.failed += 1;
            }
        }
        Ok(())
    };
    match kind {
        DatasetKind::Cogs => {
            for ex in cogs::read_cogs_tsv(input)? {
                let ex = ex?;
                let g = cogs::parse_lf(&ex.lf).and_then(|lf| cogs::lf_to_graph(&lf, &ex.tokens));
                emit(&ex.id, &ex.tokens, g)?;
            }
        }
        DatasetKind::Cfq => {
            for ex in cfq::load_cfq(input)? {
                emit(&ex.id, &ex.tokens, cfq::query_graph(&ex.sparql))?;
            }
        }
    }
    w.flush().map_err(|e| LagrError::io(output, e))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cogs_and_cfq_files() {
        let dir = tempfile::tempdir().unwrap();
        let tsv = dir.path().join("c.tsv");
        std::fs::write(
            &tsv,
            "A cat rolled .\tcat ( x _ 1 ) AND roll . theme ( x _ 2 , x _ 1 )\tin_distribution\n\
             Emma slept .\tsleep . agent ( x _ 7 , Emma )\tin_distribution\n",
        )
        .unwrap();
        let out = dir.path().join("c.jsonl");
        let s = convert_file(DatasetKind::Cogs, &tsv, &out).unwrap();
        assert_eq!(s, ConvertSummary { written: 1, failed: 1 });
        let line: serde_json::Value = serde_json::from_str(std::fs::read_to_string(&out).unwrap().lines().next().unwrap()).unwrap();
        assert_eq!(line["graph"]["nodes"].as_array().unwrap().len(), 2);
        let g: GraphJson = serde_json::from_value(line["graph"].clone()).unwrap();
        assert_eq!(g.to_graph().unwrap().edges[0].label, "theme");

        let jsonl = dir.path().join("q.jsonl");
        std::fs::write(&jsonl, "{\"question\": \"Did M1 marry M2\", \"sparql\": \"SELECT count(*) WHERE { M1 spouse M2 }\"}\n").unwrap();
        let s = convert_file(DatasetKind::Cfq, &jsonl, &out).unwrap();
        assert_eq!(s.written, 1);
    }
}
