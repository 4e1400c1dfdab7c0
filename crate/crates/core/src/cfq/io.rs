use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::convert::query_graph;
use crate::error::{LagrError, Result};
use crate::graph::MrGraph;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfqExample {
    /// `<file stem>:<line>`.
    pub id: String,
    pub tokens: Vec<String>,
    pub sparql: String,
    /// `train`, `dev`, `test`, or empty before a split is applied.
    pub split: String,
}

impl CfqExample {
    pub fn question(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Serialize, Deserialize)]
struct Line {
    question: String,
    #[serde(alias = "query")]
    sparql: String,
}

/// Read JSON lines `{"question": .., "sparql": ..}`.
pub fn load_cfq(path: &Path) -> Result<Vec<CfqExample>> {
    let file = File::open(path).map_err(|e| LagrError::io(path, e))?;
    let stem = path
        .file_stem()
        .map_or_else(|| "cfq".to_string(), |s| s.to_string_lossy().into_owned());
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| LagrError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Line = serde_json::from_str(&line).map_err(|e| {
            LagrError::invalid(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        if rec.question.trim().is_empty() || rec.sparql.trim().is_empty() {
            return Err(LagrError::invalid(format!(
                "{}:{}: empty question or query",
                path.display(),
                i + 1
            )));
        }
        out.push(CfqExample {
            id: format!("{stem}:{}", i + 1),
            tokens: rec.question.split_whitespace().map(str::to_string).collect(),
            sparql: rec.sparql,
            split: String::new(),
        });
    }
    Ok(out)
}

pub fn write_cfq(path: &Path, examples: &[CfqExample]) -> Result<()> {
    let file = File::create(path).map_err(|e| LagrError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for ex in examples {
        let line = serde_json::to_string(&Line {
            question: ex.question(),
            sparql: ex.sparql.clone(),
        })?;
        writeln!(w, "{line}").map_err(|e| LagrError::io(path, e))?;
    }
    w.flush().map_err(|e| LagrError::io(path, e))
}

/// Split file in CFQ's layout: indices into the example list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfqSplit {
    #[serde(rename = "trainIdxs")]
    pub train: Vec<usize>,
    #[serde(rename = "devIdxs", default)]
    pub dev: Vec<usize>,
    #[serde(rename = "testIdxs")]
    pub test: Vec<usize>,
}

impl CfqSplit {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LagrError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Tag each example with its part; rejects out-of-range or repeated
    /// indices.
    pub fn apply(&self, examples: &mut [CfqExample]) -> Result<()> {
        let mut seen = vec![false; examples.len()];
        for (name, idxs) in [("train", &self.train), ("dev", &self.dev), ("test", &self.test)] {
            for &i in idxs {
                if i >= examples.len() {
                    return Err(LagrError::invalid(format!(
                        "split index {i} out of range for {} examples",
                        examples.len()
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(LagrError::invalid(format!("example {i} appears in two split parts")));
                }
                examples[i].split = name.to_string();
            }
        }
        Ok(())
    }
}

/// Convert every example, enforcing that its graph fits `layers` slots per
/// token. An example that does not fit is an error, not a silent skip.
pub fn cfq_graphs(examples: &[CfqExample], layers: usize) -> Result<Vec<MrGraph>> {
    examples
        .iter()
        .map(|ex| {
            let g = query_graph(&ex.sparql)
                .map_err(|e| LagrError::invalid(format!("{}: {e}", ex.id)))?;
            let n = ex.tokens.len();
            if g.nodes.len() > n * layers {
                return Err(LagrError::TooManyNodes {
                    nodes: g.nodes.len(),
                    slots: n * layers,
                    n,
                    layers,
                });
            }
            Ok(g)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(q: &str, s: &str) -> CfqExample {
        CfqExample {
            id: "t".into(),
            tokens: q.split_whitespace().map(str::to_string).collect(),
            sparql: s.into(),
            split: String::new(),
        }
    }

    #[test]
    fn jsonl_round_trip_and_split() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        let exs = vec![
            ex("Did M1 marry M2", "SELECT count(*) WHERE { M1 spouse M2 }"),
            ex("Who married M1", "SELECT DISTINCT ?x0 WHERE { ?x0 spouse M1 }"),
            ex("Was M1 an actor", "SELECT count(*) WHERE { M1 a actor }"),
        ];
        write_cfq(&path, &exs).unwrap();
        let mut back = load_cfq(&path).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[1].id, "data:2");
        assert_eq!(back[1].sparql, exs[1].sparql);

        let split_path = dir.path().join("split.json");
        std::fs::write(&split_path, r#"{"trainIdxs": [0, 2], "devIdxs": [], "testIdxs": [1]}"#).unwrap();
        let split = CfqSplit::load(&split_path).unwrap();
        split.apply(&mut back).unwrap();
        assert_eq!(back[1].split, "test");
        assert_eq!(back[2].split, "train");
        let bad = CfqSplit {
            train: vec![0],
            dev: vec![],
            test: vec![0],
        };
        assert!(bad.apply(&mut back).is_err());
    }

    #[test]
    fn query_alias_and_empty_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        std::fs::write(&path, "{\"question\": \"Did M1 marry M2\", \"query\": \"SELECT count(*) WHERE { M1 spouse M2 }\"}\n").unwrap();
        assert_eq!(load_cfq(&path).unwrap().len(), 1);
        std::fs::write(&path, "{\"question\": \"\", \"sparql\": \"SELECT count(*) WHERE { }\"}\n").unwrap();
        assert!(load_cfq(&path).is_err());
    }

    #[test]
    fn slot_budget_is_enforced() {
        let ok = ex(
            "Who married M1 's female German executive producer ?",
            "SELECT DISTINCT ?x0 WHERE { ?x0 a person . ?x0 spouses ?x1 . ?x1 executive_produced M1 . \
             ?x1 gender ns:m.02zsn . ?x1 nationality ns:m.0345h }",
        );
        assert!(cfq_graphs(std::slice::from_ref(&ok), 2).is_ok());
        assert!(matches!(
            cfq_graphs(std::slice::from_ref(&ok), 1),
            Err(LagrError::TooManyNodes { nodes: 10, slots: 9, .. })
        ));
    }
}
