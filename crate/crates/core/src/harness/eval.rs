//! Scoring: exact match of serialized logical forms for COGS, graph
//! isomorphism for CFQ.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::data::{Dataset, Prepared, Reference};
use super::train::resolve_threads;
use crate::cfq::{graph_isomorphic, graph_to_sparql};
use crate::cogs::serialize_lf;
use crate::error::{LagrError, Result};
use crate::graph::{strip_nulls, GraphVocab, MrGraph};
use crate::model::Lagr;
use crate::tensor::ParamStore;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TagScore {
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Breakdown by generalization case (COGS) or split part (CFQ).
    pub per_tag: BTreeMap<String, TagScore>,
    #[serde(skip)]
    pub predictions: Vec<String>,
    #[serde(skip)]
    pub hits: Vec<bool>,
}

impl EvalReport {
    pub fn write_predictions(&self, path: &Path) -> Result<()> {
        let mut text = self.predictions.join("\n");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| LagrError::io(path, e))
    }
}

/// Text of a predicted graph: a logical form for COGS, canonical SPARQL
/// for CFQ. COGS graphs that cannot be serialized yield an error marker.
pub fn render(graph: &MrGraph, reference: &Reference) -> String {
    match reference {
        Reference::Lf(_) => serialize_lf(graph).unwrap_or_else(|e| format!("<unserializable: {e}>")),
        Reference::Graph(_) => graph_to_sparql(graph),
    }
}

/// Score one decoded graph against its reference.
pub fn score(graph: &MrGraph, reference: &Reference) -> (bool, String) {
    let text = render(graph, reference);
    let hit = match reference {
        Reference::Lf(gold) => &text == gold,
        Reference::Graph(gold) => graph_isomorphic(graph, gold),
    };
    (hit, text)
}

fn predict_one(model: &Lagr, store: &ParamStore, gv: &GraphVocab, p: &Prepared) -> (bool, String) {
    match model.predict(store, &p.ids) {
        Ok(aligned) => score(&strip_nulls(&aligned, gv).graph, &p.reference),
        Err(e) => (false, format!("<error: {e}>")),
    }
}

/// Decode every example with the argmax labels and score it.
pub fn evaluate(model: &Lagr, store: &ParamStore, data: &Dataset, examples: &[Prepared], threads: usize) -> Result<EvalReport> {
    let gv = &data.graph_vocab;
    let workers = resolve_threads(threads).min(examples.len()).max(1);
    let results: Vec<(bool, String)> = if workers == 1 {
        examples.iter().map(|p| predict_one(model, store, gv, p)).collect()
    } else {
        let chunk = examples.len().div_ceil(workers);
        std::thread::scope(|s| {
            let handles: Vec<_> = examples
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(|p| predict_one(model, store, gv, p)).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("evaluation worker panicked"))
                .collect()
        })
    };
    let mut per_tag: BTreeMap<String, TagScore> = BTreeMap::new();
    let mut correct = 0;
    for (p, (hit, _)) in examples.iter().zip(&results) {
        let t = per_tag.entry(p.tag.clone()).or_default();
        t.total += 1;
        if *hit {
            t.correct += 1;
            correct += 1;
        }
    }
    let n = examples.len();
    let (hits, predictions) = results.into_iter().unzip();
    Ok(EvalReport {
        n,
        correct,
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        per_tag,
        predictions,
        hits,
    })
}

/// Graph accuracy between two files of SPARQL queries, one per line.
pub fn graph_accuracy_files(pred: &Path, gold: &Path) -> Result<(usize, usize)> {
    let read = |p: &Path| -> Result<Vec<String>> {
        let text = std::fs::read_to_string(p).map_err(|e| LagrError::io(p, e))?;
        Ok(text.lines().map(str::to_string).collect())
    };
    let (pred, gold) = (read(pred)?, read(gold)?);
    if pred.len() != gold.len() {
        return Err(LagrError::invalid(format!(
            "{} predictions for {} gold queries",
            pred.len(),
            gold.len()
        )));
    }
    let mut hits = 0;
    for (i, (p, g)) in pred.iter().zip(&gold).enumerate() {
        let g = crate::cfq::query_graph(g).map_err(|e| LagrError::invalid(format!("gold line {}: {e}", i + 1)))?;
        match crate::cfq::query_graph(p) {
            Ok(p) if graph_isomorphic(&p, &g) => hits += 1,
            Ok(_) => {}
            Err(e) => log::warn!("prediction line {} does not parse: {e}", i + 1),
        }
    }
    Ok((hits, gold.len()))
}
