//! Checkpoint directories: parameters, vocabularies, the run config, the
//! alignment cache and a small report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::data::Dataset;
use super::train::MetricRecord;
use crate::align::AlignmentCache;
use crate::encoder::Vocab;
use crate::error::{LagrError, Result};
use crate::graph::{GraphVocab, LabelVocab};
use crate::model::{Lagr, ModelConfig};
use crate::rng::seeded;
use crate::tensor::{load_params, save_params, ParamStore};

const PARAMS_DIR: &str = "params";
const VOCAB_FILE: &str = "vocab.txt";
const NODES_FILE: &str = "node_labels.txt";
const EDGES_FILE: &str = "edge_labels.txt";
const CONFIG_FILE: &str = "config.txt";
const LAYERS_FILE: &str = "layers.txt";
pub const ALIGNMENTS_FILE: &str = "alignments.jsonl";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointReport {
    pub seed: u64,
    pub config_hash: String,
    pub dataset_hash: String,
    pub step: Option<usize>,
    pub train_acc: Option<f64>,
    pub dev_acc: Option<f64>,
}

pub fn save_checkpoint(
    dir: &Path,
    cfg: &RunConfig,
    data: &Dataset,
    store: &ParamStore,
    cache: &AlignmentCache,
    last: Option<&MetricRecord>,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| LagrError::io(dir, e))?;
    save_params(&dir.join(PARAMS_DIR), store)?;
    data.vocab.save(&dir.join(VOCAB_FILE))?;
    data.graph_vocab.nodes.save(&dir.join(NODES_FILE))?;
    data.graph_vocab.edges.save(&dir.join(EDGES_FILE))?;
    let write = |name: &str, text: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| LagrError::io(&p, e))
    };
    write(CONFIG_FILE, cfg.to_text())?;
    write(LAYERS_FILE, format!("{}\n", data.layers))?;
    cache.save(&dir.join(ALIGNMENTS_FILE))?;
    let report = CheckpointReport {
        seed: cfg.seed,
        config_hash: cfg.hash(),
        dataset_hash: data.content_hash.clone(),
        step: last.map(|r| r.step),
        train_acc: last.map(|r| r.train_acc),
        dev_acc: last.and_then(|r| r.dev_acc),
    };
    write(REPORT_FILE, serde_json::to_string_pretty(&report)? + "\n")
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub vocab: Vocab,
    pub graph_vocab: GraphVocab,
    pub layers: usize,
    pub store: ParamStore,
    pub model: Lagr,
    pub cache: AlignmentCache,
    pub report: CheckpointReport,
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let config = RunConfig::load(&dir.join(CONFIG_FILE))?;
    let vocab = Vocab::load(&dir.join(VOCAB_FILE))?;
    let graph_vocab = GraphVocab {
        nodes: LabelVocab::load(&dir.join(NODES_FILE))?,
        edges: LabelVocab::load(&dir.join(EDGES_FILE))?,
    };
    let layers_path = dir.join(LAYERS_FILE);
    let layers: usize = std::fs::read_to_string(&layers_path)
        .map_err(|e| LagrError::io(&layers_path, e))?
        .trim()
        .parse()
        .map_err(|_| LagrError::Checkpoint("layers.txt is not a number".into()))?;
    let saved = load_params(&dir.join(PARAMS_DIR))?;
    let mut store = ParamStore::new();
    let model = Lagr::new(
        &mut store,
        ModelConfig {
            encoder: config.encoder.clone(),
            layers,
            tokens: vocab.len(),
            node_labels: graph_vocab.nodes.len(),
            edge_labels: graph_vocab.edges.len(),
        },
        &mut seeded(0),
    )?;
    if saved.len() != store.len() {
        return Err(LagrError::Checkpoint(format!(
            "archive holds {} parameters, the model has {}",
            saved.len(),
            store.len()
        )));
    }
    store
        .copy_values_from(&saved)
        .map_err(|e| LagrError::Checkpoint(format!("parameters do not match the vocabularies: {e}")))?;
    let align_path = dir.join(ALIGNMENTS_FILE);
    let cache = if align_path.exists() {
        AlignmentCache::load(&align_path)?
    } else {
        AlignmentCache::new()
    };
    let report_path = dir.join(REPORT_FILE);
    let report_text = std::fs::read_to_string(&report_path).map_err(|e| LagrError::io(&report_path, e))?;
    Ok(Checkpoint {
        config,
        vocab,
        graph_vocab,
        layers,
        store,
        model,
        cache,
        report: serde_json::from_str(&report_text)?,
    })
}

impl Checkpoint {
    /// Reject a dataset whose vocabularies differ from the checkpoint's.
    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.vocab != self.vocab {
            return Err(LagrError::Checkpoint("token vocabulary differs from the checkpoint".into()));
        }
        if data.graph_vocab != self.graph_vocab {
            return Err(LagrError::Checkpoint("label vocabularies differ from the checkpoint".into()));
        }
        if data.layers != self.layers {
            return Err(LagrError::Checkpoint(format!(
                "dataset uses {} layers, the checkpoint {}",
                data.layers, self.layers
            )));
        }
        Ok(())
    }
}
