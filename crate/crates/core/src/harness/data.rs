//! Examples prepared for training and evaluation: token ids, targets, and
//! the reference each prediction is scored against.

use std::path::Path;

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use super::config::{hex, DatasetKind, RunConfig};
use crate::align::AlignmentCache;
use crate::cfq::{self, CfqExample, CfqSplit};
use crate::cogs::{self, CogsExample};
use crate::encoder::Vocab;
use crate::error::{LagrError, Result};
use crate::graph::{pad_to_slots, AlignedGraph, GraphVocab, MrGraph, UnalignedTarget};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// Normalized COGS logical form; scored by exact string match.
    Lf(String),
    /// CFQ query graph; scored by isomorphism.
    Graph(MrGraph),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub id: String,
    /// Generalization case or split part.
    pub tag: String,
    pub tokens: Vec<String>,
    pub ids: Vec<usize>,
    /// Gold aligned graph; COGS only.
    pub gold: Option<AlignedGraph>,
    /// Target with the alignment withheld. `None` when a label is outside
    /// the training vocabulary.
    pub target: Option<UnalignedTarget>,
    pub reference: Reference,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub layers: usize,
    pub vocab: Vocab,
    pub graph_vocab: GraphVocab,
    pub train: Vec<Prepared>,
    pub dev: Vec<Prepared>,
    pub test: Vec<Prepared>,
    /// sha256 over the source examples, for reports.
    pub content_hash: String,
}

fn hash_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for l in lines {
        h.update(l.as_bytes());
        h.update(b"\n");
    }
    hex(&h.finalize())
}

fn prepare_cogs(
    ex: &CogsExample,
    vocab: &Vocab,
    gv: &GraphVocab,
    layers: usize,
    graph: Option<&MrGraph>,
) -> Result<Prepared> {
    let lf = cogs::parse_lf(&ex.lf).map_err(|e| LagrError::invalid(format!("{}: {e}", ex.id)))?;
    let graph = match graph {
        Some(g) => Some(g.clone()),
        None => cogs::lf_to_graph(&lf, &ex.tokens).ok(),
    };
    let gold = graph
        .as_ref()
        .and_then(|g| crate::graph::to_aligned(g, gv, ex.tokens.len(), layers).ok());
    let target = graph
        .as_ref()
        .and_then(|g| pad_to_slots(g, gv, ex.tokens.len(), layers).ok());
    Ok(Prepared {
        id: ex.id.clone(),
        tag: ex.tag.clone(),
        tokens: ex.tokens.clone(),
        ids: ex.tokens.iter().map(|t| vocab.id(t)).collect(),
        gold,
        target,
        reference: Reference::Lf(cogs::normalize(&ex.lf)),
    })
}

fn prepare_cfq(ex: &CfqExample, vocab: &Vocab, gv: &GraphVocab, layers: usize, graph: MrGraph) -> Prepared {
    let target = pad_to_slots(&graph, gv, ex.tokens.len(), layers).ok();
    Prepared {
        id: ex.id.clone(),
        tag: ex.split.clone(),
        tokens: ex.tokens.clone(),
        ids: ex.tokens.iter().map(|t| vocab.id(t)).collect(),
        gold: None,
        target,
        reference: Reference::Graph(graph),
    }
}

impl Dataset {
    /// COGS with one graph layer. Every training example must convert;
    /// evaluation examples only need a parseable logical form.
    pub fn cogs(train: &[CogsExample], dev: &[CogsExample], test: &[CogsExample]) -> Result<Self> {
        Self::cogs_with_layers(train, dev, test, 1)
    }

    pub fn cogs_with_layers(
        train: &[CogsExample],
        dev: &[CogsExample],
        test: &[CogsExample],
        layers: usize,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(LagrError::invalid("empty training set"));
        }
        let mut graphs = Vec::with_capacity(train.len());
        for ex in train {
            let lf = cogs::parse_lf(&ex.lf).map_err(|e| LagrError::invalid(format!("{}: {e}", ex.id)))?;
            let g = cogs::lf_to_graph(&lf, &ex.tokens).map_err(|e| LagrError::invalid(format!("{}: {e}", ex.id)))?;
            graphs.push(g);
        }
        let vocab = Vocab::build(train.iter().map(|e| e.sentence()));
        let gv = GraphVocab::from_graphs(&graphs);
        let mut prepared = Vec::with_capacity(train.len());
        for (ex, g) in train.iter().zip(&graphs) {
            let p = prepare_cogs(ex, &vocab, &gv, layers, Some(g))?;
            if p.gold.is_none() || p.target.is_none() {
                return Err(LagrError::invalid(format!("{}: graph does not fit {layers} layer(s)", ex.id)));
            }
            prepared.push(p);
        }
        let eval = |xs: &[CogsExample]| -> Result<Vec<Prepared>> {
            xs.iter().map(|ex| prepare_cogs(ex, &vocab, &gv, layers, None)).collect()
        };
        let content_hash = hash_lines(train.iter().chain(dev).chain(test).flat_map(|e| {
            [e.id.as_str(), e.lf.as_str(), e.tag.as_str()]
                .into_iter()
                .chain(e.tokens.iter().map(String::as_str))
        }));
        let dev = eval(dev)?;
        let test = eval(test)?;
        Ok(Dataset {
            kind: DatasetKind::Cogs,
            layers,
            vocab,
            graph_vocab: gv,
            train: prepared,
            dev,
            test,
            content_hash,
        })
    }

    /// CFQ with two graph layers by default.
    pub fn cfq(train: &[CfqExample], dev: &[CfqExample], test: &[CfqExample], layers: usize) -> Result<Self> {
        if train.is_empty() {
            return Err(LagrError::invalid("empty training set"));
        }
        let graphs = cfq::cfq_graphs(train, layers)?;
        let vocab = Vocab::build(train.iter().map(|e| e.question()));
        let gv = GraphVocab::from_graphs(&graphs);
        let train_p: Vec<Prepared> = train
            .iter()
            .zip(graphs)
            .map(|(ex, g)| prepare_cfq(ex, &vocab, &gv, layers, g))
            .collect();
        let eval = |xs: &[CfqExample]| -> Result<Vec<Prepared>> {
            xs.iter()
                .map(|ex| {
                    let g = cfq::query_graph(&ex.sparql).map_err(|e| LagrError::invalid(format!("{}: {e}", ex.id)))?;
                    Ok(prepare_cfq(ex, &vocab, &gv, layers, g))
                })
                .collect()
        };
        let content_hash = hash_lines(train.iter().chain(dev).chain(test).flat_map(|e| {
            [e.id.as_str(), e.sparql.as_str()]
                .into_iter()
                .chain(e.tokens.iter().map(String::as_str))
        }));
        let dev = eval(dev)?;
        let test = eval(test)?;
        Ok(Dataset {
            kind: DatasetKind::Cfq,
            layers,
            vocab,
            graph_vocab: gv,
            train: train_p,
            dev,
            test,
            content_hash,
        })
    }

    /// Load the files named in `cfg`. Relative paths resolve against
    /// `LAGR_DATA_DIR`.
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let train_path = cfg
            .train_path
            .as_ref()
            .map(|p| RunConfig::resolve(p))
            .ok_or_else(|| LagrError::Config("`train` path is required".into()))?;
        let opt = |p: &Option<std::path::PathBuf>| p.as_ref().map(|p| RunConfig::resolve(p));
        let mut hash = Sha256::new();
        let mut read_hash = |path: &Path| -> Result<()> {
            let bytes = std::fs::read(path).map_err(|e| LagrError::io(path, e))?;
            hash.update(&bytes);
            Ok(())
        };
        let mut data = match cfg.dataset {
            DatasetKind::Cogs => {
                let load = |p: Option<std::path::PathBuf>| -> Result<Vec<CogsExample>> {
                    match p {
                        Some(p) => {
                            let (ex, skipped) = cogs::load_cogs(&p)?;
                            if skipped > 0 {
                                log::warn!("{}: skipped {skipped} malformed line(s)", p.display());
                            }
                            Ok(ex)
                        }
                        None => Ok(Vec::new()),
                    }
                };
                read_hash(&train_path)?;
                for p in [opt(&cfg.dev_path), opt(&cfg.test_path)].into_iter().flatten() {
                    read_hash(&p)?;
                }
                let train = load(Some(train_path))?;
                Self::cogs_with_layers(&train, &load(opt(&cfg.dev_path))?, &load(opt(&cfg.test_path))?, cfg.layers)?
            }
            DatasetKind::Cfq => {
                read_hash(&train_path)?;
                let (train, dev, test) = if let Some(split) = opt(&cfg.split_file) {
                    read_hash(&split)?;
                    let mut all = cfq::load_cfq(&train_path)?;
                    CfqSplit::load(&split)?.apply(&mut all)?;
                    let part = |name: &str| all.iter().filter(|e| e.split == name).cloned().collect::<Vec<_>>();
                    (part("train"), part("dev"), part("test"))
                } else {
                    let load = |p: Option<std::path::PathBuf>| -> Result<Vec<CfqExample>> {
                        p.map_or(Ok(Vec::new()), |p| cfq::load_cfq(&p))
                    };
                    for p in [opt(&cfg.dev_path), opt(&cfg.test_path)].into_iter().flatten() {
                        read_hash(&p)?;
                    }
                    (
                        cfq::load_cfq(&train_path)?,
                        load(opt(&cfg.dev_path))?,
                        load(opt(&cfg.test_path))?,
                    )
                };
                Self::cfq(&train, &dev, &test, cfg.layers)?
            }
        };
        data.content_hash = hex(&hash.finalize());
        Ok(data)
    }

    pub fn split(&self, name: &str) -> Result<&[Prepared]> {
        match name {
            "train" => Ok(&self.train),
            "dev" => Ok(&self.dev),
            "test" | "gen" => Ok(&self.test),
            other => Err(LagrError::Config(format!("unknown split `{other}` (train, dev, test)"))),
        }
    }

    /// Replace gold alignments with dumped ones: each training target is
    /// aligned by its entry in `cache`. A missing entry is an error.
    pub fn with_alignments(&self, cache: &AlignmentCache) -> Result<Dataset> {
        if cache.is_empty() {
            return Err(LagrError::invalid("alignment dump is empty"));
        }
        let mut out = self.clone();
        for p in &mut out.train {
            let target = p
                .target
                .as_ref()
                .ok_or_else(|| LagrError::invalid(format!("{}: no target", p.id)))?;
            let al = cache
                .get(&p.id)
                .ok_or_else(|| LagrError::invalid(format!("no alignment for `{}`", p.id)))?;
            p.gold = Some(target.align(&al.a)?);
        }
        Ok(out)
    }
}

/// Uniform sample of `n` examples without replacement, and the rest, both
/// in their original order.
pub fn sample_gen_dev<T: Clone>(split: &[T], n: usize, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if n > split.len() {
        return Err(LagrError::invalid(format!(
            "cannot sample {n} examples from a split of {}",
            split.len()
        )));
    }
    let mut idx: Vec<usize> = (0..split.len()).collect();
    idx.shuffle(&mut seeded(seed));
    let mut chosen = vec![false; split.len()];
    for &i in &idx[..n] {
        chosen[i] = true;
    }
    let mut sample = Vec::with_capacity(n);
    let mut rest = Vec::with_capacity(split.len() - n);
    for (x, c) in split.iter().zip(chosen) {
        if c {
            sample.push(x.clone());
        } else {
            rest.push(x.clone());
        }
    }
    Ok((sample, rest))
}
