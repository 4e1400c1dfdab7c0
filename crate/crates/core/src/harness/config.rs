//! Run configuration as a flat `key = value` file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::align::AlignmentConfig;
use crate::encoder::{EncoderConfig, EncoderMode};
use crate::error::{LagrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Cogs,
    Cfq,
}

impl FromStr for DatasetKind {
    type Err = LagrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cogs" => Ok(DatasetKind::Cogs),
            "cfq" => Ok(DatasetKind::Cfq),
            other => Err(LagrError::Config(format!("unknown dataset `{other}` (cogs or cfq)"))),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Cogs => "cogs",
            DatasetKind::Cfq => "cfq",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Supervision {
    /// Gold aligned graphs.
    Strong,
    /// Alignments inferred during training.
    Weak,
    /// Strong training on alignments dumped by a weak run.
    Retrain,
}

impl FromStr for Supervision {
    type Err = LagrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strong" => Ok(Supervision::Strong),
            "weak" => Ok(Supervision::Weak),
            "retrain" => Ok(Supervision::Retrain),
            other => Err(LagrError::Config(format!("unknown supervision `{other}`"))),
        }
    }
}

impl fmt::Display for Supervision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Supervision::Strong => "strong",
            Supervision::Weak => "weak",
            Supervision::Retrain => "retrain",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetKind,
    /// Name of the split, recorded in reports (`mcd1`, `random`, ...).
    pub split: String,
    pub train_path: Option<PathBuf>,
    pub dev_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    /// CFQ split index file; with it, `train_path` holds the whole corpus.
    pub split_file: Option<PathBuf>,
    pub supervision: Supervision,
    pub alignments: Option<PathBuf>,
    pub encoder: EncoderConfig,
    /// Graph layers per token.
    pub layers: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub warmup: usize,
    pub train_steps: usize,
    pub clip: f64,
    pub align: AlignmentConfig,
    pub seed: u64,
    pub restart_threshold: f64,
    pub max_restarts: usize,
    pub eval_every: usize,
    /// Cap on training examples scored at each eval point; 0 means all.
    pub eval_train_max: usize,
    pub ckpt_dir: Option<PathBuf>,
    pub metrics_path: Option<PathBuf>,
    /// Worker threads for per-example gradients; 0 means all cores.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetKind::Cogs,
            split: "default".into(),
            train_path: None,
            dev_path: None,
            test_path: None,
            split_file: None,
            supervision: Supervision::Strong,
            alignments: None,
            encoder: EncoderConfig::default(),
            layers: 1,
            batch_size: 128,
            lr: 1e-4,
            warmup: 0,
            train_steps: 70_000,
            clip: 1.0,
            align: AlignmentConfig::default(),
            seed: 0,
            restart_threshold: 0.95,
            max_restarts: 3,
            eval_every: 1000,
            eval_train_max: 0,
            ckpt_dir: None,
            metrics_path: None,
            threads: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| LagrError::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(LagrError::Config(format!("`{key}`: expected true or false, found `{value}`"))),
    }
}

impl RunConfig {
    /// Defaults for a dataset: one layer and a 0.95 restart threshold for
    /// COGS, two layers and 0.995 for CFQ.
    pub fn for_dataset(dataset: DatasetKind) -> Self {
        let mut c = RunConfig {
            dataset,
            ..Default::default()
        };
        if dataset == DatasetKind::Cfq {
            c.layers = 2;
            c.restart_threshold = 0.995;
        }
        c
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || Some(PathBuf::from(value));
        match key {
            "dataset" => self.dataset = value.parse()?,
            "split" => self.split = value.to_string(),
            "train" => self.train_path = path(),
            "dev" => self.dev_path = path(),
            "test" => self.test_path = path(),
            "split_file" => self.split_file = path(),
            "supervision" => self.supervision = value.parse()?,
            "alignments" => self.alignments = path(),
            "d" => self.encoder.d = parse(key, value)?,
            "encoder_layers" => self.encoder.layers = parse(key, value)?,
            "heads" => self.encoder.heads = parse(key, value)?,
            "ff" => self.encoder.ff = parse(key, value)?,
            "dropout" => self.encoder.dropout = parse(key, value)?,
            "encoder_mode" => self.encoder.mode = value.parse::<EncoderMode>()?,
            "max_len" => self.encoder.max_len = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "warmup" => self.warmup = parse(key, value)?,
            "train_steps" => self.train_steps = parse(key, value)?,
            "clip" => self.clip = parse(key, value)?,
            "k" => self.align.k = parse(key, value)?,
            "sigma" => self.align.sigma = parse(key, value)?,
            "cache" => self.align.cache_enabled = parse_bool(key, value)?,
            "include_noiseless" => self.align.include_noiseless = parse_bool(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "restart_threshold" => self.restart_threshold = parse(key, value)?,
            "max_restarts" => self.max_restarts = parse(key, value)?,
            "eval_every" => self.eval_every = parse(key, value)?,
            "eval_train_max" => self.eval_train_max = parse(key, value)?,
            "ckpt_dir" => self.ckpt_dir = path(),
            "metrics" => self.metrics_path = path(),
            "threads" => self.threads = parse(key, value)?,
            other => return Err(LagrError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parse `key = value` lines; `#` starts a comment. Defaults follow
    /// the `dataset` key wherever it appears.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut dataset = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| LagrError::Config(format!("line {}: expected `key = value`", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "dataset" {
                if dataset.is_some() {
                    return Err(LagrError::Config("`dataset` given twice".into()));
                }
                dataset = Some(value.parse::<DatasetKind>()?);
            }
            pairs.push((no + 1, key, value));
        }
        let mut cfg = RunConfig::for_dataset(dataset.unwrap_or(DatasetKind::Cogs));
        for (no, key, value) in pairs {
            cfg.set(key, value)
                .map_err(|e| LagrError::Config(format!("line {no}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LagrError::io(path, e))?;
        Self::parse_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.align.validate()?;
        if self.layers == 0 {
            return Err(LagrError::Config("layers must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(LagrError::Config("batch_size must be positive".into()));
        }
        if !(self.restart_threshold > 0.0 && self.restart_threshold <= 1.0) {
            return Err(LagrError::Config(format!(
                "restart_threshold {} must lie in (0, 1]",
                self.restart_threshold
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(LagrError::Config("lr must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(LagrError::Config("eval_every must be positive".into()));
        }
        if self.supervision == Supervision::Retrain && self.alignments.is_none() {
            return Err(LagrError::Config("retraining needs `alignments`".into()));
        }
        Ok(())
    }

    /// Resolve a configured path against `LAGR_DATA_DIR` when relative.
    pub fn resolve(path: &Path) -> PathBuf {
        if path.is_absolute() {
            return path.to_path_buf();
        }
        match std::env::var_os("LAGR_DATA_DIR") {
            Some(root) if !path.exists() => PathBuf::from(root).join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Canonical text: every field, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        let p = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        put("dataset", self.dataset.to_string());
        put("split", self.split.clone());
        for (k, v) in [
            ("train", &self.train_path),
            ("dev", &self.dev_path),
            ("test", &self.test_path),
            ("split_file", &self.split_file),
            ("alignments", &self.alignments),
            ("ckpt_dir", &self.ckpt_dir),
            ("metrics", &self.metrics_path),
        ] {
            if let Some(v) = p(v) {
                put(k, v);
            }
        }
        put("supervision", self.supervision.to_string());
        put("d", self.encoder.d.to_string());
        put("encoder_layers", self.encoder.layers.to_string());
        put("heads", self.encoder.heads.to_string());
        put("ff", self.encoder.ff.to_string());
        put("dropout", self.encoder.dropout.to_string());
        put("encoder_mode", self.encoder.mode.to_string());
        put("max_len", self.encoder.max_len.to_string());
        put("layers", self.layers.to_string());
        put("batch_size", self.batch_size.to_string());
        put("lr", self.lr.to_string());
        put("warmup", self.warmup.to_string());
        put("train_steps", self.train_steps.to_string());
        put("clip", self.clip.to_string());
        put("k", self.align.k.to_string());
        put("sigma", self.align.sigma.to_string());
        put("cache", self.align.cache_enabled.to_string());
        put("include_noiseless", self.align.include_noiseless.to_string());
        put("seed", self.seed.to_string());
        put("restart_threshold", self.restart_threshold.to_string());
        put("max_restarts", self.max_restarts.to_string());
        put("eval_every", self.eval_every.to_string());
        put("eval_train_max", self.eval_train_max.to_string());
        put("threads", self.threads.to_string());
        out
    }

    /// sha256 of the canonical text with the seed and output paths left
    /// out, so restarts of one configuration share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        c.ckpt_dir = None;
        c.metrics_path = None;
        hex(&Sha256::digest(c.to_text().as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "# toy run\ndataset = cfq\nsupervision = weak\nd = 64\nheads = 4\nk = 5\nsigma = 0.5\ncache = false\nseed = 7\n";
        let cfg = RunConfig::parse_text(text).unwrap();
        assert_eq!(cfg.dataset, DatasetKind::Cfq);
        assert_eq!(cfg.layers, 2);
        assert_eq!(cfg.restart_threshold, 0.995);
        assert_eq!(cfg.align.k, 5);
        assert!(!cfg.align.cache_enabled);
        let again = RunConfig::parse_text(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn explicit_layers_survive_dataset_order() {
        let cfg = RunConfig::parse_text("layers = 3\ndataset = cfq\n").unwrap();
        assert_eq!(cfg.layers, 3);
        assert_eq!(cfg.restart_threshold, 0.995);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::parse_text("k = 0").is_err());
        assert!(RunConfig::parse_text("restart_threshold = 0").is_err());
        assert!(RunConfig::parse_text("restart_threshold = 1.5").is_err());
        assert!(RunConfig::parse_text("nonsense = 1").is_err());
        assert!(RunConfig::parse_text("d").is_err());
        assert!(RunConfig::parse_text("supervision = retrain").is_err());
        assert!(RunConfig::parse_text("dataset = cogs\ndataset = cfq").is_err());
    }

    #[test]
    fn hash_ignores_seed_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.seed = 5;
        assert_eq!(a.hash(), b.hash());
        b.lr = 2e-4;
        assert_ne!(a.hash(), b.hash());
    }
}
