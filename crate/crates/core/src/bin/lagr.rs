use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use lagr::align::AlignmentCache;
use lagr::harness::{
    self, alignment_agreement, convert_file, graph_accuracy_files, infer_alignments, load_checkpoint, save_checkpoint,
    Dataset, DatasetKind, RestartReport, RunConfig, Supervision,
};
use lagr::{LagrError, Result};

#[derive(Parser)]
#[command(name = "lagr", version, about = "Semantic parsing by labeling aligned graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train with the restart policy; writes checkpoint and metrics.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score a checkpoint on a split and write its predictions.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        split: String,
        /// Predictions file; defaults to `predictions_<split>.txt` in the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Strong training from fresh weights on dumped alignments.
    Retrain {
        #[arg(long)]
        alignments: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Convert a dataset file to graph JSON lines.
    Convert {
        #[arg(long, value_parser = parse_kind)]
        dataset: DatasetKind,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Graph accuracy between predicted and gold SPARQL files.
    GraphAcc {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
}

fn parse_kind(s: &str) -> std::result::Result<DatasetKind, String> {
    s.parse().map_err(|e: LagrError| e.to_string())
}

fn print(value: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&value).expect("json values serialize"));
}

fn finish_run(cfg: &RunConfig, data: &Dataset, report: &RestartReport) -> Result<bool> {
    let out = &report.outcome;
    let mut cache = out.cache.clone();
    if cfg.supervision == Supervision::Weak {
        cache = infer_alignments(&out.model, &out.store, data, &cfg.align, &out.cache, out.seed)?;
        if let Some(dir) = &cfg.ckpt_dir {
            let mut final_cfg = cfg.clone();
            final_cfg.seed = out.seed;
            save_checkpoint(dir, &final_cfg, data, &out.store, &cache, out.metrics.last())?;
        }
    }
    let agreement = if cfg.supervision == Supervision::Weak && data.train.iter().any(|p| p.gold.is_some()) {
        Some(alignment_agreement(data, &cache)?)
    } else {
        None
    };
    print(json!({
        "accepted": report.accepted,
        "attempts": report.attempts,
        "seed": out.seed,
        "config_hash": cfg.hash(),
        "dataset_hash": data.content_hash,
        "train_acc": out.train_acc,
        "dev_acc": out.dev_acc,
        "gold_alignment_agreement": agreement,
        "checkpoint": cfg.ckpt_dir,
    }));
    Ok(report.accepted)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train { config } => {
            let cfg = RunConfig::load(&config)?;
            let data = Dataset::load(&cfg)?;
            let report = if cfg.supervision == Supervision::Retrain {
                let path = cfg.alignments.as_deref().expect("validated");
                harness::retrain(&cfg, &data, &AlignmentCache::load(&RunConfig::resolve(path))?)?
            } else {
                harness::train_with_restarts(&cfg, &data)?
            };
            finish_run(&cfg, &data, &report)
        }
        Command::Retrain { alignments, config } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.supervision = Supervision::Retrain;
            cfg.alignments = Some(alignments.clone());
            let data = Dataset::load(&cfg)?;
            let report = harness::retrain(&cfg, &data, &AlignmentCache::load(&alignments)?)?;
            finish_run(&cfg, &data, &report)
        }
        Command::Eval { ckpt, split, out } => {
            let ck = load_checkpoint(&ckpt)?;
            let data = Dataset::load(&ck.config)?;
            ck.check_dataset(&data)?;
            let examples = data.split(&split)?;
            let report = harness::evaluate(&ck.model, &ck.store, &data, examples, ck.config.threads)?;
            let path = out.unwrap_or_else(|| ckpt.join(format!("predictions_{split}.txt")));
            report.write_predictions(&path)?;
            print(json!({
                "split": split,
                "n": report.n,
                "correct": report.correct,
                "accuracy": report.accuracy,
                "per_tag": report.per_tag,
                "seed": ck.report.seed,
                "config_hash": ck.report.config_hash,
                "dataset_hash": data.content_hash,
                "predictions": path,
            }));
            Ok(true)
        }
        Command::Convert { dataset, input, out } => {
            let summary = convert_file(dataset, &RunConfig::resolve(&input), &out)?;
            print(json!({ "written": summary.written, "failed": summary.failed, "out": out }));
            Ok(summary.failed == 0)
        }
        Command::GraphAcc { pred, gold } => {
            let (hits, total) = graph_accuracy_files(&pred, Path::new(&gold))?;
            let acc = if total == 0 { 0.0 } else { hits as f64 / total as f64 };
            print(json!({ "correct": hits, "total": total, "graph_accuracy": acc }));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
