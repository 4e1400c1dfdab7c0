//! Orchestration: configuration, data preparation, training loops,
//! evaluation and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod convert;
pub mod data;
pub mod eval;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointReport};
pub use config::{DatasetKind, RunConfig, Supervision};
pub use convert::{convert_file, ConvertSummary};
pub use data::{sample_gen_dev, Dataset, Prepared, Reference};
pub use eval::{evaluate, graph_accuracy_files, EvalReport, TagScore};
pub use train::{
    alignment_agreement, build_model, infer_alignments, restart_decision, retrain, train, train_with_restarts,
    Decision, MetricRecord, RestartReport, TrainOutcome,
};
