//! Training loops for strong, weak and retrain supervision, plus the
//! restart policy.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::Serialize;

use super::checkpoint::save_checkpoint;
use super::config::{RunConfig, Supervision};
use super::data::{Dataset, Prepared};
use super::eval::evaluate;
use crate::align::{candidate_alignments, select_map_alignment, Alignment, AlignmentCache, AlignmentConfig};
use crate::encoder::Forward;
use crate::error::{LagrError, Result};
use crate::model::{Lagr, ModelConfig};
use crate::rng::{seeded, stream, Stream};
use crate::tensor::{grad_clip, AdamConfig, AdamState, Gradients, LrSchedule, ParamStore, Tape};

/// Untrained model for `data` under `cfg`, initialized from `seed`.
pub fn build_model(cfg: &RunConfig, data: &Dataset, seed: u64) -> Result<(ParamStore, Lagr)> {
    let mut store = ParamStore::new();
    let config = ModelConfig {
        encoder: cfg.encoder.clone(),
        layers: data.layers,
        tokens: data.vocab.len(),
        node_labels: data.graph_vocab.nodes.len(),
        edge_labels: data.graph_vocab.edges.len(),
    };
    let model = Lagr::new(&mut store, config, &mut stream(seed, Stream::Init))?;
    Ok((store, model))
}

/// Summed parameter gradients over several backward passes.
pub(crate) struct GradSum {
    bufs: Vec<Option<Vec<f32>>>,
}

impl GradSum {
    pub(crate) fn new(params: usize) -> Self {
        GradSum {
            bufs: vec![None; params],
        }
    }

    fn add(&mut self, store: &ParamStore, grads: &Gradients<f32>) {
        for (id, g) in grads.params() {
            let buf = self.bufs[id.index()].get_or_insert_with(|| vec![0.0; store.get(id).tensor.numel()]);
            for (b, &x) in buf.iter_mut().zip(g) {
                *b += x;
            }
        }
    }

    fn merge(&mut self, other: GradSum) {
        for (mine, theirs) in self.bufs.iter_mut().zip(other.bufs) {
            match (mine.as_mut(), theirs) {
                (Some(a), Some(b)) => a.iter_mut().zip(&b).for_each(|(x, y)| *x += y),
                (None, Some(b)) => *mine = Some(b),
                _ => {}
            }
        }
    }

    /// Write `scale * sum` into the store's gradient buffers.
    fn install(self, store: &mut ParamStore, scale: f32) {
        store.zero_grad();
        for (p, buf) in store.iter_mut().zip(self.bufs) {
            if let Some(mut b) = buf {
                b.iter_mut().for_each(|x| *x *= scale);
                p.tensor.grad = Some(b);
            }
        }
    }
}

/// Outcome of the weak-supervision E-step for one example.
#[derive(Debug, Clone)]
pub struct Selected {
    pub alignment: Alignment,
    /// Whether the cached alignment beat every fresh candidate.
    pub from_cache: bool,
}

struct Job<'a> {
    index: usize,
    example: &'a Prepared,
    cached: Option<Vec<usize>>,
    dropout_seed: u64,
    noise_seed: u64,
}

struct JobOut {
    index: usize,
    loss: f64,
    selected: Option<Selected>,
}

fn run_job(
    model: &Lagr,
    store: &ParamStore,
    job: &Job<'_>,
    weak: Option<&AlignmentConfig>,
    acc: &mut GradSum,
) -> Result<JobOut> {
    let p = job.example;
    let mut tape = Tape::<f32>::new(store);
    let mut drop_rng = seeded(job.dropout_seed);
    let out = model.forward(&mut tape, &p.ids, &mut Forward::train(&mut drop_rng))?;
    let (target, selected) = match weak {
        None => {
            let gold = p
                .gold
                .clone()
                .ok_or_else(|| LagrError::invalid(format!("{}: strong supervision needs a gold alignment", p.id)))?;
            (gold, None)
        }
        Some(acfg) => {
            let unaligned = p
                .target
                .as_ref()
                .ok_or_else(|| LagrError::invalid(format!("{}: no target", p.id)))?;
            let lp = out.log_probs(&tape);
            let mut noise = seeded(job.noise_seed);
            let cands = candidate_alignments(&lp, unaligned, acfg, &mut noise)?;
            let cached = if acfg.cache_enabled { job.cached.as_deref() } else { None };
            let sel = select_map_alignment(&cands, cached, unaligned, &lp)?;
            let aligned = unaligned.align(&sel.alignment.a)?;
            (
                aligned,
                Some(Selected {
                    from_cache: sel.index.is_none(),
                    alignment: sel.alignment,
                }),
            )
        }
    };
    let loss = out.loss(&mut tape, &target)?;
    let value = tape.scalar(loss) as f64;
    let grads = tape.backward(loss)?;
    acc.add(store, &grads);
    Ok(JobOut {
        index: job.index,
        loss: value,
        selected,
    })
}

pub(crate) fn resolve_threads(threads: usize) -> usize {
    if threads > 0 {
        return threads;
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Run `jobs` across `threads` workers; returns the summed gradients and
/// per-job results in job order.
fn run_batch(
    model: &Lagr,
    store: &ParamStore,
    jobs: &[Job<'_>],
    weak: Option<&AlignmentConfig>,
    threads: usize,
) -> Result<(GradSum, Vec<JobOut>)> {
    let workers = threads.min(jobs.len()).max(1);
    if workers == 1 {
        let mut acc = GradSum::new(store.len());
        let outs = jobs
            .iter()
            .map(|j| run_job(model, store, j, weak, &mut acc))
            .collect::<Result<Vec<_>>>()?;
        return Ok((acc, outs));
    }
    let chunk = jobs.len().div_ceil(workers);
    let parts: Vec<Result<(GradSum, Vec<JobOut>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    let mut acc = GradSum::new(store.len());
                    let outs = part
                        .iter()
                        .map(|j| run_job(model, store, j, weak, &mut acc))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((acc, outs))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut total = GradSum::new(store.len());
    let mut outs = Vec::with_capacity(jobs.len());
    for part in parts {
        let (acc, o) = part?;
        total.merge(acc);
        outs.extend(o);
    }
    Ok((total, outs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub step: usize,
    pub train_acc: f64,
    pub dev_acc: Option<f64>,
    /// Mean per-example loss over the steps since the previous record.
    pub loss: f64,
    pub lr: f64,
    /// Mean joint log-likelihood of the selected alignments since the
    /// previous record.
    pub mean_j: Option<f64>,
    /// Share of selections since the previous record won by the cache.
    pub cache_wins: Option<f64>,
    /// Share of examples whose alignment changed during the last full epoch.
    pub changed_frac: Option<f64>,
    pub wall_secs: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub seed: u64,
    pub steps: usize,
    pub store: ParamStore,
    pub model: Lagr,
    /// Last selected alignment per training example (weak mode).
    pub cache: AlignmentCache,
    pub metrics: Vec<MetricRecord>,
    pub train_acc: f64,
    pub dev_acc: Option<f64>,
    /// Changed fraction for every completed epoch, in order.
    pub epoch_changed: Vec<f64>,
}

struct MetricsSink {
    file: Option<std::io::BufWriter<std::fs::File>>,
}

impl MetricsSink {
    fn open(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let f = std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|e| LagrError::io(p, e))?;
                Some(std::io::BufWriter::new(f))
            }
            None => None,
        };
        Ok(MetricsSink { file })
    }

    fn write(&mut self, rec: &MetricRecord, seed: u64) -> Result<()> {
        if let Some(f) = &mut self.file {
            #[derive(Serialize)]
            struct Line<'a> {
                seed: u64,
                #[serde(flatten)]
                rec: &'a MetricRecord,
            }
            let text = serde_json::to_string(&Line { seed, rec })?;
            writeln!(f, "{text}").and_then(|_| f.flush()).map_err(|e| LagrError::io("metrics", e))?;
        }
        Ok(())
    }
}

fn train_accuracy(model: &Lagr, store: &ParamStore, data: &Dataset, cap: usize, threads: usize) -> Result<f64> {
    let n = if cap == 0 { data.train.len() } else { cap.min(data.train.len()) };
    Ok(evaluate(model, store, data, &data.train[..n], threads)?.accuracy)
}

/// Train once with `cfg.seed`. Strong and retrain modes need gold aligned
/// graphs on every training example; weak mode infers them.
pub fn train(cfg: &RunConfig, data: &Dataset) -> Result<TrainOutcome> {
    cfg.validate()?;
    let weak = match cfg.supervision {
        Supervision::Weak => Some(&cfg.align),
        Supervision::Strong | Supervision::Retrain => {
            if let Some(p) = data.train.iter().find(|p| p.gold.is_none()) {
                return Err(LagrError::invalid(format!(
                    "{}: {} supervision needs gold alignments",
                    p.id, cfg.supervision
                )));
            }
            None
        }
    };
    let threads = resolve_threads(cfg.threads);
    let seed = cfg.seed;
    let (mut store, model) = build_model(cfg, data, seed)?;
    let schedule = LrSchedule {
        peak: cfg.lr,
        warmup: cfg.warmup,
        total: cfg.train_steps + 1,
    };
    let mut adam = AdamState::new(&store, AdamConfig::default(), schedule);
    let mut sampling = stream(seed, Stream::Sampling);
    let mut dropout = stream(seed, Stream::Dropout);
    let mut noise = stream(seed, Stream::Noise);
    let mut sink = MetricsSink::open(cfg.metrics_path.as_deref())?;
    let started = Instant::now();

    let n = data.train.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut sampling);
    let mut cursor = 0;
    let mut cache = AlignmentCache::new();
    let mut changed_in_epoch = 0usize;
    let mut seen_in_epoch = 0usize;
    let mut epoch_changed = Vec::new();
    let (mut loss_sum, mut loss_count) = (0.0, 0usize);
    let (mut j_sum, mut j_count, mut cache_wins) = (0.0, 0usize, 0usize);
    let mut metrics = Vec::new();
    let mut lr = 0.0;

    let mut record = |step: usize,
                      store: &ParamStore,
                      loss_sum: &mut f64,
                      loss_count: &mut usize,
                      j: (&mut f64, &mut usize, &mut usize),
                      lr: f64,
                      epoch_changed: &[f64]|
     -> Result<MetricRecord> {
        let train_acc = train_accuracy(&model, store, data, cfg.eval_train_max, threads)?;
        let dev_acc = if data.dev.is_empty() {
            None
        } else {
            Some(evaluate(&model, store, data, &data.dev, threads)?.accuracy)
        };
        let rec = MetricRecord {
            step,
            train_acc,
            dev_acc,
            loss: if *loss_count > 0 { *loss_sum / *loss_count as f64 } else { f64::NAN },
            lr,
            mean_j: (*j.1 > 0).then(|| *j.0 / *j.1 as f64),
            cache_wins: (*j.1 > 0).then(|| *j.2 as f64 / *j.1 as f64),
            changed_frac: weak.and(epoch_changed.last().copied()),
            wall_secs: started.elapsed().as_secs_f64(),
        };
        *loss_sum = 0.0;
        *loss_count = 0;
        (*j.0, *j.1, *j.2) = (0.0, 0, 0);
        log::info!(
            "seed {seed} step {step}: loss {:.4} train {:.4} dev {:?}",
            rec.loss,
            rec.train_acc,
            rec.dev_acc
        );
        sink.write(&rec, seed)?;
        Ok(rec)
    };

    for step in 1..=cfg.train_steps {
        let mut jobs = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            if cursor == n {
                if weak.is_some() && seen_in_epoch > 0 {
                    epoch_changed.push(changed_in_epoch as f64 / seen_in_epoch as f64);
                }
                changed_in_epoch = 0;
                seen_in_epoch = 0;
                order.shuffle(&mut sampling);
                cursor = 0;
            }
            let index = order[cursor];
            cursor += 1;
            let example = &data.train[index];
            jobs.push(Job {
                index,
                example,
                cached: cache.get(&example.id).map(|a| a.a.clone()),
                dropout_seed: dropout.random(),
                noise_seed: noise.random(),
            });
        }
        let (grads, outs) = run_batch(&model, &store, &jobs, weak, threads)?;
        let batch_loss: f64 = outs.iter().map(|o| o.loss).sum::<f64>() / outs.len() as f64;
        if !batch_loss.is_finite() {
            dump_diverged(cfg, data, &store, &model, &cache, step);
            return Err(LagrError::Diverged { step, loss: batch_loss });
        }
        grads.install(&mut store, 1.0 / jobs.len() as f32);
        if cfg.clip > 0.0 {
            grad_clip(&mut store, cfg.clip);
        }
        lr = match adam.step(&mut store) {
            Ok(lr) => lr,
            Err(LagrError::NonFiniteGradient(name)) => {
                log::error!("non-finite gradient in `{name}` at step {step}");
                dump_diverged(cfg, data, &store, &model, &cache, step);
                return Err(LagrError::Diverged { step, loss: batch_loss });
            }
            Err(e) => return Err(e),
        };
        loss_sum += batch_loss;
        loss_count += 1;
        for o in outs {
            if let Some(sel) = o.selected {
                j_sum += sel.alignment.score;
                j_count += 1;
                cache_wins += usize::from(sel.from_cache);
                if cache.insert(&data.train[o.index].id, sel.alignment) {
                    changed_in_epoch += 1;
                }
                seen_in_epoch += 1;
            }
        }
        if step % cfg.eval_every == 0 && step != cfg.train_steps {
            let rec = record(
                step,
                &store,
                &mut loss_sum,
                &mut loss_count,
                (&mut j_sum, &mut j_count, &mut cache_wins),
                lr,
                &epoch_changed,
            )?;
            metrics.push(rec);
            if let Some(dir) = &cfg.ckpt_dir {
                save_checkpoint(dir, cfg, data, &store, &cache, metrics.last())?;
            }
        }
    }
    let mut last = record(
        cfg.train_steps,
        &store,
        &mut loss_sum,
        &mut loss_count,
        (&mut j_sum, &mut j_count, &mut cache_wins),
        lr,
        &epoch_changed,
    )?;
    if cfg.eval_train_max != 0 && cfg.eval_train_max < data.train.len() {
        last.train_acc = train_accuracy(&model, &store, data, 0, threads)?;
    }
    metrics.push(last.clone());
    if let Some(dir) = &cfg.ckpt_dir {
        save_checkpoint(dir, cfg, data, &store, &cache, Some(&last))?;
    }
    Ok(TrainOutcome {
        seed,
        steps: cfg.train_steps,
        store,
        model,
        cache,
        metrics,
        train_acc: last.train_acc,
        dev_acc: last.dev_acc,
        epoch_changed,
    })
}

fn dump_diverged(
    cfg: &RunConfig,
    data: &Dataset,
    store: &ParamStore,
    _model: &Lagr,
    cache: &AlignmentCache,
    step: usize,
) {
    if let Some(dir) = &cfg.ckpt_dir {
        let path = dir.join(format!("diverged-seed{}-step{step}", cfg.seed));
        match save_checkpoint(&path, cfg, data, store, cache, None) {
            Ok(()) => log::error!("state at divergence saved to {}", path.display()),
            Err(e) => log::error!("could not save state at divergence: {e}"),
        }
    }
}

/// Final MAP alignment for every training example under an eval-mode
/// forward pass: the noiseless matching, `k` noisy ones, and the cached
/// alignment compete on the joint likelihood.
pub fn infer_alignments(
    model: &Lagr,
    store: &ParamStore,
    data: &Dataset,
    cfg: &AlignmentConfig,
    previous: &AlignmentCache,
    seed: u64,
) -> Result<AlignmentCache> {
    let mut noise = stream(seed, Stream::Noise);
    let mut out = AlignmentCache::new();
    let with_quiet = AlignmentConfig {
        include_noiseless: true,
        ..cfg.clone()
    };
    for p in &data.train {
        let target = p
            .target
            .as_ref()
            .ok_or_else(|| LagrError::invalid(format!("{}: no target", p.id)))?;
        let lp = model.log_probs(store, &p.ids)?;
        let cands = candidate_alignments(&lp, target, &with_quiet, &mut noise)?;
        let cached = previous.get(&p.id).map(|a| a.a.as_slice());
        let sel = select_map_alignment(&cands, cached, target, &lp)?;
        out.insert(&p.id, sel.alignment);
    }
    Ok(out)
}

/// Share of training examples whose alignment in `cache` induces exactly
/// the gold aligned graph. Examples without gold are skipped.
pub fn alignment_agreement(data: &Dataset, cache: &AlignmentCache) -> Result<f64> {
    let mut total = 0usize;
    let mut hits = 0usize;
    for p in &data.train {
        let (Some(gold), Some(target)) = (&p.gold, &p.target) else { continue };
        total += 1;
        if let Some(al) = cache.get(&p.id) {
            if &target.align(&al.a)? == gold {
                hits += 1;
            }
        }
    }
    if total == 0 {
        return Err(LagrError::invalid("no gold alignments to compare against"));
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Accept,
    Relaunch { seed: u64 },
    Failed,
}

/// Accept at or above `threshold`; otherwise relaunch with `seed + 1`
/// while restarts remain.
pub fn restart_decision(train_acc: f64, threshold: f64, restarts_used: usize, max_restarts: usize, seed: u64) -> Decision {
    if train_acc >= threshold {
        Decision::Accept
    } else if restarts_used < max_restarts {
        Decision::Relaunch { seed: seed + 1 }
    } else {
        Decision::Failed
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Attempt {
    pub seed: u64,
    pub train_acc: f64,
    pub dev_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RestartReport {
    pub attempts: Vec<Attempt>,
    /// The accepted run, or the best one (earliest on ties) when every
    /// attempt failed.
    pub outcome: TrainOutcome,
    pub accepted: bool,
}

/// Train, relaunching with the next seed while train accuracy stays below
/// the threshold.
pub fn train_with_restarts(cfg: &RunConfig, data: &Dataset) -> Result<RestartReport> {
    let mut cfg = cfg.clone();
    let mut attempts = Vec::new();
    let mut best: Option<TrainOutcome> = None;
    loop {
        let outcome = train(&cfg, data)?;
        attempts.push(Attempt {
            seed: cfg.seed,
            train_acc: outcome.train_acc,
            dev_acc: outcome.dev_acc,
        });
        match restart_decision(
            outcome.train_acc,
            cfg.restart_threshold,
            attempts.len() - 1,
            cfg.max_restarts,
            cfg.seed,
        ) {
            Decision::Accept => {
                return Ok(RestartReport {
                    attempts,
                    outcome,
                    accepted: true,
                })
            }
            Decision::Relaunch { seed } => {
                log::warn!(
                    "train accuracy {:.4} below {}; relaunching with seed {seed}",
                    outcome.train_acc,
                    cfg.restart_threshold
                );
                cfg.seed = seed;
                if best.as_ref().is_none_or(|b| outcome.train_acc > b.train_acc) {
                    best = Some(outcome);
                }
            }
            Decision::Failed => {
                let seeds: Vec<String> = attempts.iter().map(|a| a.seed.to_string()).collect();
                log::error!("all restarts failed; seeds tried: {}", seeds.join(", "));
                let outcome = match best {
                    Some(b) if b.train_acc >= outcome.train_acc => b,
                    _ => outcome,
                };
                return Ok(RestartReport {
                    attempts,
                    outcome,
                    accepted: false,
                });
            }
        }
    }
}

/// Strong training from fresh initialization on dumped alignments.
pub fn retrain(cfg: &RunConfig, data: &Dataset, alignments: &AlignmentCache) -> Result<RestartReport> {
    let aligned = data.with_alignments(alignments)?;
    let mut cfg = cfg.clone();
    cfg.supervision = Supervision::Retrain;
    if cfg.alignments.is_none() {
        cfg.alignments = Some("<in memory>".into());
    }
    train_with_restarts(&cfg, &aligned)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restart_rule() {
        assert_eq!(restart_decision(0.96, 0.95, 0, 3, 1), Decision::Accept);
        assert_eq!(restart_decision(0.95, 0.95, 0, 3, 1), Decision::Accept);
        assert_eq!(restart_decision(0.99, 0.995, 0, 3, 4), Decision::Relaunch { seed: 5 });
        assert_eq!(restart_decision(0.5, 0.95, 3, 3, 9), Decision::Failed);
    }
}
