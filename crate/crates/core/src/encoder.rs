//! Token vocabulary and the Transformer encoder.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{LagrError, Result};
use crate::rng::Rng;
use crate::tensor::{he_init, uniform_init, ParamId, ParamStore, Scalar, Tape, Tensor, Var};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const RESERVED: [&str; 2] = ["<pad>", "<unk>"];

/// Input token vocabulary. Ids 0 and 1 are padding and unknown; the rest
/// are sorted so the same corpus always yields the same ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn build<'a, I, S>(sentences: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str> + 'a,
    {
        let mut seen: Vec<String> = Vec::new();
        for s in sentences {
            seen.extend(s.as_ref().split_whitespace().map(str::to_string));
        }
        seen.sort();
        seen.dedup();
        seen.retain(|t| !RESERVED.contains(&t.as_str()));
        let tokens = RESERVED.iter().map(|s| s.to_string()).chain(seen).collect();
        Self::from_list(tokens).expect("freshly built vocab is valid")
    }

    /// Rebuild from an id-ordered list; the list must start with the
    /// reserved entries and contain no duplicates.
    pub fn from_list(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != RESERVED[0] || tokens[1] != RESERVED[1] {
            return Err(LagrError::invalid("vocab must start with <pad> and <unk>"));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(LagrError::invalid(format!("duplicate vocab entry `{t}`")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LagrError::io(path, e))?;
        Self::from_list(text.lines().map(str::to_string).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.tokens.join("\n");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| LagrError::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Whitespace tokenization; unknown words map to [`UNK`].
    pub fn tokenize(&self, utterance: &str) -> Result<Vec<usize>> {
        let ids: Vec<usize> = utterance.split_whitespace().map(|t| self.id(t)).collect();
        if ids.is_empty() {
            return Err(LagrError::invalid("empty utterance"));
        }
        Ok(ids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncoderMode {
    #[default]
    Shared,
    /// Independent stacks for node (syntax) and edge (semantics) prediction.
    Separate,
}

impl FromStr for EncoderMode {
    type Err = LagrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(EncoderMode::Shared),
            "separate" => Ok(EncoderMode::Separate),
            other => Err(LagrError::Config(format!("unknown encoder mode `{other}`"))),
        }
    }
}

impl fmt::Display for EncoderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderMode::Shared => "shared",
            EncoderMode::Separate => "separate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub d: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff: usize,
    pub dropout: f64,
    pub mode: EncoderMode,
    pub max_len: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d: 256,
            layers: 4,
            heads: 8,
            ff: 512,
            dropout: 0.1,
            mode: EncoderMode::Shared,
            max_len: 128,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.layers == 0 || self.heads == 0 || self.ff == 0 || self.max_len == 0 {
            return Err(LagrError::Config("encoder sizes must be positive".into()));
        }
        if !self.d.is_multiple_of(self.heads) {
            return Err(LagrError::Config(format!(
                "d={} is not divisible by heads={}",
                self.d, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(LagrError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Block {
    ln1: (ParamId, ParamId),
    wq: (ParamId, ParamId),
    wk: (ParamId, ParamId),
    wv: (ParamId, ParamId),
    wo: (ParamId, ParamId),
    ln2: (ParamId, ParamId),
    ff1: (ParamId, ParamId),
    ff2: (ParamId, ParamId),
}

/// One embedding table plus a pre-norm Transformer stack.
#[derive(Debug, Clone)]
pub struct Stack {
    tok_emb: ParamId,
    pos_emb: ParamId,
    blocks: Vec<Block>,
    ln_f: (ParamId, ParamId),
}

fn linear(
    store: &mut ParamStore,
    name: &str,
    fan_in: usize,
    fan_out: usize,
    rng: &mut Rng,
) -> Result<(ParamId, ParamId)> {
    let w = store.register(format!("{name}.w"), uniform_init(vec![fan_in, fan_out], fan_in, rng)?)?;
    let b = store.register(format!("{name}.b"), Tensor::zeros(vec![fan_out]))?;
    Ok((w, b))
}

fn norm(store: &mut ParamStore, name: &str, d: usize) -> Result<(ParamId, ParamId)> {
    let g = store.register(format!("{name}.g"), Tensor::new(vec![d], vec![1.0; d])?)?;
    let b = store.register(format!("{name}.b"), Tensor::zeros(vec![d]))?;
    Ok((g, b))
}

impl Stack {
    fn new(
        store: &mut ParamStore,
        prefix: &str,
        vocab_size: usize,
        cfg: &EncoderConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        let d = cfg.d;
        let tok_emb = store.register(format!("{prefix}.tok_emb"), he_init(vec![vocab_size, d], d, rng)?)?;
        let pos_emb = store.register(format!("{prefix}.pos_emb"), he_init(vec![cfg.max_len, d], d, rng)?)?;
        let mut blocks = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let p = format!("{prefix}.block{l}");
            blocks.push(Block {
                ln1: norm(store, &format!("{p}.ln1"), d)?,
                wq: linear(store, &format!("{p}.wq"), d, d, rng)?,
                wk: linear(store, &format!("{p}.wk"), d, d, rng)?,
                wv: linear(store, &format!("{p}.wv"), d, d, rng)?,
                wo: linear(store, &format!("{p}.wo"), d, d, rng)?,
                ln2: norm(store, &format!("{p}.ln2"), d)?,
                ff1: linear(store, &format!("{p}.ff1"), d, cfg.ff, rng)?,
                ff2: linear(store, &format!("{p}.ff2"), cfg.ff, d, rng)?,
            });
        }
        let ln_f = norm(store, &format!("{prefix}.ln_f"), d)?;
        Ok(Stack {
            tok_emb,
            pos_emb,
            blocks,
            ln_f,
        })
    }

    pub fn pos_emb(&self) -> ParamId {
        self.pos_emb
    }

    pub fn tok_emb(&self) -> ParamId {
        self.tok_emb
    }
}

/// Per-forward options. `rng` turns on dropout; `attention` collects the
/// softmax weights of every head for inspection.
#[derive(Default)]
pub struct Forward<'r> {
    pub rng: Option<&'r mut Rng>,
    pub attention: Option<Vec<Var>>,
}

impl Forward<'_> {
    pub fn eval() -> Self {
        Forward::default()
    }
}

impl<'r> Forward<'r> {
    pub fn train(rng: &'r mut Rng) -> Self {
        Forward {
            rng: Some(rng),
            attention: None,
        }
    }
}

/// Encoder outputs for the node and edge heads. In shared mode both are the
/// same variable.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    pub node: Var,
    pub edge: Var,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub config: EncoderConfig,
    stacks: Vec<Stack>,
}

impl Encoder {
    pub fn new(store: &mut ParamStore, vocab_size: usize, config: EncoderConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let stacks = match config.mode {
            EncoderMode::Shared => vec![Stack::new(store, "enc", vocab_size, &config, rng)?],
            EncoderMode::Separate => vec![
                Stack::new(store, "enc_syn", vocab_size, &config, rng)?,
                Stack::new(store, "enc_sem", vocab_size, &config, rng)?,
            ],
        };
        Ok(Encoder { config, stacks })
    }

    pub fn stacks(&self) -> &[Stack] {
        &self.stacks
    }

    pub fn encode<T: Scalar>(&self, tape: &mut Tape<'_, T>, ids: &[usize], fwd: &mut Forward<'_>) -> Result<Encoded> {
        if ids.is_empty() {
            return Err(LagrError::invalid("cannot encode an empty sequence"));
        }
        if ids.len() > self.config.max_len {
            return Err(LagrError::SequenceTooLong {
                len: ids.len(),
                max: self.config.max_len,
            });
        }
        let node = self.run_stack(tape, &self.stacks[0], ids, fwd)?;
        let edge = match self.stacks.get(1) {
            Some(s) => self.run_stack(tape, s, ids, fwd)?,
            None => node,
        };
        Ok(Encoded { node, edge })
    }

    /// Token embedding plus the position table scaled by 1/sqrt(d).
    pub fn embed<T: Scalar>(&self, tape: &mut Tape<'_, T>, stack: &Stack, ids: &[usize]) -> Result<Var> {
        let tok_table = tape.param(stack.tok_emb);
        let tok = tape.embedding(tok_table, ids)?;
        let pos_table = tape.param(stack.pos_emb);
        let positions: Vec<usize> = (0..ids.len()).collect();
        let pos = tape.embedding(pos_table, &positions)?;
        let pos = tape.scale(pos, 1.0 / (self.config.d as f64).sqrt());
        tape.add(tok, pos)
    }

    fn run_stack<T: Scalar>(
        &self,
        tape: &mut Tape<'_, T>,
        stack: &Stack,
        ids: &[usize],
        fwd: &mut Forward<'_>,
    ) -> Result<Var> {
        let p = self.config.dropout;
        let mut h = self.embed(tape, stack, ids)?;
        h = drop(tape, h, p, fwd);
        for b in &stack.blocks {
            let x = layer_norm(tape, h, b.ln1)?;
            let a = self.attention(tape, x, b, fwd)?;
            let a = drop(tape, a, p, fwd);
            h = tape.add(h, a)?;

            let x = layer_norm(tape, h, b.ln2)?;
            let f = affine(tape, x, b.ff1)?;
            let f = tape.relu(f);
            let f = drop(tape, f, p, fwd);
            let f = affine(tape, f, b.ff2)?;
            let f = drop(tape, f, p, fwd);
            h = tape.add(h, f)?;
        }
        layer_norm(tape, h, stack.ln_f)
    }

    fn attention<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var, b: &Block, fwd: &mut Forward<'_>) -> Result<Var> {
        let heads = self.config.heads;
        let dh = self.config.d / heads;
        let q = affine(tape, x, b.wq)?;
        let k = affine(tape, x, b.wk)?;
        let v = affine(tape, x, b.wv)?;
        let mut outs = Vec::with_capacity(heads);
        for hd in 0..heads {
            let qh = tape.slice(q, 1, hd * dh, dh)?;
            let kh = tape.slice(k, 1, hd * dh, dh)?;
            let vh = tape.slice(v, 1, hd * dh, dh)?;
            let s = tape.matmul_t(qh, kh)?;
            let s = tape.scale(s, 1.0 / (dh as f64).sqrt());
            let w = tape.softmax(s);
            if let Some(log) = fwd.attention.as_mut() {
                log.push(w);
            }
            let w = drop(tape, w, self.config.dropout, fwd);
            outs.push(tape.matmul(w, vh)?);
        }
        let cat = if outs.len() == 1 { outs[0] } else { tape.concat(&outs, 1)? };
        affine(tape, cat, b.wo)
    }
}

fn drop<T: Scalar>(tape: &mut Tape<'_, T>, x: Var, p: f64, fwd: &mut Forward<'_>) -> Var {
    match fwd.rng.as_deref_mut() {
        Some(rng) => tape.dropout(x, p, rng),
        None => x,
    }
}

pub(crate) fn affine<T: Scalar>(tape: &mut Tape<'_, T>, x: Var, (w, b): (ParamId, ParamId)) -> Result<Var> {
    let w = tape.param(w);
    let b = tape.param(b);
    let y = tape.matmul(x, w)?;
    tape.add_row(y, b)
}

fn layer_norm<T: Scalar>(tape: &mut Tape<'_, T>, x: Var, (g, b): (ParamId, ParamId)) -> Result<Var> {
    let g = tape.param(g);
    let b = tape.param(b);
    tape.layer_norm(x, g, b, 1e-5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn toy(mode: EncoderMode) -> (ParamStore, Encoder, Vocab) {
        let vocab = Vocab::build(["A hedgehog ate the cake", "the cat slept"]);
        let mut store = ParamStore::new();
        let cfg = EncoderConfig {
            d: 8,
            layers: 2,
            heads: 2,
            ff: 16,
            dropout: 0.1,
            mode,
            max_len: 10,
        };
        let enc = Encoder::new(&mut store, vocab.len(), cfg, &mut seeded(3)).unwrap();
        (store, enc, vocab)
    }

    #[test]
    fn tokenize_figure_sentence() {
        let (_, _, vocab) = toy(EncoderMode::Shared);
        let ids = vocab.tokenize("A hedgehog ate the cake").unwrap();
        assert_eq!(ids.len(), 5);
        assert!(ids.iter().all(|&i| i > UNK));
        assert!(vocab.tokenize("").is_err());
        assert!(vocab.tokenize("   ").is_err());
        assert_eq!(vocab.tokenize("zebra").unwrap(), vec![UNK]);
    }

    #[test]
    fn vocab_is_sorted_and_round_trips() {
        let v = Vocab::build(["b a c", "a"]);
        assert_eq!(v.token(2), Some("a"));
        assert_eq!(v.token(4), Some("c"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        v.save(&path).unwrap();
        assert_eq!(Vocab::load(&path).unwrap(), v);
        assert!(Vocab::from_list(vec!["a".into()]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = EncoderConfig::default();
        c.validate().unwrap();
        c.heads = 3;
        assert!(c.validate().is_err());
        c.heads = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn output_shape_and_determinism() {
        let (store, enc, vocab) = toy(EncoderMode::Shared);
        let ids = vocab.tokenize("A hedgehog ate the cake").unwrap();
        let run = || {
            let mut tape = Tape::<f32>::new(&store);
            let h = enc.encode(&mut tape, &ids, &mut Forward::eval()).unwrap();
            assert_eq!(tape.shape(h.node), &[5, 8]);
            tape.value(h.node).to_vec()
        };
        let a = run();
        assert!(a.iter().all(|x| x.is_finite()));
        assert_eq!(a, run());
    }

    #[test]
    fn overlength_rejected() {
        let (store, enc, _) = toy(EncoderMode::Shared);
        let mut tape = Tape::<f32>::new(&store);
        let err = enc.encode(&mut tape, &[2; 11], &mut Forward::eval()).unwrap_err();
        assert!(matches!(err, LagrError::SequenceTooLong { len: 11, max: 10 }));
    }

    #[test]
    fn swapping_tokens_changes_encoding() {
        let (store, enc, vocab) = toy(EncoderMode::Shared);
        let a = vocab.tokenize("the cat slept").unwrap();
        let b = vocab.tokenize("cat the slept").unwrap();
        let mut tape = Tape::<f32>::new(&store);
        let ha = enc.encode(&mut tape, &a, &mut Forward::eval()).unwrap();
        let hb = enc.encode(&mut tape, &b, &mut Forward::eval()).unwrap();
        // the last row sees the same token at the same position in both
        assert_ne!(tape.value(ha.node)[16..], tape.value(hb.node)[16..]);
    }

    #[test]
    fn positional_contribution_is_scaled() {
        let (mut store, enc, _) = toy(EncoderMode::Shared);
        let stack = enc.stacks()[0].clone();
        let ids = [2, 3, 4];
        let with_pos = {
            let mut tape = Tape::<f32>::new(&store);
            let e = enc.embed(&mut tape, &stack, &ids).unwrap();
            tape.value(e).to_vec()
        };
        let pos = store.get(stack.pos_emb()).tensor.data()[..24].to_vec();
        let tok: Vec<f32> = ids
            .iter()
            .flat_map(|&i| store.get(stack.tok_emb()).tensor.data()[i * 8..(i + 1) * 8].to_vec())
            .collect();
        let scale = 1.0 / 8f32.sqrt();
        for i in 0..24 {
            assert!((with_pos[i] - (tok[i] + pos[i] * scale)).abs() < 1e-6);
        }
        store.get_mut(stack.pos_emb()).tensor.data_mut().fill(0.0);
        let mut tape = Tape::<f32>::new(&store);
        let e = enc.embed(&mut tape, &stack, &ids).unwrap();
        assert_eq!(tape.value(e), tok.as_slice());
    }

    #[test]
    fn dropout_only_in_training() {
        let (store, enc, _) = toy(EncoderMode::Shared);
        let ids = [2, 3, 4, 5];
        let mut tape = Tape::<f32>::new(&store);
        let e1 = enc.encode(&mut tape, &ids, &mut Forward::eval()).unwrap();
        let mut rng = seeded(9);
        let e2 = enc.encode(&mut tape, &ids, &mut Forward::train(&mut rng)).unwrap();
        assert_ne!(tape.value(e1.node), tape.value(e2.node));
    }

    #[test]
    fn separate_mode_has_independent_stacks() {
        let (mut store, enc, _) = toy(EncoderMode::Separate);
        assert_eq!(enc.stacks().len(), 2);
        let ids = [2, 3, 4];
        let run = |store: &ParamStore| {
            let mut tape = Tape::<f32>::new(store);
            let h = enc.encode(&mut tape, &ids, &mut Forward::eval()).unwrap();
            (tape.value(h.node).to_vec(), tape.value(h.edge).to_vec())
        };
        let (n0, e0) = run(&store);
        let sem = enc.stacks()[1].tok_emb();
        store.get_mut(sem).tensor.data_mut()[2 * 8] += 1.0;
        let (n1, e1) = run(&store);
        assert_eq!(n0, n1);
        assert_ne!(e0, e1);
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let (store, enc, _) = toy(EncoderMode::Shared);
        let mut tape = Tape::<f32>::new(&store);
        let mut fwd = Forward {
            rng: None,
            attention: Some(Vec::new()),
        };
        enc.encode(&mut tape, &[2, 3, 4, 5, 6], &mut fwd).unwrap();
        let maps = fwd.attention.unwrap();
        assert_eq!(maps.len(), 4);
        for w in maps {
            for row in tape.value(w).chunks(5) {
                assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-5);
            }
        }
    }
}
