use std::borrow::Cow;
use std::collections::HashMap;

use rand::Rng as _;

use super::{ParamId, ParamStore, Scalar, Tensor};
use crate::error::{LagrError, Result};
use crate::rng::Rng;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Param,
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    /// a[m,k] · b[n,k]ᵀ
    MatMulT { a: Var, b: Var, m: usize, k: usize, n: usize },
    Add { a: Var, b: Var },
    AddRow { a: Var, bias: Var, cols: usize },
    Mul { a: Var, b: Var },
    Scale { a: Var, s: T },
    Concat { inputs: Vec<Var>, outer: usize, chunks: Vec<usize> },
    Stack { inputs: Vec<Var>, outer: usize, inner: usize },
    Transpose { a: Var, rows: usize, cols: usize },
    Softmax { a: Var, cols: usize },
    LogSoftmax { a: Var, cols: usize },
    LayerNorm { x: Var, gain: Var, bias: Var, cols: usize, xhat: Vec<T>, rstd: Vec<T> },
    Embedding { table: Var, ids: Vec<usize>, dim: usize },
    Dropout { a: Var, mask: Vec<T> },
    Relu { a: Var },
    Gelu { a: Var },
    Slice { a: Var, outer: usize, axis_len: usize, inner: usize, start: usize, len: usize },
    Reshape { a: Var },
    Sum { a: Var },
    Pick { a: Var, idx: Vec<usize>, cols: usize },
}

#[derive(Debug)]
struct Node<'p, T: Scalar> {
    shape: Vec<usize>,
    value: Cow<'p, [T]>,
    op: Op<T>,
    needs_grad: bool,
}

/// A dynamic computation graph. Nodes are appended in evaluation order,
/// which is a topological order by construction.
pub struct Tape<'p, T: Scalar = f32> {
    params: &'p ParamStore,
    nodes: Vec<Node<'p, T>>,
    param_vars: HashMap<ParamId, Var>,
    backward_done: bool,
}

/// Gradients produced by [`Tape::backward`] for leaves and parameters.
#[derive(Debug)]
pub struct Gradients<T> {
    leaves: HashMap<usize, Vec<T>>,
    params: Vec<(ParamId, Var)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn wrt(&self, v: Var) -> Option<&[T]> {
        self.leaves.get(&v.0).map(Vec::as_slice)
    }

    pub fn param(&self, id: ParamId) -> Option<&[T]> {
        self.params
            .iter()
            .find(|(p, _)| *p == id)
            .and_then(|(_, v)| self.wrt(*v))
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &[T])> {
        self.params
            .iter()
            .filter_map(|(p, v)| self.leaves.get(&v.0).map(|g| (*p, g.as_slice())))
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> LagrError {
    LagrError::Shape {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

/// out[m,n] += a[m,k] · b[k,n]
fn gemm_nn<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o = *o + aip * bv;
            }
        }
    }
}

/// out[m,n] += a[m,k] · b[n,k]ᵀ
fn gemm_nt<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = T::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                acc = acc + x * y;
            }
            out[i * n + j] = out[i * n + j] + acc;
        }
    }
}

/// out[k,n] += a[m,k]ᵀ · b[m,n]
fn gemm_tn<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + aip * bv;
            }
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value[0]
    }

    /// Copy a value off the tape as an `f32` tensor.
    pub fn to_tensor(&self, v: Var) -> Tensor {
        let node = &self.nodes[v.0];
        let data = node.value.iter().map(|x| x.as_f64() as f32).collect();
        Tensor::new(node.shape.clone(), data).expect("tape values are shape-consistent")
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>, needs_grad: bool) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        self.nodes.push(Node {
            shape,
            value: Cow::Owned(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn input(&mut self, shape: Vec<usize>, data: Vec<T>, requires_grad: bool) -> Result<Var> {
        if shape.contains(&0) || numel(&shape) != data.len() {
            return Err(shape_err("input", &shape, &[data.len()]));
        }
        Ok(self.push(shape, data, Op::Leaf, requires_grad))
    }

    pub fn constant(&mut self, t: &Tensor) -> Var {
        let data = T::view_f32(t.data()).into_owned();
        self.push(t.shape().to_vec(), data, Op::Leaf, false)
    }

    /// Record a parameter as a leaf. Repeated calls return the same handle so
    /// that every use contributes to one gradient.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let params = self.params;
        let tensor = &params.get(id).tensor;
        self.nodes.push(Node {
            shape: tensor.shape().to_vec(),
            value: T::view_f32(tensor.data()),
            op: Op::Param,
            needs_grad: tensor.requires_grad,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![T::zero(); m * n];
        gemm_nn(self.value(a), self.value(b), &mut out, m, k, n);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(vec![m, n], out, Op::MatMul { a, b, m, k, n }, ng))
    }

    /// `a · bᵀ` for `a: [m,k]`, `b: [n,k]`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[1] {
            return Err(shape_err("matmul_t", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[0]);
        let mut out = vec![T::zero(); m * n];
        gemm_nt(self.value(a), self.value(b), &mut out, m, k, n);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(vec![m, n], out, Op::MatMulT { a, b, m, k, n }, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("add", self.shape(a), self.shape(b)));
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x + y)
            .collect();
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Add { a, b }, ng))
    }

    /// Broadcast-add a bias vector over the last axis.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(bias));
        let cols = *sa.last().unwrap_or(&0);
        if sb.len() != 1 || sb[0] != cols {
            return Err(shape_err("add_row", sa, sb));
        }
        let bv = self.value(bias);
        let out = self
            .value(a)
            .chunks(cols)
            .flat_map(|row| row.iter().zip(bv).map(|(&x, &b)| x + b))
            .collect();
        let ng = self.needs(a) || self.needs(bias);
        Ok(self.push(sa.to_vec(), out, Op::AddRow { a, bias, cols }, ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("mul", self.shape(a), self.shape(b)));
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x * y)
            .collect();
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Mul { a, b }, ng))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let s = T::from_f64(s);
        let out = self.value(a).iter().map(|&x| x * s).collect();
        let ng = self.needs(a);
        self.push(self.shape(a).to_vec(), out, Op::Scale { a, s }, ng)
    }

    /// Concatenate along an existing axis.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| LagrError::invalid("concat of zero tensors"))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(shape_err("concat", &base, &[axis]));
        }
        let outer = numel(&base[..axis]);
        let inner = numel(&base[axis + 1..]);
        let mut axis_total = 0;
        let mut chunks = Vec::with_capacity(inputs.len());
        for &v in inputs {
            let s = self.shape(v);
            if s.len() != base.len()
                || s[..axis] != base[..axis]
                || s[axis + 1..] != base[axis + 1..]
            {
                return Err(shape_err("concat", &base, s));
            }
            axis_total += s[axis];
            chunks.push(s[axis] * inner);
        }
        let mut out = Vec::with_capacity(outer * axis_total * inner);
        for o in 0..outer {
            for (&v, &c) in inputs.iter().zip(&chunks) {
                out.extend_from_slice(&self.value(v)[o * c..(o + 1) * c]);
            }
        }
        let mut shape = base;
        shape[axis] = axis_total;
        let ng = inputs.iter().any(|&v| self.needs(v));
        Ok(self.push(
            shape,
            out,
            Op::Concat {
                inputs: inputs.to_vec(),
                outer,
                chunks,
            },
            ng,
        ))
    }

    /// Stack equally shaped tensors into a new axis at position `axis`.
    pub fn stack(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| LagrError::invalid("stack of zero tensors"))?;
        let base = self.shape(*first).to_vec();
        if axis > base.len() {
            return Err(shape_err("stack", &base, &[axis]));
        }
        for &v in inputs {
            if self.shape(v) != base.as_slice() {
                return Err(shape_err("stack", &base, self.shape(v)));
            }
        }
        let outer = numel(&base[..axis]);
        let inner = numel(&base[axis..]);
        let count = inputs.len();
        let mut out = Vec::with_capacity(outer * count * inner);
        for o in 0..outer {
            for &v in inputs {
                out.extend_from_slice(&self.value(v)[o * inner..(o + 1) * inner]);
            }
        }
        let mut shape = base;
        shape.insert(axis, count);
        let ng = inputs.iter().any(|&v| self.needs(v));
        Ok(self.push(
            shape,
            out,
            Op::Stack {
                inputs: inputs.to_vec(),
                outer,
                inner,
            },
            ng,
        ))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a);
        if s.len() != 2 {
            return Err(shape_err("transpose", s, &[2]));
        }
        let (rows, cols) = (s[0], s[1]);
        let v = self.value(a);
        let mut out = vec![T::zero(); rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = v[r * cols + c];
            }
        }
        let ng = self.needs(a);
        Ok(self.push(vec![cols, rows], out, Op::Transpose { a, rows, cols }, ng))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let cols = *self.shape(a).last().expect("non-scalar shape");
        let mut out = self.value(a).to_vec();
        for row in out.chunks_mut(cols) {
            let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
            let mut sum = T::zero();
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum = sum + *x;
            }
            for x in row.iter_mut() {
                *x = *x / sum;
            }
        }
        let ng = self.needs(a);
        self.push(self.shape(a).to_vec(), out, Op::Softmax { a, cols }, ng)
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let cols = *self.shape(a).last().expect("non-scalar shape");
        let mut out = self.value(a).to_vec();
        for row in out.chunks_mut(cols) {
            let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
            let lse = row.iter().map(|&x| (x - max).exp()).sum::<T>().ln() + max;
            for x in row.iter_mut() {
                *x = *x - lse;
            }
        }
        let ng = self.needs(a);
        self.push(self.shape(a).to_vec(), out, Op::LogSoftmax { a, cols }, ng)
    }

    /// Normalize over the last axis, then apply an elementwise gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let cols = *s.last().expect("non-scalar shape");
        if self.shape(gain) != [cols] || self.shape(bias) != [cols] {
            return Err(shape_err("layer_norm", &s, self.shape(gain)));
        }
        let eps = T::from_f64(eps);
        let n = T::from_f64(cols as f64);
        let xv = self.value(x);
        let (g, b) = (self.value(gain), self.value(bias));
        let mut xhat = Vec::with_capacity(xv.len());
        let mut rstd = Vec::with_capacity(xv.len() / cols);
        let mut out = Vec::with_capacity(xv.len());
        for row in xv.chunks(cols) {
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let r = T::one() / (var + eps).sqrt();
            rstd.push(r);
            for (c, &v) in row.iter().enumerate() {
                let h = (v - mean) * r;
                xhat.push(h);
                out.push(h * g[c] + b[c]);
            }
        }
        let ng = self.needs(x) || self.needs(gain) || self.needs(bias);
        Ok(self.push(
            s,
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                cols,
                xhat,
                rstd,
            },
            ng,
        ))
    }

    /// Gather rows of `table: [V, d]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let s = self.shape(table);
        if s.len() != 2 {
            return Err(shape_err("embedding", s, &[2]));
        }
        let (vocab, dim) = (s[0], s[1]);
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(LagrError::invalid(format!(
                "embedding id {bad} outside table of {vocab} rows"
            )));
        }
        if ids.is_empty() {
            return Err(LagrError::invalid("embedding lookup of zero ids"));
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * dim);
        for &i in ids {
            out.extend_from_slice(&tv[i * dim..(i + 1) * dim]);
        }
        let ng = self.needs(table);
        Ok(self.push(
            vec![ids.len(), dim],
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
                dim,
            },
            ng,
        ))
    }

    /// Inverted dropout: kept entries are scaled by `1/(1-p)` so evaluation
    /// needs no rescaling.
    pub fn dropout(&mut self, a: Var, p: f64, rng: &mut Rng) -> Var {
        if p <= 0.0 {
            return a;
        }
        let keep = T::from_f64(1.0 / (1.0 - p));
        let mask: Vec<T> = (0..self.value(a).len())
            .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
            .collect();
        let out = self
            .value(a)
            .iter()
            .zip(&mask)
            .map(|(&x, &m)| x * m)
            .collect();
        let ng = self.needs(a);
        self.push(self.shape(a).to_vec(), out, Op::Dropout { a, mask }, ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| x.max(T::zero())).collect();
        let ng = self.needs(a);
        self.push(self.shape(a).to_vec(), out, Op::Relu { a }, ng)
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let (c, k) = (T::from_f64(GELU_C), T::from_f64(GELU_A));
        let half = T::from_f64(0.5);
        let out = self
            .value(a)
            .iter()
            .map(|&x| half * x * (T::one() + (c * (x + k * x * x * x)).tanh()))
            .collect();
        let ng = self.needs(a);
        self.push(self.shape(a).to_vec(), out, Op::Gelu { a }, ng)
    }

    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if axis >= s.len() || len == 0 || start + len > s[axis] {
            return Err(shape_err("slice", &s, &[axis, start, len]));
        }
        let outer = numel(&s[..axis]);
        let inner = numel(&s[axis + 1..]);
        let axis_len = s[axis];
        let v = self.value(a);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * axis_len + start) * inner;
            out.extend_from_slice(&v[base..base + len * inner]);
        }
        let mut shape = s;
        shape[axis] = len;
        let ng = self.needs(a);
        Ok(self.push(
            shape,
            out,
            Op::Slice {
                a,
                outer,
                axis_len,
                inner,
                start,
                len,
            },
            ng,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        if numel(&shape) != numel(self.shape(a)) || shape.contains(&0) {
            return Err(shape_err("reshape", self.shape(a), &shape));
        }
        let out = self.value(a).to_vec();
        let ng = self.needs(a);
        Ok(self.push(shape, out, Op::Reshape { a }, ng))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).iter().copied().sum::<T>();
        let ng = self.needs(a);
        self.push(vec![1], vec![total], Op::Sum { a }, ng)
    }

    /// Select one entry of the last axis per row: `out[r] = a[r, idx[r]]`.
    pub fn pick(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let s = self.shape(a);
        let cols = *s.last().expect("non-scalar shape");
        let rows = numel(s) / cols;
        if idx.len() != rows {
            return Err(shape_err("pick", s, &[idx.len()]));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= cols) {
            return Err(LagrError::invalid(format!(
                "pick index {bad} outside last axis of {cols}"
            )));
        }
        let v = self.value(a);
        let out = idx.iter().enumerate().map(|(r, &i)| v[r * cols + i]).collect();
        let ng = self.needs(a);
        Ok(self.push(
            vec![rows],
            out,
            Op::Pick {
                a,
                idx: idx.to_vec(),
                cols,
            },
            ng,
        ))
    }

    /// Reverse pass from a scalar `loss`. Returns gradients for every leaf
    /// that requires one. A tape can be differentiated only once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.backward_done {
            return Err(LagrError::BackwardTwice);
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(LagrError::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].shape
            )));
        }
        self.backward_done = true;

        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        let mut leaves = HashMap::new();

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match &node.op {
                Op::Leaf | Op::Param => {
                    leaves.insert(i, g);
                }
                op => self.backprop(op, &node.value, &g, &mut grads),
            }
        }

        let params = self.param_vars.iter().map(|(&p, &v)| (p, v)).collect();
        Ok(Gradients { leaves, params })
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<T>>], v: Var) -> Option<&'g mut Vec<T>> {
        if !self.nodes[v.0].needs_grad {
            return None;
        }
        let len = self.nodes[v.0].value.len();
        Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); len]))
    }

    fn backprop(&self, op: &Op<T>, out: &[T], g: &[T], grads: &mut [Option<Vec<T>>]) {
        match op {
            Op::Leaf | Op::Param => {}
            &Op::MatMul { a, b, m, k, n } => {
                if let Some(ga) = self.acc(grads, a) {
                    gemm_nt(g, self.value(b), ga, m, n, k);
                }
                if let Some(gb) = self.acc(grads, b) {
                    gemm_tn(self.value(a), g, gb, m, k, n);
                }
            }
            &Op::MatMulT { a, b, m, k, n } => {
                if let Some(ga) = self.acc(grads, a) {
                    gemm_nn(g, self.value(b), ga, m, n, k);
                }
                if let Some(gb) = self.acc(grads, b) {
                    gemm_tn(g, self.value(a), gb, m, n, k);
                }
            }
            &Op::Add { a, b } => {
                if let Some(ga) = self.acc(grads, a) {
                    add_into(ga, g);
                }
                if let Some(gb) = self.acc(grads, b) {
                    add_into(gb, g);
                }
            }
            &Op::AddRow { a, bias, cols } => {
                if let Some(ga) = self.acc(grads, a) {
                    add_into(ga, g);
                }
                if let Some(gb) = self.acc(grads, bias) {
                    for row in g.chunks(cols) {
                        add_into(gb, row);
                    }
                }
            }
            &Op::Mul { a, b } => {
                if let Some(ga) = self.acc(grads, a) {
                    for ((d, &gi), &bv) in ga.iter_mut().zip(g).zip(self.value(b)) {
                        *d = *d + gi * bv;
                    }
                }
                if let Some(gb) = self.acc(grads, b) {
                    for ((d, &gi), &av) in gb.iter_mut().zip(g).zip(self.value(a)) {
                        *d = *d + gi * av;
                    }
                }
            }
            &Op::Scale { a, s } => {
                if let Some(ga) = self.acc(grads, a) {
                    for (d, &gi) in ga.iter_mut().zip(g) {
                        *d = *d + gi * s;
                    }
                }
            }
            Op::Concat {
                inputs,
                outer,
                chunks,
            } => {
                let total: usize = chunks.iter().sum();
                let mut offset = 0;
                for (&v, &c) in inputs.iter().zip(chunks) {
                    if let Some(gv) = self.acc(grads, v) {
                        for o in 0..*outer {
                            let src = &g[o * total + offset..o * total + offset + c];
                            add_into(&mut gv[o * c..(o + 1) * c], src);
                        }
                    }
                    offset += c;
                }
            }
            Op::Stack {
                inputs,
                outer,
                inner,
            } => {
                let count = inputs.len();
                for (s, &v) in inputs.iter().enumerate() {
                    if let Some(gv) = self.acc(grads, v) {
                        for o in 0..*outer {
                            let base = (o * count + s) * inner;
                            add_into(&mut gv[o * inner..(o + 1) * inner], &g[base..base + inner]);
                        }
                    }
                }
            }
            &Op::Transpose { a, rows, cols } => {
                if let Some(ga) = self.acc(grads, a) {
                    for r in 0..rows {
                        for c in 0..cols {
                            ga[r * cols + c] = ga[r * cols + c] + g[c * rows + r];
                        }
                    }
                }
            }
            &Op::Softmax { a, cols } => {
                if let Some(ga) = self.acc(grads, a) {
                    for ((gr, yr), dr) in g.chunks(cols).zip(out.chunks(cols)).zip(ga.chunks_mut(cols)) {
                        let dot: T = gr.iter().zip(yr).map(|(&x, &y)| x * y).sum();
                        for ((d, &gi), &y) in dr.iter_mut().zip(gr).zip(yr) {
                            *d = *d + y * (gi - dot);
                        }
                    }
                }
            }
            &Op::LogSoftmax { a, cols } => {
                if let Some(ga) = self.acc(grads, a) {
                    for ((gr, yr), dr) in g.chunks(cols).zip(out.chunks(cols)).zip(ga.chunks_mut(cols)) {
                        let total: T = gr.iter().copied().sum();
                        for ((d, &gi), &y) in dr.iter_mut().zip(gr).zip(yr) {
                            *d = *d + gi - y.exp() * total;
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                cols,
                xhat,
                rstd,
            } => {
                let cols = *cols;
                let gv = self.value(*gain).to_vec();
                if let Some(gg) = self.acc(grads, *gain) {
                    for (gr, hr) in g.chunks(cols).zip(xhat.chunks(cols)) {
                        for c in 0..cols {
                            gg[c] = gg[c] + gr[c] * hr[c];
                        }
                    }
                }
                if let Some(gb) = self.acc(grads, *bias) {
                    for gr in g.chunks(cols) {
                        add_into(gb, gr);
                    }
                }
                if let Some(gx) = self.acc(grads, *x) {
                    let n = T::from_f64(cols as f64);
                    for (r, ((gr, hr), dr)) in g
                        .chunks(cols)
                        .zip(xhat.chunks(cols))
                        .zip(gx.chunks_mut(cols))
                        .enumerate()
                    {
                        let dh: Vec<T> = gr.iter().zip(&gv).map(|(&a, &b)| a * b).collect();
                        let sum_dh: T = dh.iter().copied().sum();
                        let sum_dh_h: T = dh.iter().zip(hr).map(|(&a, &b)| a * b).sum();
                        let scale = rstd[r] / n;
                        for c in 0..cols {
                            dr[c] = dr[c] + scale * (n * dh[c] - sum_dh - hr[c] * sum_dh_h);
                        }
                    }
                }
            }
            Op::Embedding { table, ids, dim } => {
                if let Some(gt) = self.acc(grads, *table) {
                    for (t, &i) in ids.iter().enumerate() {
                        add_into(&mut gt[i * dim..(i + 1) * dim], &g[t * dim..(t + 1) * dim]);
                    }
                }
            }
            Op::Dropout { a, mask } => {
                if let Some(ga) = self.acc(grads, *a) {
                    for ((d, &gi), &m) in ga.iter_mut().zip(g).zip(mask) {
                        *d = *d + gi * m;
                    }
                }
            }
            &Op::Relu { a } => {
                if let Some(ga) = self.acc(grads, a) {
                    for ((d, &gi), &x) in ga.iter_mut().zip(g).zip(self.value(a)) {
                        if x > T::zero() {
                            *d = *d + gi;
                        }
                    }
                }
            }
            &Op::Gelu { a } => {
                let (c, k) = (T::from_f64(GELU_C), T::from_f64(GELU_A));
                let half = T::from_f64(0.5);
                let three = T::from_f64(3.0);
                if let Some(ga) = self.acc(grads, a) {
                    for ((d, &gi), &x) in ga.iter_mut().zip(g).zip(self.value(a)) {
                        let t = (c * (x + k * x * x * x)).tanh();
                        let dt = (T::one() - t * t) * c * (T::one() + three * k * x * x);
                        *d = *d + gi * (half * (T::one() + t) + half * x * dt);
                    }
                }
            }
            &Op::Slice {
                a,
                outer,
                axis_len,
                inner,
                start,
                len,
            } => {
                if let Some(ga) = self.acc(grads, a) {
                    for o in 0..outer {
                        let base = (o * axis_len + start) * inner;
                        add_into(&mut ga[base..base + len * inner], &g[o * len * inner..(o + 1) * len * inner]);
                    }
                }
            }
            &Op::Reshape { a } => {
                if let Some(ga) = self.acc(grads, a) {
                    add_into(ga, g);
                }
            }
            &Op::Sum { a } => {
                if let Some(ga) = self.acc(grads, a) {
                    for d in ga.iter_mut() {
                        *d = *d + g[0];
                    }
                }
            }
            Op::Pick { a, idx, cols } => {
                if let Some(ga) = self.acc(grads, *a) {
                    for (r, &i) in idx.iter().enumerate() {
                        ga[r * cols + i] = ga[r * cols + i] + g[r];
                    }
                }
            }
        }
    }
}
