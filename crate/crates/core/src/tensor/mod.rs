//! Dense tensors, a parameter store and a small reverse-mode autodiff tape.
//!
//! Model state is `f32`. The tape is generic over [`Scalar`] so the same
//! forward code can be replayed in `f64` by gradient checks.

mod checkpoint;
mod init;
mod optim;
mod tape;

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt::Debug;

use num_traits::Float;

use crate::error::{LagrError, Result};

pub use checkpoint::{load_params, save_params, Manifest, ManifestEntry};
pub use init::{he_init, uniform_init};
pub use optim::{grad_clip, AdamConfig, AdamState, LrSchedule};
pub use tape::{Gradients, Tape, Var};

/// Element type a [`Tape`] can compute in.
pub trait Scalar: Float + Default + Debug + std::iter::Sum + Send + Sync + 'static {
    /// View an `f32` parameter buffer in this precision.
    fn view_f32(data: &[f32]) -> Cow<'_, [Self]>;

    fn from_f64(x: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn view_f32(data: &[f32]) -> Cow<'_, [f32]> {
        Cow::Borrowed(data)
    }

    fn from_f64(x: f64) -> Self {
        x as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn view_f32(data: &[f32]) -> Cow<'_, [f64]> {
        Cow::Owned(data.iter().map(|&x| x as f64).collect())
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn as_f64(self) -> f64 {
        self
    }
}

/// A dense row-major `f32` array with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f32>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.contains(&0) || numel != data.len() {
            return Err(LagrError::Shape {
                op: "tensor",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; numel],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub tensor: Tensor,
}

/// Named trainable parameters, in registration order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(LagrError::invalid(format!("duplicate parameter `{name}`")));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Param {
            name,
            tensor: tensor.with_grad(),
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.tensor.grad = None;
        }
    }

    /// Add the parameter gradients from one backward pass into the
    /// per-parameter `grad` buffers.
    pub fn accumulate<T: Scalar>(&mut self, grads: &Gradients<T>) {
        for (id, g) in grads.params() {
            let t = &mut self.params[id.0].tensor;
            let buf = t.grad.get_or_insert_with(|| vec![0.0; t.data.len()]);
            for (b, &x) in buf.iter_mut().zip(g) {
                *b += x.to_f32().unwrap_or(f32::NAN);
            }
        }
    }

    /// Overwrite every parameter value from `other`, matching by name.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        for p in &mut self.params {
            let src = other
                .id(&p.name)
                .map(|id| other.get(id))
                .ok_or_else(|| LagrError::Checkpoint(format!("missing parameter `{}`", p.name)))?;
            if src.tensor.shape() != p.tensor.shape() {
                return Err(LagrError::Shape {
                    op: "copy_values_from",
                    lhs: p.tensor.shape().to_vec(),
                    rhs: src.tensor.shape().to_vec(),
                });
            }
            p.tensor.data_mut().copy_from_slice(src.tensor.data());
        }
        Ok(())
    }
}
