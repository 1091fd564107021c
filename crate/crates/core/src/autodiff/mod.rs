//! Minimal reverse-mode autodiff: tensors, a recording tape, named
//! parameter stores, Adam, and a versioned tensor container for checkpoints.

pub mod gradcheck;
mod optim;
mod tape;
mod tensor;

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use optim::{Adam, AdamState};
pub use tape::{log_sum_exp, sigmoid, softmax_in_place, Gradients, Tape, Var};
pub use tensor::Tensor;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Identifies one tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Ordered collection of named trainable tensors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    /// Uniform(−a, a) with `a = sqrt(6 / (fan_in + fan_out))`.
    pub fn add_glorot(&mut self, name: &str, shape: &[usize], rng: &mut Rng) -> ParamId {
        let (fan_in, fan_out) = match shape.len() {
            0 => (1, 1),
            1 => (shape[0], shape[0]),
            n => (shape[n - 2], shape[n - 1]),
        };
        self.add_uniform(name, shape, (6.0 / (fan_in + fan_out) as f64).sqrt(), rng)
    }

    /// Uniform(−a, a).
    pub fn add_uniform(&mut self, name: &str, shape: &[usize], a: f64, rng: &mut Rng) -> ParamId {
        let mut t = Tensor::zeros(shape);
        t.data_mut().iter_mut().for_each(|x| *x = rng.random_range(-a..a));
        self.add(name, t)
    }

    pub fn add_normal(&mut self, name: &str, shape: &[usize], std: f64, rng: &mut Rng) -> ParamId {
        let mut t = Tensor::zeros(shape);
        t.data_mut().iter_mut().for_each(|x| {
            let v: f64 = rng.sample(rand_distr::StandardNormal);
            *x = v * std;
        });
        self.add(name, t)
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Puts every parameter on `tape` as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound(self.tensors.iter().map(|t| tape.leaf(t.clone())).collect())
    }

    /// Puts every parameter on `tape` as a constant (inference only).
    pub fn bind_frozen(&self, tape: &mut Tape) -> Bound {
        Bound(self.tensors.iter().map(|t| tape.constant(t.clone())).collect())
    }

    /// Collects the gradient for each parameter, zeros when unreachable.
    pub fn gradients(&self, bound: &Bound, grads: &mut Gradients) -> Vec<Vec<f64>> {
        bound
            .0
            .iter()
            .zip(&self.tensors)
            .map(|(&v, t)| grads.take(v).unwrap_or_else(|| vec![0.0; t.len()]))
            .collect()
    }

    pub fn to_container(&self) -> TensorContainer {
        TensorContainer {
            format: CONTAINER_FORMAT.to_string(),
            version: CONTAINER_VERSION,
            tensors: self
                .names
                .iter()
                .zip(&self.tensors)
                .map(|(name, t)| NamedTensor {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                    values: t.data().to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_container(c: &TensorContainer) -> Result<Self> {
        c.check_header()?;
        let mut store = ParamStore::new();
        for nt in &c.tensors {
            store.add(nt.name.clone(), Tensor::new(nt.shape.clone(), nt.values.clone())?);
        }
        Ok(store)
    }

    /// Copies values from `other` for every name present in both stores,
    /// checking shapes.
    pub fn load_matching(&mut self, other: &ParamStore) -> Result<()> {
        let index: BTreeMap<&str, &Tensor> = other.names.iter().map(String::as_str).zip(&other.tensors).collect();
        for (name, t) in self.names.iter().zip(self.tensors.iter_mut()) {
            let src = index
                .get(name.as_str())
                .ok_or_else(|| Error::Invalid(format!("checkpoint lacks tensor `{name}`")))?;
            if src.shape() != t.shape() {
                return Err(Error::shape(
                    "load",
                    format!("`{name}`: {:?} vs {:?}", src.shape(), t.shape()),
                ));
            }
            *t = (*src).clone();
        }
        Ok(())
    }
}

/// Parameter handles on a specific tape, indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }
}

impl std::ops::Index<ParamId> for Bound {
    type Output = Var;
    fn index(&self, id: ParamId) -> &Var {
        &self.0[id.0]
    }
}

pub const CONTAINER_FORMAT: &str = "recourse-tensors";
pub const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Self-describing checkpoint payload: a versioned header plus named tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorContainer {
    pub format: String,
    pub version: u32,
    pub tensors: Vec<NamedTensor>,
}

impl TensorContainer {
    fn check_header(&self) -> Result<()> {
        if self.format != CONTAINER_FORMAT || self.version != CONTAINER_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported tensor container {} v{}",
                self.format, self.version
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let c: TensorContainer = serde_json::from_slice(&bytes)?;
        c.check_header()?;
        Ok(c)
    }
}
