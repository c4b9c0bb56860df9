//! Dense tensors and the named parameter store.

use std::collections::HashMap;
use std::fmt::Debug;

use num_traits::Float;

use crate::error::{Error, Result};

/// Floating-point element type of network buffers. Learned tensors are
/// `f32`; `f64` is used for finite-difference checks.
pub trait Scalar: Float + Default + Debug + Send + Sync + std::iter::Sum + 'static {
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F = f32> {
    shape: Vec<usize>,
    values: Vec<F>,
    grad: Option<Vec<F>>,
}

impl<F: Scalar> Tensor<F> {
    pub fn new(shape: Vec<usize>, values: Vec<F>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                expected,
                values.len()
            )));
        }
        Ok(Self {
            shape,
            values,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            values: vec![F::zero(); len],
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [F] {
        &mut self.values
    }

    pub fn grad(&self) -> Option<&[F]> {
        self.grad.as_deref()
    }

    /// Gradient slot, allocated zeroed on first use.
    pub fn grad_mut(&mut self) -> &mut [F] {
        let len = self.values.len();
        self.grad.get_or_insert_with(|| vec![F::zero(); len])
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = F::zero());
        }
    }

    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| G::from_f64(v.as_f64())).collect(),
            grad: self
                .grad
                .as_ref()
                .map(|g| g.iter().map(|v| G::from_f64(v.as_f64())).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry<F = f32> {
    pub name: String,
    pub tensor: Tensor<F>,
    pub trainable: bool,
}

/// The complete learnable weight set, in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelParams<F = f32> {
    entries: Vec<ParamEntry<F>>,
    index: HashMap<String, usize>,
}

impl<F: Scalar> ModelParams<F> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<F>) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Params(format!("duplicate tensor `{name}`")));
        }
        let id = self.entries.len();
        self.index.insert(name.clone(), id);
        self.entries.push(ParamEntry {
            name,
            tensor,
            trainable: true,
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<F>> {
        self.id(name).map(|i| &self.entries[i].tensor)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<F>> {
        self.id(name).map(move |i| &mut self.entries[i].tensor)
    }

    pub fn entry(&self, id: usize) -> &ParamEntry<F> {
        &self.entries[id]
    }

    pub fn entries(&self) -> &[ParamEntry<F>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry<F>] {
        &mut self.entries
    }

    pub fn values(&self, id: usize) -> &[F] {
        self.entries[id].tensor.values()
    }

    pub fn is_trainable(&self, name: &str) -> bool {
        self.id(name).is_some_and(|i| self.entries[i].trainable)
    }

    pub fn set_trainable(&mut self, name: &str, trainable: bool) -> Result<()> {
        let id = self
            .id(name)
            .ok_or_else(|| Error::Params(format!("no tensor named `{name}`")))?;
        self.entries[id].trainable = trainable;
        Ok(())
    }

    /// Freezes every tensor whose name starts with `prefix`; returns how many.
    pub fn freeze_prefix(&mut self, prefix: &str) -> usize {
        let mut count = 0;
        for e in self.entries.iter_mut().filter(|e| e.name.starts_with(prefix)) {
            e.trainable = false;
            count += 1;
        }
        count
    }

    pub fn zero_grad(&mut self) {
        self.entries.iter_mut().for_each(|e| e.tensor.zero_grad());
    }

    /// Total scalar parameter count.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }

    /// Squared L2 norm over trainable tensors.
    pub fn trainable_sq_norm(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .flat_map(|e| e.tensor.values().iter())
            .map(|v| {
                let v = v.as_f64();
                v * v
            })
            .sum()
    }

    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        ModelParams {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    tensor: e.tensor.cast(),
                    trainable: e.trainable,
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Adds `grads` (aligned with entries) into the tensors' gradient slots.
    pub fn accumulate_grads(&mut self, grads: &Gradients<F>) -> Result<()> {
        if grads.bufs.len() != self.entries.len() {
            return Err(Error::Shape(format!(
                "gradient set has {} tensors, params have {}",
                grads.bufs.len(),
                self.entries.len()
            )));
        }
        for (e, g) in self.entries.iter_mut().zip(&grads.bufs) {
            let slot = e.tensor.grad_mut();
            for (s, v) in slot.iter_mut().zip(g) {
                *s = *s + *v;
            }
        }
        Ok(())
    }
}

/// Gradient buffers aligned one-to-one with a [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F = f32> {
    pub(crate) bufs: Vec<Vec<F>>,
}

impl<F: Scalar> Gradients<F> {
    pub fn zeros_like(params: &ModelParams<F>) -> Self {
        Self {
            bufs: params
                .entries()
                .iter()
                .map(|e| vec![F::zero(); e.tensor.len()])
                .collect(),
        }
    }

    pub fn get(&self, id: usize) -> &[F] {
        &self.bufs[id]
    }

    pub fn get_mut(&mut self, id: usize) -> &mut [F] {
        &mut self.bufs[id]
    }

    pub fn len(&self) -> usize {
        self.bufs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bufs.is_empty()
    }

    pub fn add_assign(&mut self, other: &Gradients<F>) {
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = *x + *y;
            }
        }
    }

    pub fn scale(&mut self, factor: F) {
        self.bufs
            .iter_mut()
            .flat_map(|b| b.iter_mut())
            .for_each(|v| *v = *v * factor);
    }

    pub fn max_abs(&self) -> F {
        self.bufs
            .iter()
            .flat_map(|b| b.iter())
            .fold(F::zero(), |m, v| m.max(v.abs()))
    }
}
