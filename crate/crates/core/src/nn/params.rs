use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::real::Real;
use super::tensor::Tensor;

/// Ordered collection of named parameter tensors.
///
/// Iteration order is insertion order, so parameter layouts (and therefore
/// checkpoints and optimizer states) are reproducible from the network
/// configuration alone.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet<T: Real = f32> {
    tensors: IndexMap<String, Tensor<T>>,
}

impl<T: Real> ParameterSet<T> {
    pub fn new() -> Self {
        Self {
            tensors: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, t: Tensor<T>) -> Result<()> {
        if self.tensors.contains_key(name) {
            return Err(Error::config(format!("duplicate parameter `{name}`")));
        }
        self.tensors.insert(name.to_string(), t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count.
    pub fn count(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    pub fn cast<U: Real>(&self) -> ParameterSet<U> {
        ParameterSet {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }

    /// Copy every tensor whose name starts with `prefix` from `other`,
    /// checking shapes. Returns the number of tensors copied.
    pub fn copy_prefix_from(&mut self, other: &ParameterSet<T>, prefix: &str) -> Result<usize> {
        let mut copied = 0;
        for (name, t) in self.tensors.iter_mut() {
            if !name.starts_with(prefix) {
                continue;
            }
            let src = other
                .get(name)
                .ok_or_else(|| Error::config(format!("source lacks parameter `{name}`")))?;
            if src.shape() != t.shape() {
                return Err(Error::shape(format!(
                    "parameter `{name}`: {:?} vs {:?}",
                    src.shape(),
                    t.shape()
                )));
            }
            *t = src.clone();
            copied += 1;
        }
        Ok(copied)
    }

    /// New set holding the tensors under `prefix`.
    pub fn subset(&self, prefix: &str) -> ParameterSet<T> {
        ParameterSet {
            tensors: self
                .tensors
                .iter()
                .filter(|(k, _)| k.starts_with(prefix))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(Tensor::is_finite)
    }
}

/// Weight initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// `U(-sqrt(6 / fan_in), +)` for layers followed by ReLU.
    HeUniform,
    /// `U(-sqrt(6 / (fan_in + fan_out)), +)`.
    XavierUniform,
    Zeros,
}

impl Init {
    pub fn sample<T: Real>(
        self,
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        rng: &mut Rng,
    ) -> Tensor<T> {
        let numel: usize = shape.iter().product();
        let bound = match self {
            Init::HeUniform => (6.0 / fan_in as f64).sqrt(),
            Init::XavierUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            Init::Zeros => return Tensor::zeros(shape),
        };
        let data = (0..numel)
            .map(|_| T::from_f64(rng.uniform(-bound, bound)))
            .collect();
        Tensor::new(shape, data).expect("init shape")
    }
}
