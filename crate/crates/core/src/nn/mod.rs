//! Minimal tensor/autodiff engine: circular 1-D convolution, GRU, linear
//! layers, pointwise activations, cosine similarity and Adam.

pub mod adam;
pub mod checkpoint;
pub mod graph;
pub mod layers;
pub mod params;
pub mod real;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use graph::{cosine_similarity, Grads, Graph, Var};
pub use layers::{conv1d_circular, gru_step, GruVars, LinearVars};
pub use params::{Init, ParameterSet};
pub use real::Real;
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
