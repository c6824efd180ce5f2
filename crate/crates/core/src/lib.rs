//! Perceptual pretraining for an agent cylinder in a two-cylinder wake.
//!
//! The crate bundles an immersed-boundary flow solver ([`cfd`]), the
//! agent-facing environment with a fast surrogate backend ([`env`]), a small
//! autodiff engine ([`nn`]), the pressure-perception network and its
//! predictive pretraining ([`perception`]), PPO for drag reduction ([`rl`])
//! and run orchestration ([`experiment`]).

// `!(x > 0.0)` also rejects NaN, which is the point of those checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cfd;
pub mod env;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod rl;
pub mod rng;

pub use error::{Error, Result};
pub mod perception;
