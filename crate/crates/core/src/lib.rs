#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Universal collaboration matrices for distributed detection.
//!
//! A network of `N` sensors observes `x = s + n` for a signal `s` drawn from a
//! known class. Only `M` sensors talk to the fusion center, which receives
//! `y = Wx`. This crate designs `W`: the cost-free optimum (PCA of
//! `Ω = Σ sᵢsᵢᵀ`), sparse designs that deactivate links under ℓ0/ℓ1
//! penalties, and a Gaussian random baseline, and it scores them by
//! cumulative deflection, cost of universality and detection probability.

pub mod cli;
pub mod design;
pub mod detect;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod sparse;

pub use error::{Error, Result};
