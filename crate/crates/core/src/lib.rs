//! Graph convolutional filters as state-space recursions over graph shifts, their nonlinear
//! generalizations (recursive shift networks and long short shift memories), exact
//! reverse-mode gradients, an ADAM trainer for source localization on stochastic block
//! models, and stability diagnostics of the state recursion.

pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod filters;
pub mod graph;
pub mod models;
pub mod numerics;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
