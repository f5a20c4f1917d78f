//! Grid-based approximate nonlinear filtering for compactly supported Markov
//! processes observed in conditionally Gaussian noise.
//!
//! The state space is quantized by a uniform [`grid::Grid`]; the hidden chain
//! is replaced by a finite Markov chain on the grid centers with transition
//! matrix [`transition::TransitionMatrix`], and [`filter`] runs the exact
//! recursion for that chain. [`particle`] provides a bootstrap particle filter
//! used as a reference, [`regularity`] estimates the conditional-regularity
//! deficits of a kernel, and [`harness`] drives the experiments behind the CLI.

pub mod error;
pub mod filter;
pub mod grid;
pub mod harness;
pub mod models;
pub mod normal;
pub mod particle;
pub mod quadrature;
pub mod regularity;
pub mod rng;
pub mod transition;

pub use error::{Error, Result};
