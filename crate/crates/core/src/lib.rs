//! Erdélyi–Kober fractional diffusion.
//!
//! Numerical tools for the generalized grey Brownian motion (ggBm): the
//! M-Wright function, Erdélyi–Kober fractional operators, closed-form Green
//! functions, a product-integration solver for the governing Volterra
//! equation, and a Monte Carlo path sampler.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod ekops;
pub mod error;
pub mod greenfn;
pub mod mwright;
pub mod output;
pub mod quadrature;
pub mod sampler;
pub mod solver;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
