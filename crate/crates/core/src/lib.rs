//! Regulated stochastic clocks: Laplace transforms, densities, estimation,
//! option pricing and simulation.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Series and quadrature coefficients are kept as published.
#![allow(clippy::excessive_precision)]

pub mod error;
pub use error::{Error, Result};

pub mod clocks;
pub mod infer;
pub mod invert;
pub mod mix;
pub mod price;
pub mod quad;
pub mod regulate;
pub mod simulate;
pub mod specfun;
