//! Random sums `W = E[N]^(-1/2) * (X_1 + ... + X_N)`: approximation-error
//! bounds against normal, Laplace and normal scale-mixture limits, and the
//! exact and Monte Carlo distance computations used to check them.

// NaN-rejecting parameter checks are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod distances;
pub mod error;
pub mod experiments;
pub mod index;
pub mod limits;
pub mod numeric;
pub mod rng;
pub mod summands;

pub use error::{Error, Result};
