//! Numerical building blocks shared by the probability modules.

pub mod quad;
pub mod root;
pub mod series;
pub mod special;

pub use series::{Certified, KahanSum};
