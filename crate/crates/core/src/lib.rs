//! Numerical laboratory for the spinless Falicov-Kimball model.
// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod bulk;
pub mod error;
pub mod lattice;
pub mod segregation;
pub mod spectral;

pub use error::{Error, Result};
