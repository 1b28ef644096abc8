// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod cli;
pub mod estimation;
pub mod fraccalc;
pub mod fbm;
pub mod grid;
pub mod linalg;
pub mod mc;
pub mod quadrature;
pub mod ruin;
pub mod sensitivity;
pub mod special;
pub mod validate;

pub use error::{Error, Result};
