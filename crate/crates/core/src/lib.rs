//! Weighted Bergman spaces on the unit ball of `C^n` with radial weights:
//! dyadic radii, reproducing kernels, Carleson profiles, Toeplitz operators
//! and Schatten-class diagnostics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carleson;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod holofn;
pub mod measures;
pub mod qmc;
pub mod quad;
pub mod schatten;
pub mod toeplitz;
pub mod weights;

pub use error::{Error, Result};
