//! Layer-wise trained networks of fixed random (or DCT) projections with a
//! lossless `[I; −I]` ReLU expansion. Only the linear read-out of each layer
//! is learned, by least squares under a Frobenius-norm budget chosen so the
//! training cost can never increase from one layer to the next.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod data;
pub mod error;
pub mod layers;
pub mod linalg;
pub mod matrixgen;
pub mod solvers;
pub mod trainer;

pub use error::{Error, Result};
