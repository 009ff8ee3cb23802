//! File formats, dataset loaders and the command-line driver around
//! [`hnf_core`].

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod loaders;

pub use error::{Error, Result};
pub use hnf_core as core;
