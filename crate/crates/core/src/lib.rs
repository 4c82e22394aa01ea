//! Cucker-Smale flocking with distributed time delay and normalized weights.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod kernels;
pub mod meanfield;
pub mod model;
pub mod particle;
pub mod quadrature;

pub use error::{Error, Result};
