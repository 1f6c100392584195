//! Exact Gaussian-state dynamics of linear oscillator chains, peaking
//! statistics of coarse-grained observables and local densities, and the
//! hydrodynamic equations obeyed by their averages.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the CLI and
//! scenario orchestration live in the `chainsim` companion crate.
#![no_std]

extern crate alloc;

pub mod error;
pub mod gaussian;
pub mod hydro;
pub mod linalg;
pub mod chain;
pub mod coarse;
pub mod densities;
pub mod specfun;

pub use error::{Error, Result};
