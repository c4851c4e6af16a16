//! Graph-relational domain adaptation.
//!
//! An encoder and predictor are trained against a graph discriminator that
//! tries to reconstruct the domain-adjacency graph from pairs of encodings.
//! The crate also carries the tooling around that game: a small reverse-mode
//! autodiff engine, domain-graph utilities and node-embedding pretraining,
//! synthetic and temperature datasets, equilibrium checks on encoding
//! densities, and per-domain evaluation with report emission.

pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod theory;

pub use error::{GrdaError, Result};
