//! Block-group socioeconomic deprivation toolkit.
//!
//! The crate is organised as a pipeline of small, independently testable
//! modules:
//!
//! - [`model`] shared domain types (records, weights, scores, graphs, fits)
//! - [`ingest`] attribute CSV / boundary GeoJSON parsing, joining, ACS fetch
//! - [`index`] inverse-SD and PCA weighting, raw and rescaled scores
//! - [`classify`] high-deprivation threshold, medians, regional aggregates
//! - [`spatial`] contiguity graph and the dispersion score
//! - [`stats`] OLS with robust covariance, logistic IRLS, tail probabilities
//! - [`synth`] seeded synthetic grids for fixtures, scale tests and benches
//!
//! Data-parallel loops go through [`exec`], which falls back to sequential
//! code when the `parallel` feature is disabled. Reductions use a fixed
//! chunked pairwise tree, so results are bit-identical for any worker count.

pub mod classify;
pub mod error;
pub mod exec;
pub mod index;
pub mod ingest;
pub mod linalg;
pub mod model;
pub mod spatial;
pub mod stats;
pub mod synth;

pub use error::{Error, ErrorFamily, Result};
pub use exec::Execution;
