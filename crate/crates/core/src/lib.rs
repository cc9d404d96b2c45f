//! Dyadic link-formation models for directed social graphs.
//!
//! The crate covers the whole pipeline: loading a follow graph with its vertex
//! attributes, building dyad design rows (geodesic distance bins, homophily
//! indicators, popularity and activity controls), fitting a dyadic logit by
//! streaming mini-batch optimisation over all `n(n-1)` dyads, eliminating
//! sender and receiver fixed effects with a tetrad conditional logit, and
//! simulating networks from the same model family.

pub mod design;
pub mod error;
pub mod estimator;
pub mod features;
pub mod geo;
pub mod graph;
pub mod netstats;
pub mod synth;
pub mod tetrad;

pub use error::{Error, Result};
