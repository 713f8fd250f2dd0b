//! fundtail maps where research funding actually goes: it ingests grant
//! awards and linked publications, fits a Gibbs-sampled topic model over the
//! award abstracts, allocates each grant's dollars across topics, and reports
//! how investment concentrates in a head of large topics while a long tail
//! shares the rest.

pub mod analysis;
pub mod config;
pub mod error;
pub mod ingest;
pub mod invest;
pub mod lda;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod textprep;

pub use error::{Error, Result};
