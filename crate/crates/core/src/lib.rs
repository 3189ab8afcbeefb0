//! Scaling-law tooling for the pretraining-vs-retrieval data budget.
//!
//! The crate fits joint scaling laws over model size, pretraining tokens,
//! and retrieval-store tokens, validates the fits with cross-validation and
//! leave-one-group-out protocols, and answers the allocation question: how
//! should a fixed token budget be split between pretraining data and a
//! retrieval datastore?
//!
//! Modules:
//! * [`records`] — experiment observations and file ingestion
//! * [`laws`] — law evaluation and derived quantities
//! * [`fitter`] — constrained multi-start least squares
//! * [`validation`] — fit-quality protocols (ARE, R², CV, LOMO, LODO)
//! * [`allocation`] — budget splits, frontiers, crossover, iso-surfaces
//! * [`datastore`] — nested-prefix chunk selection under token budgets
//! * [`synth`] — planted-parameter oracle datasets
//! * [`cli`] — the `ragscale` command-line surface

pub mod allocation;
pub mod cli;
pub mod datastore;
pub mod error;
pub mod fitter;
pub mod laws;
pub mod numeric;
pub mod records;
pub mod report;
pub mod rng;
pub mod synth;
pub mod validation;

pub use error::{Error, Result};
