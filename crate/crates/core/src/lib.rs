//! MPLite: lab-result pretraining for sequential diagnosis prediction.
//!
//! The crate implements the full pipeline: ingest MIMIC-style admission /
//! diagnosis / lab tables (or generate planted synthetic data), pretrain a
//! lightweight lab-to-diagnosis module on every patient with lab results —
//! including single-visit patients that next-visit prediction cannot use —
//! freeze it, and fuse its hidden representation with a GRU backbone over
//! the admission history to predict next-visit diagnoses (DG) or heart
//! failure (HF). Evaluation covers weighted F1, Recall@k, ROC-AUC and
//! binary F1 with repeated-run aggregation.
//!
//! Everything is deterministic given the configured seeds: the numeric
//! kernels are written from scratch in f64, randomness flows from one
//! splittable generator, and artifacts rewrite byte-identically.

// Index loops mirror the matrix math and keep the kernels readable.
#![allow(clippy::needless_range_loop)]

pub mod backbone;
pub mod checkpoint;
pub mod ehr;
pub mod error;
pub mod fusion;
pub mod log;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod pretrain;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use rng::Rng;
