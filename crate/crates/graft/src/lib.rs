//! Cross-graph pre-training with multi-scale pooling and a self-paced
//! signal curriculum.
//!
//! The pipeline pools a source graph through learned soft assignments,
//! translates its coarsest representation into the target graph's feature
//! space, unpools it along the target's own hierarchy, and pre-trains a
//! student network by predicting masked graph signals (node attributes and
//! edges) at every level. A closed-form teacher re-weights each signal by
//! difficulty, admitting harder signals as the thresholds grow. The
//! pre-trained student is then fine-tuned for node classification on the
//! target graph.
//!
//! Entry points:
//! - [`graph`]: graph data model, bundle I/O, splits, synthetic generators
//! - [`nn`]: dense/sparse primitives, GCN/GAT/MLP layers, gradient checking
//! - [`coder`]: the multi-scale encoder/decoder and translation function
//! - [`signals`]: masked-signal extraction and per-signal losses
//! - [`curriculum`]: closed-form signal weights and the threshold schedule
//! - [`trainer`]: the alternating teacher/student pre-training loop
//! - [`eval`]: fine-tuning, experiments, sweeps, scalability, reports
//!
//! See the crate examples for one runnable program per capability.

pub mod cli;
pub mod coder;
pub mod config;
pub mod curriculum;
pub mod error;
pub mod eval;
pub mod graph;
pub mod nn;
pub mod signals;
pub mod tape;
pub mod trainer;

pub use error::{Error, Result};
