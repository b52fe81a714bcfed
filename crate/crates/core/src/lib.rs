//! Pruning, design-space exploration and C code generation for small
//! feed-forward neural networks.
//!
//! The pipeline mirrors the stages of the `optc` tool:
//!
//! * [`ir`] holds the chain-shaped network graph, its file format, shape
//!   inference and cost accounting.
//! * [`interp`] is the float32 reference evaluator and the quality metrics.
//! * [`prune`] implements ℓ¹ structural pruning, per-layer sensitivity
//!   analysis and global weighted pruning schedules.
//! * [`opt`] contains the graph rewrite passes run before code generation.
//! * [`codegen`] plans the activation arena and emits standalone C.
//! * [`explore`] drives the whole loop and extracts the Pareto front.

pub mod codegen;
mod error;
pub mod explore;
pub mod interp;
pub mod ir;
pub mod opt;
pub mod prune;
pub mod zoo;

pub use error::{Error, Result};
