//! Structural pruning.
//!
//! Whole output neurons (rows of a fully connected layer) or filters (of a
//! convolution) are removed, lowest ℓ¹ norm first, and the matching input
//! columns or channels of the next trainable layer go with them. The result
//! is again a dense network, just narrower.

mod gwp;
mod rank;
mod sensitivity;
mod structural;

pub use gwp::{gwp_variant, PruneSchedule};
pub use rank::{l1_norms, l1_rank};
pub use sensitivity::{
    evaluate_variant, sensitivity_analysis, sensitivity_analysis_with, LayerSensitivity,
    DEFAULT_PROBE_RATES,
};
pub use structural::{prune_structural, remaining_outputs, PrunedVariant};
