use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::ir::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignSpaceMode {
    /// One rate shared by every layer: `max_i M_i` distinct configurations.
    Global,
    /// Independent rate per layer: `prod_i M_i` configurations.
    LayerWise,
}

pub fn design_space_size(g: &Graph, mode: DesignSpaceMode) -> BigUint {
    design_space_size_from_widths(&g.layer_widths(), mode)
}

pub fn design_space_size_from_widths(widths: &[usize], mode: DesignSpaceMode) -> BigUint {
    match mode {
        DesignSpaceMode::Global => BigUint::from(widths.iter().copied().max().unwrap_or(0)),
        DesignSpaceMode::LayerWise => widths
            .iter()
            .fold(BigUint::from(1u32), |acc, &m| acc * BigUint::from(m)),
    }
}
