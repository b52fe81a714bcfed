use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codegen::emit::EmittedProgram;
use crate::ir::OpKind;

/// Constants added on top of the model-attributable bytes. Both default to
/// zero so that ROM is the weight bytes and RAM the activation buffers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootprintModel {
    /// Code bytes charged per emitted node of the given kind.
    #[serde(default)]
    pub code_allowance: BTreeMap<OpKind, usize>,
    #[serde(default)]
    pub stack_allowance: usize,
}

/// `(rom, ram)`: weights plus per-node code allowance, and arena plus the
/// caller's input and output buffers plus the stack allowance.
pub fn estimate_footprint(p: &EmittedProgram, model: &FootprintModel) -> (usize, usize) {
    let code: usize = p
        .op_kinds
        .iter()
        .map(|k| model.code_allowance.get(k).copied().unwrap_or(0))
        .sum();
    let rom = p.weight_bytes + code;
    let ram = p.arena_bytes + 4 * (p.input_len + p.output_len) + model.stack_allowance;
    (rom, ram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::{emit_graph, EmitOptions};
    use crate::ir::{Activation, Graph, Node, Op};

    #[test]
    fn passthrough_rom_is_code_only() {
        let g = Graph::passthrough(
            vec![4],
            vec![Node::new("r", Op::Activation(Activation::Relu))],
        )
        .unwrap();
        let p = emit_graph(&g, EmitOptions::default()).unwrap();
        let mut model = FootprintModel::default();
        model.code_allowance.insert(OpKind::ReLU, 96);
        model.stack_allowance = 64;
        assert_eq!(estimate_footprint(&p, &model), (96, 32 + 64));
        assert_eq!(estimate_footprint(&p, &FootprintModel::default()).0, 0);
    }
}
