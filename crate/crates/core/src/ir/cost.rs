use serde::{Deserialize, Serialize};

use crate::ir::{num_elements, Graph, Op};

/// Static cost summary of a graph. Byte counts assume float32 storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub param_count: u64,
    pub param_bytes: u64,
    /// Multiply and add counted separately.
    pub flops: u64,
    /// Every activation edge (input and output included) stored separately.
    pub intermediate_bytes_naive: u64,
    pub rom_estimate_bytes: u64,
    /// Largest input+output pair of any single node.
    pub ram_estimate_bytes: u64,
}

pub fn count_cost(g: &Graph) -> CostReport {
    let shapes = g.shapes();
    let mut params = 0u64;
    let mut flops = 0u64;
    let mut peak_pair = 0u64;
    for (i, node) in g.nodes().iter().enumerate() {
        let in_elems = num_elements(&shapes[i]) as u64;
        let out_elems = num_elements(&shapes[i + 1]) as u64;
        params += node.param_count() as u64;
        flops += match &node.op {
            Op::FullyConnected(d) => {
                2 * (d.out_features() * d.in_features()) as u64
                    + d.activation.map_or(0, |_| out_elems)
            }
            Op::MatMul(w) => 2 * (w.shape[0] * w.shape[1]) as u64,
            Op::Conv1d(c) => {
                let out_len = shapes[i + 1][1] as u64;
                2 * (c.out_channels() * c.in_channels() * c.kernel()) as u64 * out_len
                    + c.activation.map_or(0, |_| out_elems)
            }
            Op::Add(_) | Op::Activation(_) | Op::Softmax | Op::MaxPool1d(_) | Op::AvgPool1d(_) => {
                out_elems
            }
            Op::Flatten | Op::Pad(_) => 0,
        };
        peak_pair = peak_pair.max(4 * (in_elems + out_elems));
    }
    let intermediate: u64 = shapes.iter().map(|s| num_elements(s) as u64).sum();
    CostReport {
        param_count: params,
        param_bytes: 4 * params,
        flops,
        intermediate_bytes_naive: 4 * intermediate,
        rom_estimate_bytes: 4 * params,
        ram_estimate_bytes: peak_pair,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Dense, Node, Tensor};

    fn fc(id: &str, out: usize, inp: usize, bias: bool) -> Node {
        Node::new(
            id,
            Op::FullyConnected(Dense {
                weights: Tensor::new("w", vec![out, inp], vec![0.5; out * inp]).unwrap(),
                bias: bias.then(|| Tensor::new("b", vec![out], vec![0.0; out]).unwrap()),
                activation: None,
            }),
        )
    }

    #[test]
    fn fc_640_to_128() {
        let g = Graph::new(vec![640], vec![fc("fc0", 128, 640, true)]).unwrap();
        let c = count_cost(&g);
        assert_eq!(c.param_count, 82_048);
        assert_eq!(c.flops, 163_840);
        assert_eq!(c.param_bytes, 4 * c.param_count);
    }

    #[test]
    fn bias_free_fc() {
        let g = Graph::new(vec![8], vec![fc("fc", 8, 8, false)]).unwrap();
        assert_eq!(count_cost(&g).param_count, 64);
    }
}
