//! Float32 reference evaluator.
//!
//! This is the oracle the rest of the pipeline is checked against: the
//! sensitivity analysis scores pruned variants with it and emitted C code is
//! compared to it. Accumulation order matches the emitted loop nests.

mod dataset;
mod metrics;

use crate::ir::{num_elements, Graph, Node, Op};
use crate::{Error, Result};

pub use dataset::{Dataset, Targets, TaskKind, DATASET_MAGIC};
pub use metrics::{
    evaluate, evaluate_outputs, predict_all, roc_auc, Direction, MetricKind, QualityMetric,
};

/// Runs the graph on one input vector (flattened row-major).
pub fn forward(g: &Graph, input: &[f32]) -> Result<Vec<f32>> {
    if input.len() != g.input_len() {
        return Err(Error::InputLength {
            expected: g.input_len(),
            got: input.len(),
        });
    }
    let shapes = g.shapes();
    let mut current = input.to_vec();
    for (i, node) in g.nodes().iter().enumerate() {
        current = run_node(node, &shapes[i], &shapes[i + 1], &current);
    }
    Ok(current)
}

pub(crate) fn run_node(
    node: &Node,
    in_shape: &[usize],
    out_shape: &[usize],
    x: &[f32],
) -> Vec<f32> {
    let mut y = vec![0.0f32; num_elements(out_shape)];
    match &node.op {
        Op::FullyConnected(d) => {
            let (outs, ins) = (d.out_features(), d.in_features());
            for (o, out) in y.iter_mut().enumerate() {
                let row = &d.weights.data[o * ins..(o + 1) * ins];
                let mut acc = d.bias.as_ref().map_or(0.0, |b| b.data[o]);
                for (w, v) in row.iter().zip(x) {
                    acc += w * v;
                }
                *out = d.activation.map_or(acc, |a| a.apply(acc));
            }
            debug_assert_eq!(y.len(), outs);
        }
        Op::MatMul(w) => {
            let ins = w.shape[1];
            for (o, out) in y.iter_mut().enumerate() {
                let mut acc = 0.0f32;
                for (wv, v) in w.data[o * ins..(o + 1) * ins].iter().zip(x) {
                    acc += wv * v;
                }
                *out = acc;
            }
        }
        Op::Conv1d(c) => {
            let (in_ch, len) = (in_shape[0], in_shape[1]);
            let out_len = out_shape[1];
            let k = c.kernel();
            let left = c.padding.left as isize;
            for o in 0..c.out_channels() {
                let filter = &c.weights.data[o * in_ch * k..(o + 1) * in_ch * k];
                for t in 0..out_len {
                    let mut acc = c.bias.as_ref().map_or(0.0, |b| b.data[o]);
                    let start = (t * c.stride) as isize - left;
                    for ch in 0..in_ch {
                        let row = &x[ch * len..(ch + 1) * len];
                        for kk in 0..k {
                            let pos = start + kk as isize;
                            if pos >= 0 && (pos as usize) < len {
                                acc += filter[ch * k + kk] * row[pos as usize];
                            }
                        }
                    }
                    y[o * out_len + t] = c.activation.map_or(acc, |a| a.apply(acc));
                }
            }
        }
        Op::Add(b) => {
            let inner = x.len() / b.len();
            for (i, (out, v)) in y.iter_mut().zip(x).enumerate() {
                *out = v + b.data[i / inner];
            }
        }
        Op::Activation(a) => {
            for (out, &v) in y.iter_mut().zip(x) {
                *out = a.apply(v);
            }
        }
        Op::MaxPool1d(p) | Op::AvgPool1d(p) => {
            let (channels, len) = (in_shape[0], in_shape[1]);
            let out_len = out_shape[1];
            let is_max = matches!(node.op, Op::MaxPool1d(_));
            for ch in 0..channels {
                let row = &x[ch * len..(ch + 1) * len];
                for t in 0..out_len {
                    let window = &row[t * p.stride..t * p.stride + p.width];
                    y[ch * out_len + t] = if is_max {
                        window[1..]
                            .iter()
                            .fold(window[0], |m, &v| if v > m { v } else { m })
                    } else {
                        let mut sum = 0.0f32;
                        for &v in window {
                            sum += v;
                        }
                        sum / p.width as f32
                    };
                }
            }
        }
        Op::Pad(p) => {
            let (channels, len) = (in_shape[0], in_shape[1]);
            let out_len = out_shape[1];
            for ch in 0..channels {
                y[ch * out_len + p.left..ch * out_len + p.left + len]
                    .copy_from_slice(&x[ch * len..(ch + 1) * len]);
            }
        }
        Op::Flatten => y.copy_from_slice(x),
        Op::Softmax => {
            let max = x[1..].iter().fold(x[0], |m, &v| if v > m { v } else { m });
            let mut sum = 0.0f32;
            for (out, &v) in y.iter_mut().zip(x) {
                *out = (v - max).exp();
                sum += *out;
            }
            for out in y.iter_mut() {
                *out /= sum;
            }
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Activation, Conv1d, Dense, Padding, Tensor};

    #[test]
    fn identity_fc_relu_passthrough() {
        let mut w = vec![0.0; 16];
        for i in 0..4 {
            w[i * 4 + i] = 1.0;
        }
        let g = Graph::new(
            vec![4],
            vec![
                Node::new(
                    "fc",
                    Op::FullyConnected(Dense {
                        weights: Tensor::new("w", vec![4, 4], w).unwrap(),
                        bias: Some(Tensor::new("b", vec![4], vec![0.0; 4]).unwrap()),
                        activation: None,
                    }),
                ),
                Node::new("relu", Op::Activation(Activation::Relu)),
            ],
        )
        .unwrap();
        let x = [0.0, 1.5, 2.25, 7.0];
        assert_eq!(forward(&g, &x).unwrap(), x.to_vec());
    }

    #[test]
    fn box_filter_conv() {
        let g = Graph::new(
            vec![1, 4],
            vec![Node::new(
                "conv",
                Op::Conv1d(Conv1d {
                    weights: Tensor::new("w", vec![1, 1, 3], vec![1.0; 3]).unwrap(),
                    bias: None,
                    stride: 1,
                    padding: Padding::default(),
                    activation: None,
                }),
            )],
        )
        .unwrap();
        assert_eq!(forward(&g, &[1.0; 4]).unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn wrong_input_length() {
        let g = Graph::new(
            vec![2],
            vec![Node::new(
                "m",
                Op::MatMul(Tensor::new("w", vec![1, 2], vec![1.0, 1.0]).unwrap()),
            )],
        )
        .unwrap();
        assert!(matches!(
            forward(&g, &[1.0]),
            Err(Error::InputLength {
                expected: 2,
                got: 1
            })
        ));
    }
}
