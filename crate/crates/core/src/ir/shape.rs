use crate::ir::{Dims, Node, Op};
use crate::{Error, Result};

/// Infers every edge shape of the chain. The returned vector has one more
/// entry than `nodes`: the input shape followed by each node's output.
pub fn infer_shapes(input: &[usize], nodes: &[Node]) -> Result<Vec<Dims>> {
    let mut shapes = Vec::with_capacity(nodes.len() + 1);
    shapes.push(input.to_vec());
    for node in nodes {
        let next = node_output_shape(node, shapes.last().unwrap())?;
        shapes.push(next);
    }
    Ok(shapes)
}

/// `floor((len + pads - window) / stride) + 1`, rejecting non-positive results.
fn sliding_len(
    node: &Node,
    len: usize,
    pads: usize,
    window: usize,
    stride: usize,
) -> Result<usize> {
    let span = len as i64 + pads as i64 - window as i64;
    if span < 0 {
        return Err(Error::EmptyOutput {
            node: node.id.clone(),
            length: span.div_euclid(stride as i64) + 1,
        });
    }
    Ok(span as usize / stride + 1)
}

pub fn node_output_shape(node: &Node, input: &[usize]) -> Result<Dims> {
    let mismatch = |detail: String| Error::ShapeMismatch {
        node: node.id.clone(),
        detail,
    };
    let need_channels_length = |what: &str| -> Result<(usize, usize)> {
        match *input {
            [c, l] => Ok((c, l)),
            _ => Err(mismatch(format!(
                "{what} expects a [channels, length] input, got {input:?}"
            ))),
        }
    };
    match &node.op {
        Op::FullyConnected(d) => {
            let [features] = *input else {
                return Err(mismatch(format!(
                    "FullyConnected expects a flat input, got {input:?}; insert a Flatten"
                )));
            };
            if features != d.in_features() {
                return Err(mismatch(format!(
                    "weights expect {} inputs, incoming edge has {features}",
                    d.in_features()
                )));
            }
            Ok(vec![d.out_features()])
        }
        Op::MatMul(w) => {
            let [features] = *input else {
                return Err(mismatch(format!(
                    "MatMul expects a flat input, got {input:?}"
                )));
            };
            if features != w.shape[1] {
                return Err(mismatch(format!(
                    "weights expect {} inputs, incoming edge has {features}",
                    w.shape[1]
                )));
            }
            Ok(vec![w.shape[0]])
        }
        Op::Conv1d(c) => {
            let (channels, len) = need_channels_length("Conv1D")?;
            if channels != c.in_channels() {
                return Err(mismatch(format!(
                    "weights expect {} input channels, incoming edge has {channels}",
                    c.in_channels()
                )));
            }
            let out_len = sliding_len(node, len, c.padding.total(), c.kernel(), c.stride)?;
            Ok(vec![c.out_channels(), out_len])
        }
        Op::Add(b) => {
            let axis = input[0];
            if b.len() != axis {
                return Err(mismatch(format!(
                    "Add operand has {} entries, incoming edge {input:?} needs {axis}",
                    b.len()
                )));
            }
            Ok(input.to_vec())
        }
        Op::MaxPool1d(p) | Op::AvgPool1d(p) => {
            let (channels, len) = need_channels_length("pooling")?;
            let out_len = sliding_len(node, len, 0, p.width, p.stride)?;
            Ok(vec![channels, out_len])
        }
        Op::Pad(p) => {
            let (channels, len) = need_channels_length("Pad")?;
            Ok(vec![channels, len + p.total()])
        }
        Op::Flatten => Ok(vec![input.iter().product()]),
        Op::Activation(_) | Op::Softmax => Ok(input.to_vec()),
    }
}
