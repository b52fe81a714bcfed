//! Graph rewrites applied before code generation.
//!
//! [`optimize`] runs padding elision, MatMul+Add → GEMM consolidation and
//! activation fusion, in that order. Fusion only tags the trainable node
//! with its activation; the merged loop is produced by the code generator.
//! Every pass preserves the forward semantics and is idempotent.

use crate::ir::{Activation, Conv1d, Dense, Graph, Node, Op, Padding, Tensor};
use crate::Result;

pub fn optimize(g: &Graph) -> Result<Graph> {
    let g = elide_padding(g)?;
    let g = fuse_matmul_add(&g)?;
    fuse_activation(&g)
}

fn rebuild(g: &Graph, nodes: Vec<Node>) -> Result<Graph> {
    Graph::passthrough(g.input_shape().to_vec(), nodes)
}

/// Replaces each `MatMul` followed by a bias `Add` with one fully connected
/// node. A bias-free `FullyConnected` followed by `Add` absorbs the bias too.
pub fn fuse_matmul_add(g: &Graph) -> Result<Graph> {
    let mut out: Vec<Node> = Vec::with_capacity(g.nodes().len());
    let mut iter = g.nodes().iter().peekable();
    while let Some(node) = iter.next() {
        let weights = match &node.op {
            Op::MatMul(w) => Some(w),
            Op::FullyConnected(Dense {
                weights,
                bias: None,
                activation: None,
            }) => Some(weights),
            _ => None,
        };
        let fused = match (weights, iter.peek()) {
            (Some(w), Some(next)) => match &next.op {
                Op::Add(b) if b.len() == w.shape[0] => Some(fc(node, w, b)),
                _ => None,
            },
            _ => None,
        };
        match fused {
            Some(f) => {
                iter.next();
                out.push(f);
            }
            None => out.push(node.clone()),
        }
    }
    rebuild(g, out)
}

fn fc(node: &Node, w: &Tensor, b: &Tensor) -> Node {
    Node::new(
        node.id.clone(),
        Op::FullyConnected(Dense {
            weights: w.clone(),
            bias: Some(b.clone()),
            activation: None,
        }),
    )
}

/// Folds an activation into the preceding fully connected or convolution
/// node. A node carries at most one fused activation.
pub fn fuse_activation(g: &Graph) -> Result<Graph> {
    let mut out: Vec<Node> = Vec::with_capacity(g.nodes().len());
    for node in g.nodes() {
        if let Op::Activation(act) = node.op {
            if let Some(prev) = out.last_mut() {
                if try_fuse(prev, act) {
                    continue;
                }
            }
        }
        out.push(node.clone());
    }
    rebuild(g, out)
}

fn try_fuse(prev: &mut Node, act: Activation) -> bool {
    let slot = match &mut prev.op {
        Op::FullyConnected(d) => &mut d.activation,
        Op::Conv1d(c) => &mut c.activation,
        _ => return false,
    };
    if slot.is_some() {
        return false;
    }
    *slot = Some(act);
    true
}

/// Absorbs explicit `Pad` nodes into the following convolution and drops
/// zero-width pads. Consecutive pads are merged first. A pad that does not
/// feed a convolution stays in place and is reported in the returned
/// warnings.
pub fn elide_padding_report(g: &Graph) -> Result<(Graph, Vec<String>)> {
    let mut out: Vec<Node> = Vec::with_capacity(g.nodes().len());
    let mut warnings = Vec::new();
    // Pending merged pad and the id of the first pad node in the run.
    let mut pending: Option<(String, Padding)> = None;

    for node in g.nodes() {
        match &node.op {
            Op::Pad(p) => {
                pending = Some(match pending.take() {
                    Some((id, acc)) => (id, Padding::new(acc.left + p.left, acc.right + p.right)),
                    None => (node.id.clone(), *p),
                });
            }
            Op::Conv1d(c) => {
                let mut c = c.clone();
                if let Some((_, p)) = pending.take() {
                    c.padding = Padding::new(c.padding.left + p.left, c.padding.right + p.right);
                }
                out.push(Node::new(node.id.clone(), Op::Conv1d(Conv1d { ..c })));
            }
            _ => {
                if let Some((id, p)) = pending.take() {
                    flush_pad(&mut out, &mut warnings, id, p);
                }
                out.push(node.clone());
            }
        }
    }
    if let Some((id, p)) = pending.take() {
        flush_pad(&mut out, &mut warnings, id, p);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok((rebuild(g, out)?, warnings))
}

fn flush_pad(out: &mut Vec<Node>, warnings: &mut Vec<String>, id: String, p: Padding) {
    if p.is_zero() {
        return;
    }
    warnings.push(format!(
        "pad `{id}` ({}, {}) is not followed by a convolution; kept as an explicit copy",
        p.left, p.right
    ));
    out.push(Node::new(id, Op::Pad(p)));
}

pub fn elide_padding(g: &Graph) -> Result<Graph> {
    elide_padding_report(g).map(|(g, _)| g)
}
