use crate::ir::{Conv1d, Dense, Graph, Node, Op, Tensor};
use crate::prune::rank::l1_rank;
use crate::{Error, Result};

/// Slack applied before rounding up so that rates such as `0.09 * 10`
/// (which is `0.8999…` in binary) do not leave an extra neuron behind.
const CEIL_SLACK: f64 = 1e-9;

/// `m = ceil(M · (1 − p))`, never below one.
pub fn remaining_outputs(width: usize, rate: f64) -> usize {
    let m = (width as f64 * (1.0 - rate) - CEIL_SLACK).ceil();
    (m.max(1.0) as usize).min(width)
}

/// A pruned copy of a graph plus the bookkeeping that relates it to the
/// original.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedVariant {
    /// Exploration step that produced the variant (0 for direct calls).
    pub j: usize,
    pub graph: Graph,
    /// Per trainable layer: retained output indices of the original layer,
    /// ascending.
    pub kept_indices: Vec<Vec<usize>>,
    /// Per trainable layer: remaining output count `m_i`.
    pub widths: Vec<usize>,
    pub rates: Vec<f64>,
    /// Positions of the original graph output still produced, when the last
    /// trainable layer lost outputs.
    pub output_map: Option<Vec<usize>>,
    pub full_output_len: usize,
}

impl PrunedVariant {
    /// Scatters a variant output back into the original output layout; the
    /// removed positions read as zero.
    pub fn expand_output(&self, out: &[f32]) -> Vec<f32> {
        match &self.output_map {
            None => out.to_vec(),
            Some(map) => {
                let mut full = vec![0.0; self.full_output_len];
                for (&pos, &v) in map.iter().zip(out) {
                    full[pos] = v;
                }
                full
            }
        }
    }
}

fn select_axis0(t: &Tensor, keep: &[usize]) -> Tensor {
    let inner: usize = t.shape[1..].iter().product();
    let mut data = Vec::with_capacity(keep.len() * inner);
    for &r in keep {
        data.extend_from_slice(&t.data[r * inner..(r + 1) * inner]);
    }
    let mut shape = t.shape.clone();
    shape[0] = keep.len();
    Tensor {
        name: t.name.clone(),
        shape,
        data,
    }
}

fn select_axis1(t: &Tensor, keep: &[usize]) -> Tensor {
    let (rows, cols) = (t.shape[0], t.shape[1]);
    let inner: usize = t.shape[2..].iter().product();
    let mut data = Vec::with_capacity(rows * keep.len() * inner);
    for r in 0..rows {
        for &c in keep {
            let start = (r * cols + c) * inner;
            data.extend_from_slice(&t.data[start..start + inner]);
        }
    }
    let mut shape = t.shape.clone();
    shape[1] = keep.len();
    Tensor {
        name: t.name.clone(),
        shape,
        data,
    }
}

/// Prunes each trainable layer `i` to `ceil(M_i · (1 − rates[i]))` outputs,
/// keeping the highest-ℓ¹ ones.
///
/// Removed outputs are propagated down the chain: activations, pooling and
/// padding keep the channel index set unchanged, `Flatten` expands channel
/// indices into the positions they occupy, and the next trainable layer (or
/// bias `Add`) drops the matching inputs. Ranking always uses the layer's
/// original weights.
pub fn prune_structural(g: &Graph, rates: &[f64]) -> Result<PrunedVariant> {
    let layer_count = g.trainable_indices().len();
    if rates.len() != layer_count {
        return Err(Error::Prune(format!(
            "{} rates given for {layer_count} trainable layers",
            rates.len()
        )));
    }
    if let Some(bad) = rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(Error::Prune(format!("pruning rate {bad} outside [0, 1)")));
    }

    let shapes = g.shapes();
    let last_trainable = *g
        .trainable_indices()
        .last()
        .expect("graph has a trainable layer");
    let mut pending: Option<Vec<usize>> = None;
    let mut layer = 0;
    let mut kept_indices = Vec::with_capacity(layer_count);
    let mut widths = Vec::with_capacity(layer_count);
    let mut nodes = Vec::with_capacity(g.nodes().len());

    for (i, node) in g.nodes().iter().enumerate() {
        let in_shape = &shapes[i];
        let op = if node.is_trainable() {
            let full = node.output_width().unwrap();
            let m = remaining_outputs(full, rates[layer]);
            let keep: Vec<usize> = if m < full {
                let mut k = l1_rank(node)?[..m].to_vec();
                k.sort_unstable();
                k
            } else {
                (0..full).collect()
            };
            let op = prune_trainable(
                &node.op,
                pending.as_deref(),
                (m < full).then_some(&keep[..]),
            );
            pending = (m < full).then(|| keep.clone());
            kept_indices.push(keep);
            widths.push(m);
            layer += 1;
            op
        } else {
            match (&node.op, pending.as_mut()) {
                (op, None) => op.clone(),
                (Op::Add(b), Some(keep)) => Op::Add(select_axis0(b, keep)),
                (Op::Flatten, Some(keep)) => {
                    if let [_, len] = in_shape[..] {
                        *keep = keep.iter().flat_map(|&c| c * len..(c + 1) * len).collect();
                    }
                    Op::Flatten
                }
                (Op::Softmax, Some(_)) if i < last_trainable => {
                    return Err(Error::Propagation {
                        node: node.id.clone(),
                        op: "Softmax (normalization couples the removed entries)".into(),
                    })
                }
                (op, Some(_)) => op.clone(),
            }
        };
        nodes.push(Node::new(node.id.clone(), op));
    }

    let graph = Graph::new(g.input_shape().to_vec(), nodes)?;
    Ok(PrunedVariant {
        j: 0,
        graph,
        kept_indices,
        widths,
        rates: rates.to_vec(),
        output_map: pending,
        full_output_len: g.output_len(),
    })
}

fn prune_trainable(op: &Op, inputs: Option<&[usize]>, outputs: Option<&[usize]>) -> Op {
    let reshape = |w: &Tensor| -> Tensor {
        let w = inputs.map_or_else(|| w.clone(), |keep| select_axis1(w, keep));
        outputs.map_or(w.clone(), |keep| select_axis0(&w, keep))
    };
    let rebias = |b: &Option<Tensor>| -> Option<Tensor> {
        b.as_ref()
            .map(|b| outputs.map_or_else(|| b.clone(), |keep| select_axis0(b, keep)))
    };
    match op {
        Op::FullyConnected(d) => Op::FullyConnected(Dense {
            weights: reshape(&d.weights),
            bias: rebias(&d.bias),
            activation: d.activation,
        }),
        Op::Conv1d(c) => Op::Conv1d(Conv1d {
            weights: reshape(&c.weights),
            bias: rebias(&c.bias),
            ..c.clone()
        }),
        Op::MatMul(w) => Op::MatMul(reshape(w)),
        _ => unreachable!("only trainable ops are pruned"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Activation;

    fn fc(id: &str, out: usize, inp: usize, seed: f32) -> Node {
        let w = (0..out * inp)
            .map(|i| ((i as f32 + seed) * 0.37).sin())
            .collect();
        Node::new(
            id,
            Op::FullyConnected(Dense {
                weights: Tensor::new("w", vec![out, inp], w).unwrap(),
                bias: Some(
                    Tensor::new("b", vec![out], (0..out).map(|i| i as f32).collect()).unwrap(),
                ),
                activation: None,
            }),
        )
    }

    #[test]
    fn remaining_output_formula() {
        assert_eq!(remaining_outputs(128, 0.07), 120);
        assert_eq!(remaining_outputs(128, 0.0), 128);
        assert_eq!(remaining_outputs(10, 0.09 * 10.0), 1);
        assert_eq!(remaining_outputs(3, 0.99), 1);
    }

    #[test]
    fn zero_rates_are_identity() {
        let g = Graph::new(vec![4], vec![fc("a", 4, 4, 0.0), fc("b", 2, 4, 1.0)]).unwrap();
        let v = prune_structural(&g, &[0.0, 0.0]).unwrap();
        assert_eq!(v.graph, g);
        assert!(v.output_map.is_none());
    }

    #[test]
    fn next_layer_loses_columns() {
        let g = Graph::new(
            vec![4],
            vec![
                fc("a", 4, 4, 0.0),
                Node::new("r", Op::Activation(Activation::Relu)),
                fc("b", 2, 4, 1.0),
            ],
        )
        .unwrap();
        let v = prune_structural(&g, &[0.5, 0.0]).unwrap();
        let nodes = v.graph.nodes();
        assert_eq!(nodes[0].weights().unwrap().shape, vec![2, 4]);
        assert_eq!(nodes[0].bias().unwrap().shape, vec![2]);
        assert_eq!(nodes[2].weights().unwrap().shape, vec![2, 2]);
        assert_eq!(v.graph.output_shape(), &[2]);
        assert_eq!(v.widths, vec![2, 2]);
    }

    #[test]
    fn rate_one_is_rejected() {
        let g = Graph::new(vec![4], vec![fc("a", 4, 4, 0.0)]).unwrap();
        assert!(prune_structural(&g, &[1.0]).is_err());
        assert!(prune_structural(&g, &[0.1, 0.1]).is_err());
    }

    #[test]
    fn softmax_between_layers_blocks_propagation() {
        let g = Graph::new(
            vec![4],
            vec![
                fc("a", 4, 4, 0.0),
                Node::new("sm", Op::Softmax),
                fc("b", 2, 4, 1.0),
            ],
        )
        .unwrap();
        assert!(matches!(
            prune_structural(&g, &[0.5, 0.0]),
            Err(Error::Propagation { ref node, .. }) if node == "sm"
        ));
    }

    #[test]
    fn pruned_tail_is_scattered_back() {
        let g = Graph::new(vec![3], vec![fc("a", 4, 3, 0.0)]).unwrap();
        let v = prune_structural(&g, &[0.5]).unwrap();
        let map = v.output_map.clone().unwrap();
        assert_eq!(map.len(), 2);
        let full = v.expand_output(&[7.0, 9.0]);
        assert_eq!(full.len(), 4);
        assert_eq!(full[map[0]], 7.0);
        assert_eq!(full[map[1]], 9.0);
    }
}
