//! Network graph representation.
//!
//! A [`Graph`] is a linear chain of [`Node`]s. Every node consumes the output
//! of its predecessor (the first node consumes the graph input) and the edge
//! shapes are inferred once, when the graph is constructed. Graphs are
//! immutable after construction; rewrites build a new graph.

mod cost;
mod design_space;
mod format;
mod shape;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use cost::{count_cost, CostReport};
pub use design_space::{design_space_size, design_space_size_from_widths, DesignSpaceMode};
pub use format::{load_graph, save_graph, WEIGHTS_FILE};
pub use shape::{infer_shapes, node_output_shape};

/// Concrete dimensions of a tensor. Activations are either `[features]` or
/// `[channels, length]`.
pub type Dims = Vec<usize>;

pub fn num_elements(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Constant tensor (weights or biases), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Dims,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Dims, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Schema(format!(
                "tensor `{name}` has invalid shape {shape:?}"
            )));
        }
        if num_elements(&shape) != data.len() {
            return Err(Error::Schema(format!(
                "tensor `{name}` has shape {shape:?} but {} values",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Schema(format!(
                "tensor `{name}` contains non-finite value {bad}"
            )));
        }
        Ok(Tensor { name, shape, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Element-wise activation, either standalone or fused into a trainable op.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

/// Zero padding along the length axis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Padding {
    pub left: usize,
    pub right: usize,
}

impl Padding {
    pub fn new(left: usize, right: usize) -> Self {
        Padding { left, right }
    }

    pub fn is_zero(&self) -> bool {
        self.left == 0 && self.right == 0
    }

    pub fn total(&self) -> usize {
        self.left + self.right
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pool {
    pub width: usize,
    pub stride: usize,
}

/// Fully connected layer, weights `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Tensor,
    pub bias: Option<Tensor>,
    pub activation: Option<Activation>,
}

impl Dense {
    pub fn out_features(&self) -> usize {
        self.weights.shape[0]
    }

    pub fn in_features(&self) -> usize {
        self.weights.shape[1]
    }
}

/// 1-D convolution, weights `[out_channels, in_channels, kernel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub weights: Tensor,
    pub bias: Option<Tensor>,
    pub stride: usize,
    pub padding: Padding,
    pub activation: Option<Activation>,
}

impl Conv1d {
    pub fn out_channels(&self) -> usize {
        self.weights.shape[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape[1]
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape[2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    FullyConnected(Dense),
    Conv1d(Conv1d),
    /// Bias-free matrix product, weights `[out, in]`. Exporters often emit
    /// this followed by an [`Op::Add`].
    MatMul(Tensor),
    /// Bias addition, broadcast over the length axis for `[C, L]` inputs.
    Add(Tensor),
    Activation(Activation),
    MaxPool1d(Pool),
    AvgPool1d(Pool),
    Flatten,
    Pad(Padding),
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpKind {
    FullyConnected,
    Conv1D,
    MatMul,
    Add,
    ReLU,
    Tanh,
    Sigmoid,
    MaxPool1D,
    AvgPool1D,
    Flatten,
    Pad,
    Softmax,
}

impl OpKind {
    pub const ALL: [OpKind; 12] = [
        OpKind::FullyConnected,
        OpKind::Conv1D,
        OpKind::MatMul,
        OpKind::Add,
        OpKind::ReLU,
        OpKind::Tanh,
        OpKind::Sigmoid,
        OpKind::MaxPool1D,
        OpKind::AvgPool1D,
        OpKind::Flatten,
        OpKind::Pad,
        OpKind::Softmax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::FullyConnected => "FullyConnected",
            OpKind::Conv1D => "Conv1D",
            OpKind::MatMul => "MatMul",
            OpKind::Add => "Add",
            OpKind::ReLU => "ReLU",
            OpKind::Tanh => "Tanh",
            OpKind::Sigmoid => "Sigmoid",
            OpKind::MaxPool1D => "MaxPool1D",
            OpKind::AvgPool1D => "AvgPool1D",
            OpKind::Flatten => "Flatten",
            OpKind::Pad => "Pad",
            OpKind::Softmax => "Softmax",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        OpKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Op {
    pub fn kind(&self) -> OpKind {
        match self {
            Op::FullyConnected(_) => OpKind::FullyConnected,
            Op::Conv1d(_) => OpKind::Conv1D,
            Op::MatMul(_) => OpKind::MatMul,
            Op::Add(_) => OpKind::Add,
            Op::Activation(Activation::Relu) => OpKind::ReLU,
            Op::Activation(Activation::Tanh) => OpKind::Tanh,
            Op::Activation(Activation::Sigmoid) => OpKind::Sigmoid,
            Op::MaxPool1d(_) => OpKind::MaxPool1D,
            Op::AvgPool1d(_) => OpKind::AvgPool1D,
            Op::Flatten => OpKind::Flatten,
            Op::Pad(_) => OpKind::Pad,
            Op::Softmax => OpKind::Softmax,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub op: Op,
}

impl Node {
    pub fn new(id: impl Into<String>, op: Op) -> Self {
        Node { id: id.into(), op }
    }

    /// Layers with trainable weights whose outputs can be pruned.
    pub fn is_trainable(&self) -> bool {
        matches!(
            self.op,
            Op::FullyConnected(_) | Op::Conv1d(_) | Op::MatMul(_)
        )
    }

    /// Number of output neurons or filters (`M_i`) of a trainable layer.
    pub fn output_width(&self) -> Option<usize> {
        match &self.op {
            Op::FullyConnected(d) => Some(d.out_features()),
            Op::Conv1d(c) => Some(c.out_channels()),
            Op::MatMul(w) => Some(w.shape[0]),
            _ => None,
        }
    }

    pub fn weights(&self) -> Option<&Tensor> {
        match &self.op {
            Op::FullyConnected(d) => Some(&d.weights),
            Op::Conv1d(c) => Some(&c.weights),
            Op::MatMul(w) => Some(w),
            _ => None,
        }
    }

    pub fn bias(&self) -> Option<&Tensor> {
        match &self.op {
            Op::FullyConnected(d) => d.bias.as_ref(),
            Op::Conv1d(c) => c.bias.as_ref(),
            Op::Add(b) => Some(b),
            _ => None,
        }
    }

    pub fn fused_activation(&self) -> Option<Activation> {
        match &self.op {
            Op::FullyConnected(d) => d.activation,
            Op::Conv1d(c) => c.activation,
            _ => None,
        }
    }

    /// Number of constant values stored for this node.
    pub fn param_count(&self) -> usize {
        self.weights().map_or(0, Tensor::len) + self.bias().map_or(0, Tensor::len)
    }

    fn validate(&self) -> Result<()> {
        let mismatch = |detail: String| Error::ShapeMismatch {
            node: self.id.clone(),
            detail,
        };
        let check_bias = |bias: &Option<Tensor>, width: usize| -> Result<()> {
            if let Some(b) = bias {
                if b.shape != [width] {
                    return Err(mismatch(format!(
                        "bias shape {:?} does not match {width} outputs",
                        b.shape
                    )));
                }
            }
            Ok(())
        };
        match &self.op {
            Op::FullyConnected(d) => {
                if d.weights.shape.len() != 2 {
                    return Err(mismatch(format!(
                        "FullyConnected weights must be [out, in], got {:?}",
                        d.weights.shape
                    )));
                }
                check_bias(&d.bias, d.out_features())
            }
            Op::MatMul(w) => {
                if w.shape.len() != 2 {
                    return Err(mismatch(format!(
                        "MatMul weights must be [out, in], got {:?}",
                        w.shape
                    )));
                }
                Ok(())
            }
            Op::Conv1d(c) => {
                if c.weights.shape.len() != 3 {
                    return Err(mismatch(format!(
                        "Conv1D weights must be [out_ch, in_ch, k], got {:?}",
                        c.weights.shape
                    )));
                }
                if c.stride == 0 {
                    return Err(Error::Schema(format!(
                        "node `{}`: stride must be ≥ 1",
                        self.id
                    )));
                }
                check_bias(&c.bias, c.out_channels())
            }
            Op::Add(b) => {
                if b.shape.len() != 1 {
                    return Err(mismatch(format!(
                        "Add operand must be a vector, got {:?}",
                        b.shape
                    )));
                }
                Ok(())
            }
            Op::MaxPool1d(p) | Op::AvgPool1d(p) => {
                if p.width == 0 || p.stride == 0 {
                    return Err(Error::Schema(format!(
                        "node `{}`: pool width and stride must be ≥ 1",
                        self.id
                    )));
                }
                Ok(())
            }
            Op::Activation(_) | Op::Flatten | Op::Pad(_) | Op::Softmax => Ok(()),
        }
    }
}

/// Validated linear chain of nodes with inferred edge shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    input_shape: Dims,
    nodes: Vec<Node>,
    /// `shapes[0]` is the input, `shapes[i + 1]` the output of `nodes[i]`.
    shapes: Vec<Dims>,
}

impl Graph {
    /// Validates the chain, infers every edge shape and requires at least one
    /// trainable layer.
    pub fn new(input_shape: Dims, nodes: Vec<Node>) -> Result<Self> {
        let g = Self::passthrough(input_shape, nodes)?;
        if g.trainable_indices().is_empty() {
            return Err(Error::Schema("graph has no trainable layer".into()));
        }
        Ok(g)
    }

    /// Like [`Graph::new`] but accepts graphs without trainable layers.
    pub fn passthrough(input_shape: Dims, nodes: Vec<Node>) -> Result<Self> {
        if input_shape.is_empty() || input_shape.len() > 2 || input_shape.contains(&0) {
            return Err(Error::Schema(format!(
                "input shape must be [features] or [channels, length] with positive dims, got {input_shape:?}"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for node in &nodes {
            if node.id.is_empty() {
                return Err(Error::Schema("node with empty id".into()));
            }
            if !seen.insert(node.id.as_str()) {
                return Err(Error::Topology {
                    node: node.id.clone(),
                    detail: "duplicate node id".into(),
                });
            }
            node.validate()?;
        }
        let shapes = infer_shapes(&input_shape, &nodes)?;
        Ok(Graph {
            input_shape,
            nodes,
            shapes,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("shapes always contain the input")
    }

    pub fn input_len(&self) -> usize {
        num_elements(&self.input_shape)
    }

    pub fn output_len(&self) -> usize {
        num_elements(self.output_shape())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Edge shapes; entry `i` is the input of node `i`, the last entry is the
    /// graph output.
    pub fn shapes(&self) -> &[Dims] {
        &self.shapes
    }

    pub fn into_nodes(self) -> Vec<Node> {
        self.nodes
    }

    /// Node indices of the trainable layers `V`, in chain order.
    pub fn trainable_indices(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_trainable())
            .map(|(i, _)| i)
            .collect()
    }

    /// Output widths `M_i` of the trainable layers.
    pub fn layer_widths(&self) -> Vec<usize> {
        self.nodes.iter().filter_map(Node::output_width).collect()
    }

    pub fn layer_ids(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.is_trainable())
            .map(|n| n.id.as_str())
            .collect()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }
}
