//! `model.json` + `weights.bin` serialization.
//!
//! The JSON document lists the chain of nodes and embeds a blob manifest;
//! the sibling `weights.bin` holds the concatenated little-endian float32
//! values the manifest points into.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ir::{
    num_elements, Activation, Conv1d, Dense, Graph, Node, Op, OpKind, Padding, Pool, Tensor,
};
use crate::{Error, Result};

pub const MODEL_FILE: &str = "model.json";
pub const WEIGHTS_FILE: &str = "weights.bin";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    input_shape: Vec<usize>,
    nodes: Vec<NodeEntry>,
    #[serde(default)]
    blobs: BTreeMap<String, BlobEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: String,
    op: String,
    #[serde(default, skip_serializing_if = "Attrs::is_empty")]
    attrs: Attrs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<String>,
    /// Optional explicit predecessor list; must name only the previous node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inputs: Option<Vec<String>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Attrs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    in_features: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_features: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    in_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pads: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    activation: Option<String>,
}

impl Attrs {
    fn is_empty(&self) -> bool {
        self.set_names().is_empty()
    }

    fn set_names(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        macro_rules! check {
            ($($field:ident),*) => {
                $(if self.$field.is_some() { names.push(stringify!($field)); })*
            };
        }
        check!(
            in_features,
            out_features,
            in_channels,
            out_channels,
            kernel_size,
            stride,
            pads,
            width,
            activation
        );
        names
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlobEntry {
    offset: u64,
    shape: Vec<usize>,
}

fn model_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MODEL_FILE)
    } else {
        path.to_path_buf()
    }
}

/// Loads and validates a model. `path` is either the JSON file or the
/// directory that contains `model.json`; weights are read from the sibling
/// `weights.bin`.
pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let json_path = model_path(path.as_ref());
    let text = fs::read_to_string(&json_path).map_err(|e| Error::file(&json_path, e))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", json_path.display())))?;
    let needs_blob = file
        .nodes
        .iter()
        .any(|n| n.weights.is_some() || n.bias.is_some());
    let blob_bytes = if needs_blob {
        let bin_path = json_path.with_file_name(WEIGHTS_FILE);
        fs::read(&bin_path).map_err(|e| Error::file(&bin_path, e))?
    } else {
        Vec::new()
    };
    graph_from_parts(file, &blob_bytes)
}

fn graph_from_parts(file: ModelFile, blob_bytes: &[u8]) -> Result<Graph> {
    let read_blob = |node: &str, name: &str| -> Result<Tensor> {
        let entry = file.blobs.get(name).ok_or_else(|| {
            Error::Schema(format!(
                "node `{node}`: blob `{name}` missing from manifest"
            ))
        })?;
        let count = num_elements(&entry.shape);
        let start = usize::try_from(entry.offset)
            .map_err(|_| Error::Schema(format!("blob `{name}`: offset too large")))?;
        let end = start + 4 * count;
        if start % 4 != 0 || end > blob_bytes.len() {
            return Err(Error::Schema(format!(
                "node `{node}`: blob `{name}` range {start}..{end} outside weights file of {} bytes",
                blob_bytes.len()
            )));
        }
        let data = blob_bytes[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Tensor::new(name, entry.shape.clone(), data)
            .map_err(|e| Error::Schema(format!("node `{node}`: {e}")))
    };

    let mut nodes = Vec::with_capacity(file.nodes.len());
    let mut previous: Option<&str> = None;
    for entry in &file.nodes {
        if let Some(inputs) = &entry.inputs {
            let expected = previous.unwrap_or("input");
            if inputs.len() != 1 || inputs[0] != expected {
                return Err(Error::Topology {
                    node: entry.id.clone(),
                    detail: format!(
                        "only linear chains are supported; expected inputs [\"{expected}\"], got {inputs:?}"
                    ),
                });
            }
        }
        let weights = entry
            .weights
            .as_deref()
            .map(|b| read_blob(&entry.id, b))
            .transpose()?;
        let bias = entry
            .bias
            .as_deref()
            .map(|b| read_blob(&entry.id, b))
            .transpose()?;
        nodes.push(node_from_entry(entry, weights, bias)?);
        previous = Some(&entry.id);
    }
    Graph::new(file.input_shape, nodes)
}

fn node_from_entry(
    entry: &NodeEntry,
    weights: Option<Tensor>,
    bias: Option<Tensor>,
) -> Result<Node> {
    let id = entry.id.as_str();
    let kind = OpKind::from_name(&entry.op).ok_or_else(|| Error::UnsupportedOp {
        node: id.to_string(),
        op: entry.op.clone(),
    })?;
    let attrs = &entry.attrs;
    let schema = |msg: String| Error::Schema(format!("node `{id}`: {msg}"));
    let allowed: &[&str] = match kind {
        OpKind::FullyConnected => &["in_features", "out_features", "activation"],
        OpKind::MatMul => &["in_features", "out_features"],
        OpKind::Conv1D => &[
            "in_channels",
            "out_channels",
            "kernel_size",
            "stride",
            "pads",
            "activation",
        ],
        OpKind::MaxPool1D | OpKind::AvgPool1D => &["width", "kernel_size", "stride"],
        OpKind::Pad => &["pads"],
        _ => &[],
    };
    if let Some(bad) = attrs.set_names().into_iter().find(|a| !allowed.contains(a)) {
        return Err(schema(format!("attribute `{bad}` not valid for {kind}")));
    }
    for (name, value) in [
        ("in_features", attrs.in_features),
        ("out_features", attrs.out_features),
        ("in_channels", attrs.in_channels),
        ("out_channels", attrs.out_channels),
        ("kernel_size", attrs.kernel_size),
        ("stride", attrs.stride),
        ("width", attrs.width),
    ] {
        if value == Some(0) {
            return Err(schema(format!("attribute `{name}` must be positive")));
        }
    }
    let takes_weights = matches!(
        kind,
        OpKind::FullyConnected | OpKind::Conv1D | OpKind::MatMul
    );
    let takes_bias = matches!(kind, OpKind::FullyConnected | OpKind::Conv1D | OpKind::Add);
    if weights.is_some() && !takes_weights {
        return Err(schema(format!("{kind} does not take weights")));
    }
    if bias.is_some() && !takes_bias {
        return Err(schema(format!("{kind} does not take a bias")));
    }
    let weights_req = || {
        weights
            .clone()
            .ok_or_else(|| schema(format!("{kind} requires weights")))
    };
    let activation = attrs
        .activation
        .as_deref()
        .map(|a| {
            Activation::from_name(a).ok_or_else(|| schema(format!("unknown activation `{a}`")))
        })
        .transpose()?;
    let declared = |name: &str, declared: Option<usize>, actual: usize| -> Result<()> {
        match declared {
            Some(d) if d != actual => Err(Error::ShapeMismatch {
                node: id.to_string(),
                detail: format!("declared {name} {d} but weights imply {actual}"),
            }),
            _ => Ok(()),
        }
    };
    let rank_check = |w: &Tensor, rank: usize| -> Result<()> {
        if w.shape.len() != rank {
            return Err(Error::ShapeMismatch {
                node: id.to_string(),
                detail: format!("{kind} weights must have rank {rank}, got {:?}", w.shape),
            });
        }
        Ok(())
    };

    let op = match kind {
        OpKind::FullyConnected | OpKind::MatMul => {
            let w = weights_req()?;
            rank_check(&w, 2)?;
            declared("out_features", attrs.out_features, w.shape[0])?;
            declared("in_features", attrs.in_features, w.shape[1])?;
            if kind == OpKind::MatMul {
                Op::MatMul(w)
            } else {
                Op::FullyConnected(Dense {
                    weights: w,
                    bias,
                    activation,
                })
            }
        }
        OpKind::Conv1D => {
            let w = weights_req()?;
            rank_check(&w, 3)?;
            declared("out_channels", attrs.out_channels, w.shape[0])?;
            declared("in_channels", attrs.in_channels, w.shape[1])?;
            declared("kernel_size", attrs.kernel_size, w.shape[2])?;
            let [left, right] = attrs.pads.unwrap_or([0, 0]);
            Op::Conv1d(Conv1d {
                weights: w,
                bias,
                stride: attrs.stride.unwrap_or(1),
                padding: Padding::new(left, right),
                activation,
            })
        }
        OpKind::Add => Op::Add(bias.ok_or_else(|| schema("Add requires a `bias` operand".into()))?),
        OpKind::ReLU => Op::Activation(Activation::Relu),
        OpKind::Tanh => Op::Activation(Activation::Tanh),
        OpKind::Sigmoid => Op::Activation(Activation::Sigmoid),
        OpKind::MaxPool1D | OpKind::AvgPool1D => {
            let width = attrs
                .width
                .or(attrs.kernel_size)
                .ok_or_else(|| schema("pooling requires `width`".into()))?;
            let pool = Pool {
                width,
                stride: attrs.stride.unwrap_or(width),
            };
            if kind == OpKind::MaxPool1D {
                Op::MaxPool1d(pool)
            } else {
                Op::AvgPool1d(pool)
            }
        }
        OpKind::Flatten => Op::Flatten,
        OpKind::Pad => {
            let [left, right] = attrs
                .pads
                .ok_or_else(|| schema("Pad requires `pads`".into()))?;
            Op::Pad(Padding::new(left, right))
        }
        OpKind::Softmax => Op::Softmax,
    };
    Ok(Node::new(id, op))
}

struct BlobWriter {
    bytes: Vec<u8>,
    manifest: BTreeMap<String, BlobEntry>,
}

impl BlobWriter {
    fn add(&mut self, name: String, t: &Tensor) -> String {
        self.manifest.insert(
            name.clone(),
            BlobEntry {
                offset: self.bytes.len() as u64,
                shape: t.shape.clone(),
            },
        );
        for v in &t.data {
            self.bytes.extend_from_slice(&v.to_le_bytes());
        }
        name
    }
}

fn to_parts(g: &Graph) -> (ModelFile, Vec<u8>) {
    let mut blobs = BlobWriter {
        bytes: Vec::new(),
        manifest: BTreeMap::new(),
    };
    let mut entries = Vec::with_capacity(g.nodes().len());
    for node in g.nodes() {
        let mut attrs = Attrs::default();
        let mut weights = None;
        let mut bias = None;
        match &node.op {
            Op::FullyConnected(d) => {
                weights = Some(blobs.add(format!("{}.weight", node.id), &d.weights));
                bias = d
                    .bias
                    .as_ref()
                    .map(|b| blobs.add(format!("{}.bias", node.id), b));
                attrs.activation = d.activation.map(|a| a.name().to_string());
            }
            Op::MatMul(w) => weights = Some(blobs.add(format!("{}.weight", node.id), w)),
            Op::Conv1d(c) => {
                weights = Some(blobs.add(format!("{}.weight", node.id), &c.weights));
                bias = c
                    .bias
                    .as_ref()
                    .map(|b| blobs.add(format!("{}.bias", node.id), b));
                if c.stride != 1 {
                    attrs.stride = Some(c.stride);
                }
                if !c.padding.is_zero() {
                    attrs.pads = Some([c.padding.left, c.padding.right]);
                }
                attrs.activation = c.activation.map(|a| a.name().to_string());
            }
            Op::Add(b) => bias = Some(blobs.add(format!("{}.bias", node.id), b)),
            Op::MaxPool1d(p) | Op::AvgPool1d(p) => {
                attrs.width = Some(p.width);
                attrs.stride = Some(p.stride);
            }
            Op::Pad(p) => attrs.pads = Some([p.left, p.right]),
            Op::Activation(_) | Op::Flatten | Op::Softmax => {}
        }
        entries.push(NodeEntry {
            id: node.id.clone(),
            op: node.op.kind().name().to_string(),
            attrs,
            weights,
            bias,
            inputs: None,
        });
    }
    let file = ModelFile {
        input_shape: g.input_shape().to_vec(),
        nodes: entries,
        blobs: blobs.manifest,
    };
    (file, blobs.bytes)
}

/// Writes `model.json` and `weights.bin`. `path` is either the JSON file path
/// or a directory to write both files into.
pub fn save_graph(g: &Graph, path: impl AsRef<Path>) -> Result<PathBuf> {
    let path = path.as_ref();
    let json_path = if path.extension().is_some_and(|e| e == "json") {
        path.to_path_buf()
    } else {
        fs::create_dir_all(path).map_err(|e| Error::file(path, e))?;
        path.join(MODEL_FILE)
    };
    let (file, bytes) = to_parts(g);
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    fs::write(&json_path, text).map_err(|e| Error::file(&json_path, e))?;
    let bin_path = json_path.with_file_name(WEIGHTS_FILE);
    fs::write(&bin_path, bytes).map_err(|e| Error::file(&bin_path, e))?;
    Ok(json_path)
}
