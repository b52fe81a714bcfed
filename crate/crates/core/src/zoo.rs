//! Seeded synthetic models and datasets shaped like the benchmark networks.
//! Used by the tests, the acceptance suite and the `optc` demo commands.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::interp::{forward, Dataset, Targets, TaskKind};
use crate::ir::{Activation, Conv1d, Dense, Graph, Node, Op, Padding, Pool, Tensor};
use crate::Result;

/// Layer widths of the anomaly-detection autoencoder.
pub const AE_WIDTHS: [usize; 10] = [128, 128, 128, 128, 8, 128, 128, 128, 128, 640];
pub const AE_INPUT: usize = 640;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_tensor(rng: &mut ChaCha8Rng, name: String, shape: Vec<usize>, scale: f32) -> Tensor {
    let n = shape.iter().product();
    let dist = Uniform::new_inclusive(-scale, scale);
    let data = (0..n).map(|_| dist.sample(rng)).collect();
    Tensor::new(name, shape, data).expect("generated tensor is well formed")
}

/// Fully connected node with He-style uniform weights.
pub fn dense(
    rng: &mut ChaCha8Rng,
    id: &str,
    out: usize,
    inp: usize,
    act: Option<Activation>,
) -> Node {
    let scale = (6.0 / inp as f32).sqrt();
    Node::new(
        id,
        Op::FullyConnected(Dense {
            weights: uniform_tensor(rng, format!("{id}.weight"), vec![out, inp], scale),
            bias: Some(uniform_tensor(rng, format!("{id}.bias"), vec![out], 0.1)),
            activation: act,
        }),
    )
}

pub fn conv(
    rng: &mut ChaCha8Rng,
    id: &str,
    out_ch: usize,
    in_ch: usize,
    k: usize,
    stride: usize,
    padding: Padding,
) -> Node {
    let scale = (6.0 / (in_ch * k) as f32).sqrt();
    Node::new(
        id,
        Op::Conv1d(Conv1d {
            weights: uniform_tensor(rng, format!("{id}.weight"), vec![out_ch, in_ch, k], scale),
            bias: Some(uniform_tensor(rng, format!("{id}.bias"), vec![out_ch], 0.1)),
            stride,
            padding,
            activation: None,
        }),
    )
}

fn relu(id: String) -> Node {
    Node::new(id, Op::Activation(Activation::Relu))
}

/// Fully connected chain `input → widths[0] → … → widths[last]` with a
/// standalone ReLU after every layer except the last.
pub fn mlp(seed: u64, input: usize, widths: &[usize]) -> Graph {
    let mut rng = rng(seed);
    let mut nodes = Vec::new();
    let mut prev = input;
    for (i, &w) in widths.iter().enumerate() {
        nodes.push(dense(&mut rng, &format!("fc{i}"), w, prev, None));
        if i + 1 < widths.len() {
            nodes.push(relu(format!("relu{i}")));
        }
        prev = w;
    }
    Graph::new(vec![input], nodes).expect("mlp is well formed")
}

/// Autoencoder with ten fully connected layers (640 → 128×4 → 8 → 128×4 → 640).
pub fn autoencoder(seed: u64) -> Graph {
    mlp(seed, AE_INPUT, &AE_WIDTHS)
}

/// MLP written as exporter-style `MatMul`, `Add`, `Tanh` triples.
pub fn matmul_mlp(seed: u64, input: usize, widths: &[usize]) -> Graph {
    let mut rng = rng(seed);
    let mut nodes = Vec::new();
    let mut prev = input;
    for (i, &w) in widths.iter().enumerate() {
        let scale = (3.0 / prev as f32).sqrt();
        nodes.push(Node::new(
            format!("mm{i}"),
            Op::MatMul(uniform_tensor(
                &mut rng,
                format!("mm{i}.weight"),
                vec![w, prev],
                scale,
            )),
        ));
        nodes.push(Node::new(
            format!("add{i}"),
            Op::Add(uniform_tensor(
                &mut rng,
                format!("add{i}.bias"),
                vec![w],
                0.1,
            )),
        ));
        if i + 1 < widths.len() {
            nodes.push(Node::new(
                format!("tanh{i}"),
                Op::Activation(Activation::Tanh),
            ));
        }
        prev = w;
    }
    Graph::new(vec![input], nodes).expect("matmul mlp is well formed")
}

/// Keyword-spotting style classifier over `[10, 49]` feature frames:
/// two conv/pool stages, flatten, classifier and softmax.
pub fn kws_conv(seed: u64) -> Graph {
    let mut rng = rng(seed);
    let nodes = vec![
        conv(&mut rng, "conv0", 32, 10, 3, 1, Padding::default()),
        relu("relu0".into()),
        Node::new(
            "pool0",
            Op::MaxPool1d(Pool {
                width: 2,
                stride: 2,
            }),
        ),
        conv(&mut rng, "conv1", 32, 32, 3, 1, Padding::new(1, 1)),
        relu("relu1".into()),
        Node::new(
            "pool1",
            Op::AvgPool1d(Pool {
                width: 2,
                stride: 2,
            }),
        ),
        Node::new("flatten", Op::Flatten),
        dense(&mut rng, "fc0", 64, 32 * 11, Some(Activation::Relu)),
        dense(&mut rng, "fc1", 12, 64, None),
        Node::new("softmax", Op::Softmax),
    ];
    Graph::new(vec![10, 49], nodes).expect("kws model is well formed")
}

/// Temporal convolution stack with causal padding, strided reduction and a
/// sigmoid regression head.
pub fn tcn(seed: u64) -> Graph {
    let mut rng = rng(seed);
    let nodes = vec![
        conv(&mut rng, "tconv0", 16, 4, 3, 1, Padding::new(2, 0)),
        relu("relu0".into()),
        conv(&mut rng, "tconv1", 16, 16, 3, 1, Padding::new(2, 0)),
        relu("relu1".into()),
        conv(&mut rng, "tconv2", 16, 16, 4, 2, Padding::new(1, 1)),
        Node::new("sig0", Op::Activation(Activation::Sigmoid)),
        Node::new("flatten", Op::Flatten),
        dense(&mut rng, "head", 4, 16 * 16, None),
    ];
    Graph::new(vec![4, 32], nodes).expect("tcn model is well formed")
}

/// Convolution chain with explicit `Pad` nodes, including a stacked pair and
/// a zero pad, for the padding-elision pass.
pub fn padded_conv(seed: u64) -> Graph {
    let mut rng = rng(seed);
    let nodes = vec![
        Node::new("pad0", Op::Pad(Padding::new(1, 1))),
        conv(&mut rng, "conv0", 8, 3, 3, 1, Padding::default()),
        relu("relu0".into()),
        Node::new("pad1", Op::Pad(Padding::new(1, 0))),
        Node::new("pad2", Op::Pad(Padding::new(0, 1))),
        conv(&mut rng, "conv1", 8, 8, 3, 1, Padding::default()),
        Node::new("pad3", Op::Pad(Padding::new(0, 0))),
        Node::new("tanh0", Op::Activation(Activation::Tanh)),
        Node::new("flatten", Op::Flatten),
        dense(&mut rng, "fc0", 6, 8 * 20, None),
    ];
    Graph::new(vec![3, 20], nodes).expect("padded conv model is well formed")
}

/// Named set of models covering every op kind.
pub fn corpus(seed: u64) -> Vec<(&'static str, Graph)> {
    vec![
        ("mlp", mlp(seed, 32, &[24, 16, 8])),
        ("autoencoder", autoencoder(seed + 1)),
        ("matmul_mlp", matmul_mlp(seed + 2, 20, &[16, 12, 5])),
        ("kws_conv", kws_conv(seed + 3)),
        ("tcn", tcn(seed + 4)),
        ("padded_conv", padded_conv(seed + 5)),
    ]
}

/// Uniform inputs in `[-1, 1]`.
pub fn random_inputs(seed: u64, n: usize, len: usize) -> Vec<Vec<f32>> {
    let mut rng = rng(seed);
    let dist = Uniform::new_inclusive(-1.0f32, 1.0);
    (0..n)
        .map(|_| (0..len).map(|_| dist.sample(&mut rng)).collect())
        .collect()
}

/// Dataset with random inputs. Regression targets are the graph's own
/// outputs plus small noise, classification labels are the graph's argmax
/// with a tenth of them flipped. Anomaly labels mark the upper half of
/// reconstruction errors for autoencoders (input and output of equal length)
/// and are a random balanced split otherwise. `n ≥ 2` for anomaly data.
pub fn random_dataset(g: &Graph, n: usize, task: TaskKind, seed: u64) -> Result<Dataset> {
    let inputs = random_inputs(seed, n, g.input_len());
    let mut rng = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let outputs = inputs
        .iter()
        .map(|x| forward(g, x))
        .collect::<Result<Vec<_>>>()?;
    let targets = match task {
        TaskKind::Regression => {
            let noise = Uniform::new_inclusive(-0.05f32, 0.05);
            Targets::Values {
                len: g.output_len(),
                data: outputs
                    .iter()
                    .flatten()
                    .map(|v| v + noise.sample(&mut rng))
                    .collect(),
            }
        }
        TaskKind::Classification => {
            let classes = g.output_len() as u32;
            Targets::Labels(
                outputs
                    .iter()
                    .map(|o| {
                        let arg = argmax(o) as u32;
                        if rng.gen_ratio(1, 10) {
                            (arg + 1 + rng.gen_range(0..classes.max(2) - 1)) % classes.max(1)
                        } else {
                            arg
                        }
                    })
                    .collect(),
            )
        }
        TaskKind::Anomaly if g.output_len() == g.input_len() => {
            let scores: Vec<f64> = outputs
                .iter()
                .zip(&inputs)
                .map(|(o, x)| o.iter().zip(x).map(|(a, b)| f64::from(a - b).powi(2)).sum())
                .collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
            let mut labels = vec![0u32; n];
            for &i in &order[n / 2..] {
                labels[i] = 1;
            }
            Targets::Labels(labels)
        }
        TaskKind::Anomaly => {
            let mut labels: Vec<u32> = (0..n).map(|i| u32::from(i % 2 == 1)).collect();
            for i in (1..n).rev() {
                labels.swap(i, rng.gen_range(0..=i));
            }
            Targets::Labels(labels)
        }
    };
    let flat = inputs.into_iter().flatten().collect();
    Dataset::new(g.input_len(), flat, targets, task)
}

fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
