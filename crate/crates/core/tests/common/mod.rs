//! Independent oracles shared by the integration tests. None of these call
//! into the library code they are used to check.
#![allow(dead_code)]

use std::collections::BTreeSet;

use optc_core::ir::{Graph, Node, Op, Tensor};

/// Plain nested-loop dense layer `y = W x + b`, optional ReLU.
pub fn dense_forward(
    w: &[f32],
    b: &[f32],
    rows: usize,
    cols: usize,
    x: &[f32],
    relu: bool,
) -> Vec<f32> {
    (0..rows)
        .map(|r| {
            let mut acc = b[r];
            for c in 0..cols {
                acc += w[r * cols + c] * x[c];
            }
            if relu && acc < 0.0 {
                0.0
            } else {
                acc
            }
        })
        .collect()
}

/// Pairwise Mann-Whitney estimate of the AUC: fraction of (positive,
/// negative) pairs where the positive scores higher, ties counting one half.
pub fn mann_whitney(scores: &[f64], positive: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &sp) in scores.iter().enumerate() {
        if !positive[i] {
            continue;
        }
        for (k, &sn) in scores.iter().enumerate() {
            if positive[k] {
                continue;
            }
            pairs += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Output indices sorted by descending sum of absolute weights, lower index
/// first among equals, by selection over all remaining indices.
pub fn brute_rank(weights: &Tensor) -> Vec<usize> {
    let rows = weights.shape[0];
    let per = weights.data.len() / rows;
    let norms: Vec<f64> = (0..rows)
        .map(|r| {
            weights.data[r * per..(r + 1) * per]
                .iter()
                .map(|v| f64::from(v.abs()))
                .sum()
        })
        .collect();
    let mut left: Vec<usize> = (0..rows).collect();
    let mut order = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for (pos, &idx) in left.iter().enumerate() {
            if norms[idx] > norms[left[best]] {
                best = pos;
            }
        }
        order.push(left.remove(best));
    }
    order
}

/// `ceil(M · (den − num) / den)` in integers, i.e. the remaining width for
/// rate `num / den`, floored at one.
pub fn remaining_rational(m: usize, num: usize, den: usize) -> usize {
    let kept = (m * (den - num)).div_ceil(den);
    kept.max(1)
}

/// Copy of `g` in which every output of trainable layer `i` not listed in
/// `kept[i]` has its weights and bias zeroed, and the inputs it feeds in the
/// next trainable layer (and any bias `Add` on the way) are zeroed too.
pub fn zero_pruned(g: &Graph, kept: &[Vec<usize>]) -> Graph {
    let shapes = g.shapes();
    let mut nodes: Vec<Node> = Vec::new();
    let mut layer = 0;
    // Dead channel (or feature) indices of the current activation.
    let mut dead: BTreeSet<usize> = BTreeSet::new();
    for (i, node) in g.nodes().iter().enumerate() {
        let mut node = node.clone();
        let in_shape = &shapes[i];
        if node.is_trainable() {
            {
                let (w, mut bias) = match &mut node.op {
                    Op::FullyConnected(d) => (&mut d.weights, d.bias.as_mut()),
                    Op::Conv1d(c) => (&mut c.weights, c.bias.as_mut()),
                    Op::MatMul(w) => (w, None),
                    _ => unreachable!(),
                };
                let rows = w.shape[0];
                let cols = w.shape[1];
                let inner: usize = w.shape[2..].iter().product();
                for r in 0..rows {
                    for &c in &dead {
                        for k in 0..inner {
                            w.data[(r * cols + c) * inner + k] = 0.0;
                        }
                    }
                }
                let keep: BTreeSet<usize> = kept[layer].iter().copied().collect();
                dead = (0..rows).filter(|r| !keep.contains(r)).collect();
                for &r in &dead {
                    for v in &mut w.data[r * cols * inner..(r + 1) * cols * inner] {
                        *v = 0.0;
                    }
                    if let Some(b) = bias.as_mut() {
                        b.data[r] = 0.0;
                    }
                }
                layer += 1;
            }
        } else {
            match &mut node.op {
                Op::Add(b) => {
                    for &r in &dead {
                        b.data[r] = 0.0;
                    }
                }
                Op::Flatten => {
                    if let [_, len] = in_shape[..] {
                        dead = dead.iter().flat_map(|&c| c * len..(c + 1) * len).collect();
                    }
                }
                _ => {}
            }
        }
        nodes.push(node);
    }
    Graph::new(g.input_shape().to_vec(), nodes).unwrap()
}

/// Step-by-step liveness: bytes live at every node, given each buffer's
/// `(size, first_def, last_use)`.
pub fn live_bytes_per_step(buffers: &[(usize, usize, usize)], steps: usize) -> Vec<usize> {
    (0..steps)
        .map(|s| {
            buffers
                .iter()
                .filter(|(_, d, u)| *d <= s && s <= *u)
                .map(|(b, _, _)| *b)
                .sum()
        })
        .collect()
}

/// All-pairs dominance check with minimization on every axis.
pub fn brute_pareto(points: &[[f64; 3]]) -> Vec<bool> {
    let mut flags = vec![true; points.len()];
    for (i, p) in points.iter().enumerate() {
        for (k, q) in points.iter().enumerate() {
            if i == k {
                continue;
            }
            let no_worse = (0..3).all(|a| q[a] <= p[a]);
            let better = (0..3).any(|a| q[a] < p[a]);
            if no_worse && better {
                flags[i] = false;
            }
        }
    }
    flags
}

/// Largest `|a − b|` and whether all entries satisfy
/// `|a − b| ≤ max(rel · |b|, abs)`.
pub fn within(got: &[f32], want: &[f32], rel: f64, abs: f64) -> (f64, bool) {
    assert_eq!(got.len(), want.len());
    let mut worst = 0.0f64;
    let mut ok = true;
    for (&a, &b) in got.iter().zip(want) {
        let d = (f64::from(a) - f64::from(b)).abs();
        worst = worst.max(d);
        if d.is_nan() || d > (rel * f64::from(b).abs()).max(abs) {
            ok = false;
        }
    }
    (worst, ok)
}
