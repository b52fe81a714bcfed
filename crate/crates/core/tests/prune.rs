mod common;

use std::sync::Mutex;

use optc_core::interp::{evaluate, forward, Dataset, Direction, MetricKind, Targets, TaskKind};
use optc_core::ir::{Dense, Graph, Node, Op, Tensor};
use optc_core::prune::{
    evaluate_variant, gwp_variant, l1_rank, prune_structural, sensitivity_analysis,
    sensitivity_analysis_with, PruneSchedule, DEFAULT_PROBE_RATES,
};
use optc_core::zoo;
use rand::Rng;

#[test]
fn rank_matches_selection_sort() {
    let mut rng = zoo::rng(17);
    for _ in 0..20 {
        let data: Vec<f32> = (0..16 * 5)
            .map(|_| f32::from(rng.gen_range(-3i8..=3)))
            .collect();
        let node = Node::new(
            "fc",
            Op::FullyConnected(Dense {
                weights: Tensor::new("w", vec![16, 5], data).unwrap(),
                bias: None,
                activation: None,
            }),
        );
        assert_eq!(
            l1_rank(&node).unwrap(),
            common::brute_rank(node.weights().unwrap())
        );
    }
}

#[test]
fn kept_sets_are_top_ranked() {
    let g = zoo::kws_conv(2);
    let v = prune_structural(&g, &[0.5, 0.25, 0.4, 0.0]).unwrap();
    for (layer, node) in g.nodes().iter().filter(|n| n.is_trainable()).enumerate() {
        let order = common::brute_rank(node.weights().unwrap());
        let mut top = order[..v.widths[layer]].to_vec();
        top.sort_unstable();
        assert_eq!(v.kept_indices[layer], top);
    }
    assert_eq!(v.widths, vec![16, 24, 39, 12]);
}

#[test]
fn zero_then_remove_equivalence() {
    let mut rng = zoo::rng(23);
    let graphs = [
        zoo::mlp(1, 12, &[10, 8, 6]),
        zoo::matmul_mlp(2, 9, &[8, 8, 4]),
        zoo::kws_conv(3),
        zoo::tcn(4),
        zoo::padded_conv(5),
    ];
    for case in 0..20 {
        let g = &graphs[case % graphs.len()];
        let layers = g.layer_widths().len();
        let mut rates: Vec<f64> = (0..layers)
            .map(|_| f64::from(rng.gen_range(0..19u8)) / 20.0)
            .collect();
        if matches!(g.nodes().last().unwrap().op, Op::Softmax) {
            // Removed logits are excluded from the normalization.
            rates[layers - 1] = 0.0;
        }
        let v = prune_structural(g, &rates).unwrap();
        let zeroed = common::zero_pruned(g, &v.kept_indices);
        for x in zoo::random_inputs(case as u64, 4, g.input_len()) {
            let full = forward(&zeroed, &x).unwrap();
            let small = forward(&v.graph, &x).unwrap();
            let reference: Vec<f32> = match &v.output_map {
                Some(map) => map.iter().map(|&p| full[p]).collect(),
                None => full,
            };
            let (worst, _) = common::within(&small, &reference, 0.0, 0.0);
            assert!(worst <= 1e-6, "case {case}: {worst}");
        }
    }
}

#[test]
fn remaining_widths_match_rational_formula() {
    for &m in &[1usize, 7, 8, 10, 64, 128, 640] {
        for steps in [1usize, 3, 10] {
            for tenths in 1..=10usize {
                let s = tenths as f64 / 10.0;
                let sched = PruneSchedule::from_sensitivity_values(vec![m], &[s], steps).unwrap();
                for j in 0..=steps {
                    // p = (10 − tenths)·j / (10·J).
                    let expected = common::remaining_rational(m, (10 - tenths) * j, 10 * steps);
                    assert_eq!(
                        sched.remaining_at(j).unwrap(),
                        vec![expected],
                        "M={m} J={steps} s={s} j={j}"
                    );
                }
            }
        }
    }
}

#[test]
fn gwp_variants_shrink_monotonically() {
    let g = zoo::autoencoder(6);
    let s = [0.3, 0.5, 0.9, 0.1, 1.0, 0.7, 0.2, 0.4, 0.6, 0.8];
    let sched = PruneSchedule::from_sensitivity_values(g.layer_widths(), &s, 10).unwrap();
    assert_eq!(gwp_variant(&g, &sched, 0).unwrap().graph, g);
    let mut prev: Option<Vec<usize>> = None;
    for j in 0..=10 {
        let v = gwp_variant(&g, &sched, j).unwrap();
        assert_eq!(v.j, j);
        for (layer, kept) in v.kept_indices.iter().enumerate() {
            assert_eq!(kept.len(), v.widths[layer]);
            assert!(kept.windows(2).all(|w| w[0] < w[1]));
            assert!(v.widths[layer] >= 1);
        }
        if let Some(p) = &prev {
            assert!(v.widths.iter().zip(p).all(|(a, b)| a <= b));
        }
        prev = Some(v.widths.clone());
    }
    assert_eq!(gwp_variant(&g, &sched, 1).unwrap().widths[0], 120);
    assert_eq!(gwp_variant(&g, &sched, 10).unwrap().widths[0], 39);
    assert_eq!(gwp_variant(&g, &sched, 10).unwrap().widths[4], 8);
}

/// Autoencoder whose first layer has `important` live rows; the remaining
/// rows have zero weights and bias.
fn ae_with_live_rows(important: usize, seed: u64) -> Graph {
    let g = zoo::autoencoder(seed);
    let mut nodes = g.into_nodes();
    if let Op::FullyConnected(d) = &mut nodes[0].op {
        let cols = d.in_features();
        for r in important..d.out_features() {
            d.weights.data[r * cols..(r + 1) * cols].fill(0.0);
            d.bias.as_mut().unwrap().data[r] = 0.0;
        }
    }
    Graph::new(vec![zoo::AE_INPUT], nodes).unwrap()
}

#[test]
fn first_layer_of_autoencoder_crosses_at_seventy_percent() {
    let g = ae_with_live_rows(45, 31);
    let d = zoo::random_dataset(&g, 64, TaskKind::Anomaly, 5).unwrap();
    let t = evaluate(&g, &d, MetricKind::Auc).unwrap().value;
    let sens = sensitivity_analysis(
        &g,
        &d,
        &DEFAULT_PROBE_RATES,
        t,
        MetricKind::Auc,
        Direction::HigherBetter,
    )
    .unwrap();
    let first = &sens[0];
    // 52 rows survive at 0.6 (all live ones), 39 at 0.7.
    for &(p, a) in &first.probe_curve[..first.probe_curve.len() - 1] {
        assert_eq!(a, t, "p = {p}");
    }
    assert!((first.p_max - 0.7).abs() < 1e-12, "{first:?}");
    assert!((first.s - 0.3).abs() < 1e-12);
    let sched = PruneSchedule::from_sensitivities(&g, &sens, 10).unwrap();
    assert_eq!(sched.remaining_at(1).unwrap()[0], 120);
}

#[test]
fn identity_bottleneck_crosses_at_first_probe() {
    let mut rng = zoo::rng(2);
    let mut ident = vec![0.0; 100];
    for i in 0..10 {
        ident[i * 11] = 1.0;
    }
    let g = Graph::new(
        vec![10],
        vec![
            zoo::dense(&mut rng, "fc0", 10, 10, None),
            Node::new(
                "fc1",
                Op::FullyConnected(Dense {
                    weights: Tensor::new("id", vec![10, 10], ident).unwrap(),
                    bias: Some(Tensor::new("b", vec![10], vec![0.0; 10]).unwrap()),
                    activation: None,
                }),
            ),
        ],
    )
    .unwrap();
    let inputs = zoo::random_inputs(4, 16, 10);
    let targets: Vec<f32> = inputs
        .iter()
        .flat_map(|x| forward(&g, x).unwrap())
        .collect();
    let d = Dataset::new(
        10,
        inputs.into_iter().flatten().collect(),
        Targets::Values {
            len: 10,
            data: targets,
        },
        TaskKind::Regression,
    )
    .unwrap();
    let sens = sensitivity_analysis(
        &g,
        &d,
        &DEFAULT_PROBE_RATES,
        0.0,
        MetricKind::Mse,
        Direction::LowerBetter,
    )
    .unwrap();
    assert!((sens[1].s - 0.9).abs() < 1e-12);
    assert_eq!(sens[1].probe_curve.len(), 1);
    let direct = prune_structural(&g, &[0.0, 0.1]).unwrap();
    assert!(
        evaluate_variant(&direct, &d, MetricKind::Mse)
            .unwrap()
            .value
            > 0.0
    );
}

#[test]
fn probes_touch_one_layer_at_a_time() {
    let g = zoo::tcn(8);
    let d = zoo::random_dataset(&g, 8, TaskKind::Regression, 1).unwrap();
    let base = g.layer_widths();
    let seen = Mutex::new(Vec::new());
    let sens = sensitivity_analysis_with(
        &g,
        &DEFAULT_PROBE_RATES,
        -1.0,
        Direction::HigherBetter,
        |v| evaluate_variant(v, &d, MetricKind::Mse).map(|q| -q.value),
        |layer, p, v| {
            let changed: Vec<usize> = (0..base.len())
                .filter(|&i| v.widths[i] != base[i])
                .collect();
            let nonzero: Vec<usize> = (0..base.len()).filter(|&i| v.rates[i] != 0.0).collect();
            assert_eq!(nonzero, vec![layer]);
            assert!(changed.is_empty() || changed == vec![layer]);
            assert_eq!(v.rates[layer], p);
            seen.lock().unwrap().push((layer, p));
        },
    )
    .unwrap();
    assert_eq!(sens.len(), base.len());
    let mut seen = seen.into_inner().unwrap();
    seen.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    assert!(!seen.is_empty());
    for (i, s) in sens.iter().enumerate() {
        let probed: Vec<f64> = seen.iter().filter(|e| e.0 == i).map(|e| e.1).collect();
        let curve: Vec<f64> = s.probe_curve.iter().map(|c| c.0).collect();
        assert_eq!(probed, curve);
        assert!((s.s + s.p_max - 1.0).abs() < 1e-12);
    }
}

#[test]
fn invalid_probe_sequences() {
    let g = zoo::mlp(0, 4, &[4, 2]);
    let d = zoo::random_dataset(&g, 4, TaskKind::Regression, 0).unwrap();
    let run =
        |p: &[f64]| sensitivity_analysis(&g, &d, p, 0.0, MetricKind::Mse, Direction::LowerBetter);
    assert!(run(&[]).is_err());
    assert!(run(&[0.2, 0.1]).is_err());
    assert!(run(&[0.5, 1.0]).is_err());
    let none = run(&[0.1, 0.3]).unwrap();
    assert!(none.iter().all(|s| s.p_max == 0.1 || s.p_max == 0.3));
}
