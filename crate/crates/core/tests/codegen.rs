mod common;

use optc_core::codegen::{emit_graph, plan_memory, EmitOptions, MemoryPlan, Storage};
use optc_core::ir::{Activation, Dense, Graph, Node, Op, Tensor};
use optc_core::opt::optimize;
use optc_core::prune::{gwp_variant, PruneSchedule};
use optc_core::zoo;
use rand::Rng;

fn check_plan_safety(plan: &MemoryPlan) {
    for (i, a) in plan.buffers.iter().enumerate() {
        assert!(a.end() <= plan.arena_total_bytes);
        for b in &plan.buffers[i + 1..] {
            let live_together = a.first_def <= b.last_use && b.first_def <= a.last_use;
            let share_bytes =
                a.offset < b.offset + b.byte_size && b.offset < a.offset + a.byte_size;
            assert!(!(live_together && share_bytes), "collision {a:?} {b:?}");
        }
    }
}

fn liveness(plan: &MemoryPlan) -> Vec<usize> {
    let buffers: Vec<_> = plan
        .buffers
        .iter()
        .map(|b| (b.byte_size, b.first_def, b.last_use))
        .collect();
    common::live_bytes_per_step(&buffers, plan.edges.len() - 1)
}

#[test]
fn arena_is_peak_liveness_on_random_chains() {
    let mut rng = zoo::rng(11);
    for case in 0..25 {
        let widths: Vec<usize> = (0..8).map(|_| rng.gen_range(1..200)).collect();
        let g = zoo::mlp(case, rng.gen_range(1..50), &widths);
        let g = optimize(&g).unwrap();
        let plan = plan_memory(&g);
        check_plan_safety(&plan);
        let live = liveness(&plan);
        assert_eq!(
            plan.arena_total_bytes,
            live.into_iter().max().unwrap_or(0),
            "case {case}"
        );
        let total: usize = plan.buffers.iter().map(|b| b.byte_size).sum();
        assert!(plan.arena_total_bytes <= total);
    }
}

#[test]
fn corpus_plans_are_collision_free() {
    for (name, g) in zoo::corpus(3) {
        for graph in [g.clone(), optimize(&g).unwrap()] {
            let plan = plan_memory(&graph);
            check_plan_safety(&plan);
            let peak = liveness(&plan).into_iter().max().unwrap_or(0);
            assert!(plan.arena_total_bytes >= peak, "{name}");
        }
    }
}

#[test]
fn flatten_is_a_view() {
    let g = optimize(&zoo::kws_conv(0)).unwrap();
    let plan = plan_memory(&g);
    let flat = g
        .nodes()
        .iter()
        .position(|n| matches!(n.op, Op::Flatten))
        .unwrap();
    assert_eq!(plan.edges[flat], plan.edges[flat + 1]);
    assert!(matches!(plan.edges[flat], Storage::Arena(_)));
}

#[test]
fn ram_plateau_when_peak_pair_is_unpruned() {
    let g = optimize(&zoo::autoencoder(2)).unwrap();
    // Layers 6 and 7 produce the 128 + 128 pair and are never pruned.
    let mut s = vec![0.2; 10];
    s[6] = 1.0;
    s[7] = 1.0;
    let sched = PruneSchedule::from_sensitivity_values(g.layer_widths(), &s, 10).unwrap();
    let arenas: Vec<usize> = (0..=10)
        .map(|j| plan_memory(&gwp_variant(&g, &sched, j).unwrap().graph).arena_total_bytes)
        .collect();
    assert_eq!(arenas[0], 2 * 128 * 4);
    assert!(arenas.iter().all(|&a| a == arenas[0]), "{arenas:?}");
}

#[test]
fn emitted_sources_are_deterministic() {
    for (_, g) in zoo::corpus(5) {
        let g = optimize(&g).unwrap();
        assert_eq!(
            emit_graph(&g, EmitOptions::default()).unwrap(),
            emit_graph(&g, EmitOptions::default()).unwrap()
        );
    }
}

#[test]
fn fused_activation_needs_no_buffer() {
    let g = Graph::new(
        vec![4],
        vec![
            Node::new(
                "fc",
                Op::FullyConnected(Dense {
                    weights: Tensor::new("w", vec![3, 4], vec![0.5; 12]).unwrap(),
                    bias: None,
                    activation: None,
                }),
            ),
            Node::new("relu", Op::Activation(Activation::Relu)),
        ],
    )
    .unwrap();
    let unfused = emit_graph(&g, EmitOptions::default()).unwrap();
    let fused = emit_graph(&optimize(&g).unwrap(), EmitOptions::default()).unwrap();
    assert_eq!(unfused.arena_bytes, 12);
    assert_eq!(fused.arena_bytes, 0);
    assert!(fused.sources["nn.c"].contains("fmaxf(acc, 0.0f)"));
}

#[test]
fn pruned_rom_is_smaller() {
    let g = zoo::autoencoder(4);
    let sched = PruneSchedule::from_sensitivity_values(g.layer_widths(), &[0.3; 10], 10).unwrap();
    let base = emit_graph(&optimize(&g).unwrap(), EmitOptions::default()).unwrap();
    let last = gwp_variant(&g, &sched, 10).unwrap();
    let pruned = emit_graph(&optimize(&last.graph).unwrap(), EmitOptions::default()).unwrap();
    assert!(pruned.rom_estimate_bytes < base.rom_estimate_bytes);
    assert_eq!(base.rom_estimate_bytes, 1_063_456);
}

#[cfg(feature = "host-cc")]
mod host {
    use super::common;
    use optc_core::codegen::host::{measure_time_us, run_bench, run_conform};
    use optc_core::codegen::{emit_graph, EmitOptions, HarnessKind, HarnessParams, HostCompiler};
    use optc_core::interp::forward;
    use optc_core::ir::{Dense, Graph, Node, Op, Tensor};
    use optc_core::opt::optimize;
    use optc_core::prune::prune_structural;
    use optc_core::zoo;

    fn conform_outputs(g: &Graph, opts: EmitOptions, inputs: &[Vec<f32>]) -> Vec<Vec<f32>> {
        let dir = tempfile::tempdir().unwrap();
        let p = emit_graph(g, opts).unwrap();
        let exe = HostCompiler::default()
            .build(
                &p,
                HarnessKind::Conform,
                &HarnessParams::io(p.input_len, p.output_len),
                dir.path(),
            )
            .unwrap();
        run_conform(&exe, inputs, p.output_len).unwrap()
    }

    #[test]
    fn identity_network_copies_input() {
        let mut w = vec![0.0; 36];
        for i in 0..6 {
            w[i * 7] = 1.0;
        }
        let g = Graph::new(
            vec![6],
            vec![Node::new(
                "id",
                Op::FullyConnected(Dense {
                    weights: Tensor::new("w", vec![6, 6], w).unwrap(),
                    bias: None,
                    activation: None,
                }),
            )],
        )
        .unwrap();
        let inputs = zoo::random_inputs(1, 5, 6);
        assert_eq!(conform_outputs(&g, EmitOptions::default(), &inputs), inputs);
    }

    #[test]
    fn corpus_matches_interpreter() {
        for (name, g) in zoo::corpus(21) {
            let rates = vec![0.3; g.layer_widths().len()];
            let pruned = prune_structural(&g, &rates).unwrap().graph;
            for graph in [g.clone(), optimize(&g).unwrap(), optimize(&pruned).unwrap()] {
                let inputs = zoo::random_inputs(7, 10, graph.input_len());
                let got = conform_outputs(&graph, EmitOptions::default(), &inputs);
                for (x, c) in inputs.iter().zip(&got) {
                    let want = forward(&graph, x).unwrap();
                    let (worst, ok) = common::within(c, &want, 1e-5, 1e-6);
                    assert!(ok, "{name}: deviation {worst}");
                }
            }
        }
    }

    #[test]
    fn approximate_activations_stay_close() {
        let g = optimize(&zoo::tcn(3)).unwrap();
        let inputs = zoo::random_inputs(2, 10, g.input_len());
        let got = conform_outputs(
            &g,
            EmitOptions {
                approximate_activations: true,
            },
            &inputs,
        );
        for (x, c) in inputs.iter().zip(&got) {
            let want = forward(&g, x).unwrap();
            let (worst, ok) = common::within(c, &want, 1e-3, 1e-3);
            assert!(ok, "deviation {worst}");
        }
    }

    #[test]
    fn bench_prints_one_line_per_rep() {
        let g = optimize(&zoo::mlp(1, 16, &[8, 4])).unwrap();
        let p = emit_graph(&g, EmitOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let exe = HostCompiler::default()
            .build(
                &p,
                HarnessKind::Bench,
                &HarnessParams::bench(16, 4, 5, 10),
                dir.path(),
            )
            .unwrap();
        let out = std::process::Command::new(&exe).output().unwrap();
        let text = String::from_utf8(out.stdout).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text
            .lines()
            .all(|l| l.parse::<f64>().is_ok_and(|v| v >= 0.0)));
        assert_eq!(run_bench(&exe, 3).unwrap().len(), 5);
        assert!(measure_time_us(&exe, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn build_failure_reports_diagnostics() {
        let g = zoo::mlp(1, 4, &[2]);
        let p = emit_graph(&g, EmitOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cc = HostCompiler::new("cc -DNN_INPUT_LEN=bogus").unwrap();
        let err = cc
            .build(
                &p,
                HarnessKind::Conform,
                &HarnessParams::io(4, 2),
                dir.path(),
            )
            .unwrap_err();
        assert!(err.to_string().contains("failed"), "{err}");
    }
}
