mod common;

use num_bigint::BigUint;
use optc_core::codegen::plan_memory;
use optc_core::explore::{pareto_flags, ConfigRecord, RecordStatus};
use optc_core::interp::{MetricKind, QualityMetric};
use optc_core::ir::{count_cost, design_space_size, load_graph, save_graph, DesignSpaceMode};
use optc_core::opt::optimize;
use optc_core::prune::{prune_structural, remaining_outputs, PruneSchedule};
use optc_core::zoo;
use proptest::prelude::*;

fn widths() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..40, 1..6)
}

fn record(j: usize, error: f64, time: Option<f64>, rom: u64) -> ConfigRecord {
    ConfigRecord {
        j,
        quality: QualityMetric::new(MetricKind::Mse, error),
        error,
        exec_time_us: time,
        rom_bytes: rom,
        ram_bytes: 0,
        flops: 0,
        params: 0,
        pareto: false,
        status: RecordStatus::Ok,
        widths: vec![],
        diagnostic: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layer_wise_space_covers_global(ws in widths()) {
        let g = zoo::mlp(0, 3, &ws);
        let lw = design_space_size(&g, DesignSpaceMode::LayerWise);
        let global = design_space_size(&g, DesignSpaceMode::Global);
        prop_assert!(lw >= global);
        let product: BigUint = ws.iter().map(|&w| BigUint::from(w)).product();
        prop_assert_eq!(lw, product);
    }

    #[test]
    fn removing_one_output_lowers_flops(ws in prop::collection::vec(2usize..30, 1..5), input in 1usize..20, pick in 0usize..5) {
        let g = zoo::mlp(1, input, &ws);
        let layer = pick % ws.len();
        let mut rates = vec![0.0; ws.len()];
        rates[layer] = 1.0 / ws[layer] as f64;
        let v = prune_structural(&g, &rates).unwrap();
        prop_assert_eq!(v.widths[layer], ws[layer] - 1);
        let before = count_cost(&g);
        let after = count_cost(&v.graph);
        prop_assert!(after.flops < before.flops);
        prop_assert!(after.param_count < before.param_count);
    }

    #[test]
    fn remaining_width_is_monotone(m in 1usize..700, tenths in 1usize..=10, steps in 1usize..12) {
        let s = tenths as f64 / 10.0;
        let sched = PruneSchedule::from_sensitivity_values(vec![m], &[s], steps).unwrap();
        let mut prev = m;
        for j in 0..=steps {
            let r = sched.remaining_at(j).unwrap()[0];
            prop_assert!(r >= 1 && r <= prev);
            prop_assert_eq!(r, common::remaining_rational(m, (10 - tenths) * j, 10 * steps));
            prev = r;
        }
    }

    #[test]
    fn remaining_outputs_bounds(m in 1usize..1000, p in 0.0f64..1.0) {
        let r = remaining_outputs(m, p);
        prop_assert!(r >= 1 && r <= m);
    }

    #[test]
    fn pareto_is_permutation_invariant(
        points in prop::collection::vec((0u8..4, prop::option::of(1u8..5), 1u64..5), 1..12),
        seed in any::<u64>(),
    ) {
        let recs: Vec<_> = points
            .iter()
            .enumerate()
            .map(|(j, &(e, t, r))| record(j, f64::from(e), t.map(f64::from), r))
            .collect();
        let raw: Vec<[f64; 3]> = recs
            .iter()
            .map(|r| [r.error, r.exec_time_us.unwrap_or(f64::INFINITY), r.rom_bytes as f64])
            .collect();
        let flags = pareto_flags(&recs.iter().map(ConfigRecord::objectives).collect::<Vec<_>>());
        prop_assert_eq!(&flags, &common::brute_pareto(&raw));
        prop_assert!(flags.iter().any(|&f| f));

        let mut order: Vec<usize> = (0..recs.len()).collect();
        let mut state = seed | 1;
        for i in (1..order.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            order.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let shuffled: Vec<_> = order.iter().map(|&i| raw[i]).collect();
        let shuffled_flags = pareto_flags(&shuffled);
        for (k, &i) in order.iter().enumerate() {
            prop_assert_eq!(shuffled_flags[k], flags[i]);
        }
    }

    #[test]
    fn plans_never_overlap_live_buffers(ws in prop::collection::vec(1usize..300, 1..9), input in 1usize..100, fuse in any::<bool>()) {
        let mut g = zoo::mlp(2, input, &ws);
        if fuse {
            g = optimize(&g).unwrap();
        }
        let plan = plan_memory(&g);
        for (i, a) in plan.buffers.iter().enumerate() {
            prop_assert!(a.end() <= plan.arena_total_bytes);
            for b in &plan.buffers[i + 1..] {
                prop_assert!(!(a.lifetime_overlaps(b) && a.range_overlaps(b)));
            }
        }
        let buffers: Vec<_> = plan.buffers.iter().map(|b| (b.byte_size, b.first_def, b.last_use)).collect();
        let peak = common::live_bytes_per_step(&buffers, plan.edges.len() - 1).into_iter().max().unwrap_or(0);
        prop_assert!(plan.arena_total_bytes >= peak);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn save_load_round_trip(ws in widths(), input in 1usize..30, seed in any::<u64>()) {
        let g = zoo::mlp(seed, input, &ws);
        let dir = tempfile::tempdir().unwrap();
        let path = save_graph(&g, dir.path()).unwrap();
        prop_assert_eq!(load_graph(&path).unwrap(), g);
    }

    #[test]
    fn optimize_is_idempotent(ws in widths(), input in 1usize..30, seed in any::<u64>(), matmul in any::<bool>()) {
        let g = if matmul { zoo::matmul_mlp(seed, input, &ws) } else { zoo::mlp(seed, input, &ws) };
        let once = optimize(&g).unwrap();
        prop_assert_eq!(optimize(&once).unwrap(), once);
    }
}
