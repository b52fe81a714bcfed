//! End-to-end design-space exploration.
//!
//! [`explore`] runs the sensitivity analysis, derives the global weighted
//! pruning schedule and evaluates every variant `Y_0 … Y_J`: quality with
//! the interpreter, cost with the static cost model, memory with the emitted
//! C program and, when a host compiler is configured, execution time with
//! the bench harness. The records are then marked with their Pareto status.

mod pareto;
mod report;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codegen::host::{measure_time_us, run_conform};
use crate::codegen::{
    emit_graph, estimate_footprint, EmitOptions, FootprintModel, HarnessKind, HarnessParams,
    HostCompiler,
};
use crate::interp::{evaluate, forward, Dataset, Direction, MetricKind, QualityMetric};
use crate::ir::{count_cost, load_graph, save_graph, Graph};
use crate::opt::optimize;
use crate::prune::{
    evaluate_variant, gwp_variant, sensitivity_analysis, LayerSensitivity, PruneSchedule,
    PrunedVariant, DEFAULT_PROBE_RATES,
};
use crate::{zoo, Error, Result};

pub use pareto::{
    dominates, feasibility_report, pareto_flags, pareto_front, FeasibilityReport, Target,
};
pub use report::{write_csv, write_manifest, Manifest};

/// Relative tolerance between emitted C and the interpreter.
pub const CONFORM_REL_TOL: f64 = 1e-5;
/// Absolute floor of the conformance tolerance.
pub const CONFORM_ABS_TOL: f64 = 1e-6;
/// Tolerance used when activations are approximated.
pub const APPROX_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Quality of the unpruned model on the dataset.
    Baseline,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorationConfig {
    /// Number of pruning steps `J`.
    pub steps: usize,
    pub probes: Vec<f64>,
    pub threshold: Threshold,
    pub metric: MetricKind,
    /// Defaults to the natural direction of the metric.
    pub direction: Option<Direction>,
    /// Host compiler command; without one no timing or conformance check
    /// is done.
    pub compiler: Option<String>,
    /// Timed repetitions `R` per variant.
    pub reps: usize,
    pub seed: u64,
    pub jobs: Option<usize>,
    /// Minimum duration of one timed repetition.
    pub min_run_ms: f64,
    /// Random inputs compared between emitted C and the interpreter.
    pub verify_samples: usize,
    pub emit: EmitOptions,
    pub footprint: FootprintModel,
    /// External command run as `<command> <model-dir>` on every pruned
    /// variant before evaluation; it may rewrite the weights in place.
    pub retrain_hook: Option<String>,
    /// Where generated sources and binaries are kept; a temporary directory
    /// when unset.
    pub artifact_dir: Option<PathBuf>,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            steps: 10,
            probes: DEFAULT_PROBE_RATES.to_vec(),
            threshold: Threshold::Baseline,
            metric: MetricKind::Auc,
            direction: None,
            compiler: None,
            reps: 5,
            seed: 0,
            jobs: None,
            min_run_ms: 50.0,
            verify_samples: 10,
            emit: EmitOptions::default(),
            footprint: FootprintModel::default(),
            retrain_hook: None,
            artifact_dir: None,
        }
    }
}

impl ExplorationConfig {
    pub fn direction(&self) -> Direction {
        self.direction.unwrap_or_else(|| self.metric.direction())
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Explore("J must be at least 1".into()));
        }
        if self.reps < 3 {
            return Err(Error::Explore(format!(
                "R = {} repetitions, at least 3 required",
                self.reps
            )));
        }
        if self.min_run_ms.is_nan() || self.min_run_ms < 0.0 {
            return Err(Error::Explore("min_run_ms must be non-negative".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Explore("jobs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    /// The emitted program failed to build; time is missing.
    CompileFailed,
    /// The emitted program disagrees with the interpreter.
    Diverged,
}

/// Metrics of one explored design point `Y_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub j: usize,
    pub quality: QualityMetric,
    /// Lower-is-better view of the quality (`1 − AUC` for AUC).
    pub error: f64,
    /// Median host time per inference.
    pub exec_time_us: Option<f64>,
    pub rom_bytes: u64,
    pub ram_bytes: u64,
    pub flops: u64,
    pub params: u64,
    pub pareto: bool,
    pub status: RecordStatus,
    /// Remaining width `m_i` of every trainable layer.
    pub widths: Vec<usize>,
    pub diagnostic: Option<String>,
}

impl ConfigRecord {
    /// `(error, time, rom)`, a missing time counting as infinite.
    pub fn objectives(&self) -> [f64; 3] {
        [
            self.error,
            self.exec_time_us.unwrap_or(f64::INFINITY),
            self.rom_bytes as f64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplorationResult {
    pub baseline: QualityMetric,
    pub threshold: f64,
    pub sensitivities: Vec<LayerSensitivity>,
    pub schedule: PruneSchedule,
    /// One record per `j = 0..=J`, in order.
    pub records: Vec<ConfigRecord>,
}

/// Full exploration: sensitivity analysis, schedule, variants, Pareto front.
pub fn explore(g: &Graph, d: &Dataset, cfg: &ExplorationConfig) -> Result<ExplorationResult> {
    cfg.validate()?;
    let baseline = evaluate(g, d, cfg.metric)?;
    let threshold = match cfg.threshold {
        Threshold::Baseline => baseline.value,
        Threshold::Value(t) => t,
    };
    let sensitivities = with_pool(cfg, || {
        sensitivity_analysis(g, d, &cfg.probes, threshold, cfg.metric, cfg.direction())
    })?;
    let schedule = PruneSchedule::from_sensitivities(g, &sensitivities, cfg.steps)?;
    let records = explore_schedule(g, d, &schedule, cfg)?;
    Ok(ExplorationResult {
        baseline,
        threshold,
        sensitivities,
        schedule,
        records,
    })
}

/// Evaluates `Y_0 … Y_J` of a given schedule and marks the Pareto front.
pub fn explore_schedule(
    g: &Graph,
    d: &Dataset,
    sched: &PruneSchedule,
    cfg: &ExplorationConfig,
) -> Result<Vec<ConfigRecord>> {
    cfg.validate()?;
    if sched.steps != cfg.steps {
        return Err(Error::Explore(format!(
            "schedule has J = {}, configuration J = {}",
            sched.steps, cfg.steps
        )));
    }
    let compiler = cfg.compiler.as_deref().map(HostCompiler::new).transpose()?;
    let temp;
    let root = match &cfg.artifact_dir {
        Some(dir) => dir.clone(),
        None => {
            temp = tempfile::tempdir()?;
            temp.path().to_path_buf()
        }
    };
    let timing = Mutex::new(());
    let ctx = VariantCtx {
        g,
        d,
        sched,
        cfg,
        compiler: compiler.as_ref(),
        timing: &timing,
        root: &root,
    };
    let mut records = with_pool(cfg, || {
        (0..=cfg.steps)
            .into_par_iter()
            .map(|j| ctx.run(j))
            .collect::<Result<Vec<_>>>()
    })?;
    pareto_front(&mut records);
    Ok(records)
}

fn with_pool<T: Send>(cfg: &ExplorationConfig, f: impl FnOnce() -> T + Send) -> T {
    match cfg.jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("cannot build a {n}-thread pool ({e}); using the global pool");
                f()
            }
        },
        None => f(),
    }
}

struct VariantCtx<'a> {
    g: &'a Graph,
    d: &'a Dataset,
    sched: &'a PruneSchedule,
    cfg: &'a ExplorationConfig,
    compiler: Option<&'a HostCompiler>,
    timing: &'a Mutex<()>,
    root: &'a Path,
}

impl VariantCtx<'_> {
    fn run(&self, j: usize) -> Result<ConfigRecord> {
        let dir = self.root.join(format!("j{j:03}"));
        let mut variant = gwp_variant(self.g, self.sched, j)?;
        if let Some(hook) = &self.cfg.retrain_hook {
            variant = retrain(variant, hook, &dir.join("model"))?;
        }
        let quality = evaluate_variant(&variant, self.d, self.cfg.metric)?;
        let cost = count_cost(&variant.graph);
        let optimized = optimize(&variant.graph)?;
        let program = emit_graph(&optimized, self.cfg.emit)?;
        let (rom, ram) = estimate_footprint(&program, &self.cfg.footprint);
        let mut record = ConfigRecord {
            j,
            quality,
            error: quality.error(),
            exec_time_us: None,
            rom_bytes: rom as u64,
            ram_bytes: ram as u64,
            flops: cost.flops,
            params: cost.param_count,
            pareto: false,
            status: RecordStatus::Ok,
            widths: variant.widths.clone(),
            diagnostic: None,
        };
        let Some(cc) = self.compiler else {
            return Ok(record);
        };
        let build = |kind, params: HarnessParams| {
            let sub = dir.join(match kind {
                HarnessKind::Bench => "bench",
                HarnessKind::Conform => "conform",
            });
            cc.build(&program, kind, &params, &sub)
        };
        let io = HarnessParams::io(program.input_len, program.output_len);
        let conform = match build(HarnessKind::Conform, io) {
            Ok(exe) => exe,
            Err(e) => return Ok(failed(record, e)),
        };
        if let Some(msg) = self.verify(&variant, &conform)? {
            log::warn!("j = {j}: {msg}");
            record.status = RecordStatus::Diverged;
            record.diagnostic = Some(msg);
        }
        let bench_params =
            HarnessParams::bench(program.input_len, program.output_len, self.cfg.reps, 1);
        let bench = match build(HarnessKind::Bench, bench_params) {
            Ok(exe) => exe,
            Err(e) => return Ok(failed(record, e)),
        };
        let _guard = self.timing.lock().unwrap_or_else(|e| e.into_inner());
        record.exec_time_us = Some(measure_time_us(&bench, self.cfg.min_run_ms)?);
        Ok(record)
    }

    /// Compares the conform binary with the interpreter on seeded inputs.
    fn verify(&self, v: &PrunedVariant, exe: &Path) -> Result<Option<String>> {
        if self.cfg.verify_samples == 0 {
            return Ok(None);
        }
        let inputs =
            zoo::random_inputs(self.cfg.seed, self.cfg.verify_samples, v.graph.input_len());
        let got = run_conform(exe, &inputs, v.graph.output_len())?;
        let (rel, abs) = if self.cfg.emit.approximate_activations {
            (APPROX_TOL, APPROX_TOL)
        } else {
            (CONFORM_REL_TOL, CONFORM_ABS_TOL)
        };
        for (k, (x, c_out)) in inputs.iter().zip(&got).enumerate() {
            let want = forward(&v.graph, x)?;
            if let Some((i, a, b)) = first_mismatch(c_out, &want, rel, abs) {
                return Ok(Some(format!(
                    "emitted code diverges on sample {k}, output {i}: {a} vs interpreter {b}"
                )));
            }
        }
        Ok(None)
    }
}

fn failed(mut record: ConfigRecord, e: Error) -> ConfigRecord {
    log::error!("j = {}: {e}", record.j);
    record.status = RecordStatus::CompileFailed;
    record.diagnostic = Some(e.to_string());
    record
}

fn retrain(v: PrunedVariant, hook: &str, dir: &Path) -> Result<PrunedVariant> {
    let model = save_graph(&v.graph, dir)?;
    let mut parts = hook.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| Error::Explore("empty retrain hook".into()))?;
    let status = Command::new(program).args(parts).arg(dir).status()?;
    if !status.success() {
        return Err(Error::Explore(format!("retrain hook exited with {status}")));
    }
    let graph = load_graph(&model)?;
    if graph.layer_widths() != v.graph.layer_widths()
        || graph.input_shape() != v.graph.input_shape()
    {
        return Err(Error::Explore(
            "retrain hook changed the model structure".into(),
        ));
    }
    Ok(PrunedVariant { graph, ..v })
}

/// First position where `got` and `want` differ by more than
/// `max(rel · |want|, abs)`.
pub fn first_mismatch(got: &[f32], want: &[f32], rel: f64, abs: f64) -> Option<(usize, f32, f32)> {
    if got.len() != want.len() {
        return Some((got.len().min(want.len()), f32::NAN, f32::NAN));
    }
    got.iter().zip(want).enumerate().find_map(|(i, (&a, &b))| {
        let tol = (rel * f64::from(b).abs()).max(abs);
        let diff = (f64::from(a) - f64::from(b)).abs();
        (diff.is_nan() || diff > tol).then_some((i, a, b))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mismatch_tolerance() {
        assert!(first_mismatch(&[1.0, 0.0], &[1.000_005, 5e-7], 1e-5, 1e-6).is_none());
        assert_eq!(
            first_mismatch(&[1.0, 0.0], &[1.0, 2e-6], 1e-5, 1e-6).map(|m| m.0),
            Some(1)
        );
        assert!(first_mismatch(&[f32::NAN], &[0.0], 1e-5, 1e-6).is_some());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExplorationConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.reps = 2;
        assert!(cfg.validate().is_err());
        cfg.reps = 3;
        cfg.steps = 0;
        assert!(cfg.validate().is_err());
    }
}
