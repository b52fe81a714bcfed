//! `optc` command-line interface.
//!
//! Each subcommand runs one stage of the pipeline on files; `explore` runs
//! all of them.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use optc_core::codegen::{
    emit_graph, estimate_footprint, instantiate_harness, EmitOptions, HarnessKind, HarnessParams,
    HostCompiler,
};
use optc_core::explore::{
    explore, feasibility_report, pareto_front, write_csv, write_manifest, ConfigRecord,
    ExplorationConfig, Manifest, Target, Threshold,
};
use optc_core::interp::{evaluate, Dataset, Direction, MetricKind};
use optc_core::ir::{
    count_cost, design_space_size, load_graph, save_graph, DesignSpaceMode, Graph,
};
use optc_core::opt::optimize;
use optc_core::prune::{prune_structural, sensitivity_analysis, DEFAULT_PROBE_RATES};
use serde_json::json;

const RECORDS_FILE: &str = "records.json";
const REPORT_FILE: &str = "report.csv";
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] optc_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) => 3,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "optc",
    version,
    about = "Prune small neural networks and generate C inference code"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model and print its shapes
    Validate(Common),
    /// Parameter, FLOP and memory estimates of a model
    Cost(Common),
    /// Per-layer pruning sensitivity on a dataset
    Sensitivity(SensitivityArgs),
    /// Structurally prune a model with per-layer rates
    Prune(PruneArgs),
    /// Run the graph rewrite passes
    Optimize(Common),
    /// Emit C sources for a model
    Codegen(CodegenArgs),
    /// Full exploration: sensitivity, pruning steps, codegen, timing, Pareto front
    Explore(ExploreArgs),
    /// Rebuild the CSV report of an exploration, optionally with memory targets
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Model description (JSON) or a directory containing `model.json`
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset file
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Directory for written results
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Seed for every randomized choice
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print machine-readable results on standard output
    #[arg(long)]
    json: bool,
    /// JSON file whose keys supply flags; explicit flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Auc,
    ErrorRate,
    Mse,
}

impl From<MetricArg> for MetricKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Auc => MetricKind::Auc,
            MetricArg::ErrorRate => MetricKind::ErrorRate,
            MetricArg::Mse => MetricKind::Mse,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Higher,
    Lower,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Higher => Direction::HigherBetter,
            DirectionArg::Lower => Direction::LowerBetter,
        }
    }
}

#[derive(Args, Clone)]
struct QualityArgs {
    /// Quality metric
    #[arg(long, value_enum, default_value_t = MetricArg::Auc)]
    metric: MetricArg,
    /// Overrides the natural direction of the metric
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
    /// Quality threshold; the unpruned model's quality when absent
    #[arg(long)]
    threshold: Option<f64>,
    /// Ascending probe rates in (0, 1)
    #[arg(long, value_delimiter = ',')]
    probes: Option<Vec<f64>>,
}

impl QualityArgs {
    fn direction(&self) -> Direction {
        self.direction.map_or_else(
            || MetricKind::from(self.metric).direction(),
            Direction::from,
        )
    }

    fn probes(&self) -> Vec<f64> {
        self.probes
            .clone()
            .unwrap_or_else(|| DEFAULT_PROBE_RATES.to_vec())
    }
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    quality: QualityArgs,
}

#[derive(Args)]
struct PruneArgs {
    #[command(flatten)]
    common: Common,
    /// Pruning rate of every trainable layer, in order
    #[arg(long, value_delimiter = ',', required = true)]
    rates: Vec<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum HarnessArg {
    Bench,
    Conform,
}

#[derive(Args)]
struct CodegenArgs {
    #[command(flatten)]
    common: Common,
    /// Use rational approximations for tanh and sigmoid
    #[arg(long)]
    approx: bool,
    /// Emit the graph as given, without rewrite passes
    #[arg(long)]
    no_optimize: bool,
    /// Also write a harness main program
    #[arg(long, value_enum)]
    harness: Option<HarnessArg>,
    /// Timed repetitions of the bench harness
    #[arg(long, default_value_t = 5)]
    reps: usize,
}

#[derive(Args)]
struct ExploreArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    quality: QualityArgs,
    /// Number of pruning steps
    #[arg(long = "J", default_value_t = 10)]
    steps: usize,
    /// Host compiler command
    #[arg(long, env = "OPTC_CC", default_value = optc_core::codegen::host::DEFAULT_CC)]
    cc: String,
    /// Skip compilation, conformance checks and timing
    #[arg(long)]
    no_cc: bool,
    /// Worker threads
    #[arg(long)]
    jobs: Option<usize>,
    /// Timed repetitions per variant
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Minimum duration of one timed repetition
    #[arg(long, default_value_t = 50.0)]
    min_run_ms: f64,
    /// Memory target `name:rom:ram`, e.g. `tc32x:1M:-`; repeatable
    #[arg(long)]
    target: Vec<String>,
    /// Use rational approximations for tanh and sigmoid
    #[arg(long)]
    approx: bool,
    /// Command run as `<command> <model-dir>` on every pruned variant
    #[arg(long)]
    retrain_hook: Option<String>,
    /// Keep generated sources and binaries under `<out-dir>/variants`
    #[arg(long)]
    keep_artifacts: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Memory target `name:rom:ram`; repeatable
    #[arg(long)]
    target: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv = match config::merge_config(std::env::args().collect()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Validate(c) => validate(&c),
        Command::Cost(c) => cost(&c),
        Command::Sensitivity(a) => sensitivity(&a),
        Command::Prune(a) => prune(&a),
        Command::Optimize(c) => optimize_cmd(&c),
        Command::Codegen(a) => codegen(&a),
        Command::Explore(a) => explore_cmd(&a),
        Command::Report(a) => report(&a),
    }
}

fn model(c: &Common) -> CliResult<Graph> {
    let path = c
        .model
        .as_ref()
        .ok_or_else(|| CliError::Usage("--model is required".into()))?;
    Ok(load_graph(path)?)
}

fn dataset(c: &Common) -> CliResult<Dataset> {
    let path = c
        .dataset
        .as_ref()
        .ok_or_else(|| CliError::Usage("--dataset is required".into()))?;
    Ok(Dataset::load(path)?)
}

fn out_dir(c: &Common) -> CliResult<PathBuf> {
    let dir = c.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Core(e.into()))?;
    Ok(dir)
}

fn print_json(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("JSON values always serialize")
    );
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(optc_core::Error::from)?;
    std::fs::write(path, text).map_err(|e| CliError::Core(e.into()))
}

fn validate(c: &Common) -> CliResult {
    let g = model(c)?;
    let shapes = g.shapes();
    if c.json {
        let nodes: Vec<_> = g
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| json!({ "id": n.id, "op": n.op.kind().name(), "shape": shapes[i + 1] }))
            .collect();
        print_json(&json!({
            "input_shape": g.input_shape(),
            "output_shape": g.output_shape(),
            "layer_widths": g.layer_widths(),
            "nodes": nodes,
        }));
    } else {
        println!("input {:?}", g.input_shape());
        for (i, n) in g.nodes().iter().enumerate() {
            println!(
                "  {:<16} {:<16} {:?}",
                n.id,
                n.op.kind().name(),
                shapes[i + 1]
            );
        }
        println!(
            "output {:?}, {} trainable layers",
            g.output_shape(),
            g.layer_widths().len()
        );
    }
    Ok(())
}

fn cost(c: &Common) -> CliResult {
    let g = model(c)?;
    let report = count_cost(&g);
    let layer_wise = design_space_size(&g, DesignSpaceMode::LayerWise);
    let global = design_space_size(&g, DesignSpaceMode::Global);
    if c.json {
        print_json(&json!({
            "cost": report,
            "layer_widths": g.layer_widths(),
            "design_space": { "layer_wise": layer_wise.to_string(), "global": global.to_string() },
        }));
    } else {
        println!("params          {}", report.param_count);
        println!("param bytes     {}", report.param_bytes);
        println!("flops           {}", report.flops);
        println!("rom estimate    {}", report.rom_estimate_bytes);
        println!("ram estimate    {}", report.ram_estimate_bytes);
        println!("layer widths    {:?}", g.layer_widths());
        println!("design space    {layer_wise} layer-wise, {global} global");
    }
    Ok(())
}

fn sensitivity(a: &SensitivityArgs) -> CliResult {
    let g = model(&a.common)?;
    let d = dataset(&a.common)?;
    let metric = MetricKind::from(a.quality.metric);
    let threshold = match a.quality.threshold {
        Some(t) => t,
        None => evaluate(&g, &d, metric)?.value,
    };
    let probes = a.quality.probes();
    let sens = sensitivity_analysis(&g, &d, &probes, threshold, metric, a.quality.direction())?;
    if let Some(dir) = &a.common.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Core(e.into()))?;
        write_json(&dir.join("sensitivity.json"), &sens)?;
    }
    if a.common.json {
        print_json(&json!({ "threshold": threshold, "layers": sens }));
    } else {
        println!("threshold {threshold}");
        for s in &sens {
            println!(
                "  {:<16} s = {:.2}  p_max = {:.2}",
                s.layer_id, s.s, s.p_max
            );
        }
    }
    Ok(())
}

fn prune(a: &PruneArgs) -> CliResult {
    let g = model(&a.common)?;
    let v = prune_structural(&g, &a.rates)?;
    let dir = out_dir(&a.common)?;
    let path = save_graph(&v.graph, &dir)?;
    if a.common.json {
        print_json(&json!({
            "model": path,
            "widths": v.widths,
            "kept_indices": v.kept_indices,
            "output_map": v.output_map,
        }));
    } else {
        println!("widths {:?} -> {:?}", g.layer_widths(), v.widths);
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn optimize_cmd(c: &Common) -> CliResult {
    let g = model(c)?;
    let out = optimize(&g)?;
    let dir = out_dir(c)?;
    let path = save_graph(&out, &dir)?;
    if c.json {
        print_json(
            &json!({ "model": path, "nodes_before": g.nodes().len(), "nodes_after": out.nodes().len() }),
        );
    } else {
        println!("{} -> {} nodes", g.nodes().len(), out.nodes().len());
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn codegen(a: &CodegenArgs) -> CliResult {
    let g = model(&a.common)?;
    let g = if a.no_optimize { g } else { optimize(&g)? };
    let program = emit_graph(
        &g,
        EmitOptions {
            approximate_activations: a.approx,
        },
    )?;
    let dir = out_dir(&a.common)?;
    program.write_to(&dir)?;
    if let Some(h) = a.harness {
        let (kind, params, file) = match h {
            HarnessArg::Bench => (
                HarnessKind::Bench,
                HarnessParams::bench(program.input_len, program.output_len, a.reps, 1),
                "bench_main.c",
            ),
            HarnessArg::Conform => (
                HarnessKind::Conform,
                HarnessParams::io(program.input_len, program.output_len),
                "conform_main.c",
            ),
        };
        let source = instantiate_harness(kind, &params)?;
        std::fs::write(dir.join(file), source).map_err(|e| CliError::Core(e.into()))?;
    }
    let (rom, ram) = estimate_footprint(&program, &Default::default());
    if a.common.json {
        print_json(&json!({
            "dir": dir,
            "files": program.sources.keys().collect::<Vec<_>>(),
            "weight_bytes": program.weight_bytes,
            "arena_bytes": program.arena_bytes,
            "rom_bytes": rom,
            "ram_bytes": ram,
        }));
    } else {
        println!("rom {rom} B, ram {ram} B (arena {} B)", program.arena_bytes);
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn parse_targets(specs: &[String]) -> CliResult<Vec<Target>> {
    specs
        .iter()
        .map(|s| Target::parse(s).map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

fn write_report(dir: &Path, records: &[ConfigRecord], targets: &[Target]) -> CliResult<PathBuf> {
    let table = if targets.is_empty() {
        None
    } else {
        Some(feasibility_report(records, targets)?)
    };
    let path = dir.join(REPORT_FILE);
    write_csv(records, table.as_ref(), &path)?;
    Ok(path)
}

fn print_records(records: &[ConfigRecord]) {
    println!(
        "{:>3} {:>10} {:>12} {:>10} {:>10} {:>12} {:>6}",
        "j", "quality", "time_us", "rom", "ram", "flops", "pareto"
    );
    for r in records {
        let time = r
            .exec_time_us
            .map_or_else(|| "-".to_string(), |t| format!("{t:.2}"));
        println!(
            "{:>3} {:>10.4} {:>12} {:>10} {:>10} {:>12} {:>6}",
            r.j,
            r.quality.value,
            time,
            r.rom_bytes,
            r.ram_bytes,
            r.flops,
            if r.pareto { "*" } else { "" }
        );
    }
}

fn explore_cmd(a: &ExploreArgs) -> CliResult {
    let g = model(&a.common)?;
    let d = dataset(&a.common)?;
    let targets = parse_targets(&a.target)?;
    let dir = out_dir(&a.common)?;
    let compiler = if a.no_cc {
        None
    } else {
        let cc = HostCompiler::new(&a.cc)?;
        if !cc.is_available() {
            return Err(CliError::Core(optc_core::Error::HostBuild(format!(
                "compiler `{}` not found; pass --no-cc to skip timing",
                a.cc
            ))));
        }
        Some(a.cc.clone())
    };
    let cfg = ExplorationConfig {
        steps: a.steps,
        probes: a.quality.probes(),
        threshold: a
            .quality
            .threshold
            .map_or(Threshold::Baseline, Threshold::Value),
        metric: a.quality.metric.into(),
        direction: a.quality.direction.map(Direction::from),
        compiler,
        reps: a.reps,
        seed: a.common.seed,
        jobs: a.jobs,
        min_run_ms: a.min_run_ms,
        emit: EmitOptions {
            approximate_activations: a.approx,
        },
        retrain_hook: a.retrain_hook.clone(),
        artifact_dir: a.keep_artifacts.then(|| dir.join("variants")),
        ..Default::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let result = explore(&g, &d, &cfg)?;
    let csv = write_report(&dir, &result.records, &targets)?;
    write_manifest(&Manifest::new(&cfg, &result), &dir.join(MANIFEST_FILE))?;
    write_json(&dir.join(RECORDS_FILE), &result.records)?;
    for r in result.records.iter().filter(|r| r.diagnostic.is_some()) {
        log::warn!(
            "j = {}: {:?}: {}",
            r.j,
            r.status,
            r.diagnostic.as_deref().unwrap_or_default()
        );
    }
    if a.common.json {
        print_json(&json!({
            "report": csv,
            "baseline": result.baseline.value,
            "threshold": result.threshold,
            "sensitivities": result.sensitivities,
            "records": result.records,
        }));
    } else {
        print_records(&result.records);
        println!("wrote {}", csv.display());
    }
    Ok(())
}

fn report(a: &ReportArgs) -> CliResult {
    let dir = a
        .common
        .out_dir
        .clone()
        .ok_or_else(|| CliError::Usage("--out-dir of an exploration is required".into()))?;
    let path = dir.join(RECORDS_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Core(optc_core::Error::File { path, source: e }))?;
    let mut records: Vec<ConfigRecord> =
        serde_json::from_str(&text).map_err(optc_core::Error::from)?;
    let targets = parse_targets(&a.target)?;
    pareto_front(&mut records);
    let csv = write_report(&dir, &records, &targets)?;
    if a.common.json {
        let fits = if targets.is_empty() {
            None
        } else {
            Some(feasibility_report(&records, &targets)?)
        };
        print_json(&json!({ "report": csv, "records": records, "feasibility": fits }));
    } else {
        print_records(&records);
        if !targets.is_empty() {
            let table = feasibility_report(&records, &targets)?;
            for (t, target) in table.targets.iter().enumerate() {
                let fitting: Vec<usize> = (0..records.len())
                    .filter(|&r| table.fits[r][t])
                    .map(|r| records[r].j)
                    .collect();
                println!("{}: fits for j in {fitting:?}", target.name);
            }
        }
        println!("wrote {}", csv.display());
    }
    Ok(())
}
