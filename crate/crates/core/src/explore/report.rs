use std::path::Path;
use std::process::Command;

use serde::Serialize;

use crate::explore::{
    ConfigRecord, ExplorationConfig, ExplorationResult, FeasibilityReport, RecordStatus,
};
use crate::prune::LayerSensitivity;
use crate::{Error, Result};

/// Writes the plotting table: one row per record, one `fits_<target>` column
/// per feasibility target.
pub fn write_csv(
    records: &[ConfigRecord],
    feasibility: Option<&FeasibilityReport>,
    path: &Path,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<String> = [
        "j",
        "quality",
        "error",
        "exec_time_us",
        "rom_bytes",
        "ram_bytes",
        "flops",
        "params",
        "pareto",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    if let Some(f) = feasibility {
        header.extend(f.targets.iter().map(|t| format!("fits_{}", t.name)));
    }
    w.write_record(&header)?;
    for (i, r) in records.iter().enumerate() {
        let mut row = vec![
            r.j.to_string(),
            r.quality.value.to_string(),
            r.error.to_string(),
            r.exec_time_us
                .map_or_else(String::new, |t| format!("{t:.3}")),
            r.rom_bytes.to_string(),
            r.ram_bytes.to_string(),
            r.flops.to_string(),
            r.params.to_string(),
            r.pareto.to_string(),
        ];
        if let Some(f) = feasibility {
            row.extend(f.fits[i].iter().map(bool::to_string));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RecordSummary {
    pub j: usize,
    pub status: RecordStatus,
    pub widths: Vec<usize>,
    pub diagnostic: Option<String>,
}

/// Run manifest stored next to the CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub compiler_version: Option<String>,
    pub seed: u64,
    pub config: ExplorationConfig,
    pub baseline_quality: f64,
    pub threshold: f64,
    pub sensitivities: Vec<LayerSensitivity>,
    pub initial_rates: Vec<f64>,
    pub records: Vec<RecordSummary>,
}

impl Manifest {
    pub fn new(cfg: &ExplorationConfig, result: &ExplorationResult) -> Self {
        Manifest {
            tool: "optc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            compiler_version: cfg.compiler.as_deref().and_then(compiler_version),
            seed: cfg.seed,
            config: cfg.clone(),
            baseline_quality: result.baseline.value,
            threshold: result.threshold,
            sensitivities: result.sensitivities.clone(),
            initial_rates: result.schedule.initial_rates.clone(),
            records: result
                .records
                .iter()
                .map(|r| RecordSummary {
                    j: r.j,
                    status: r.status,
                    widths: r.widths.clone(),
                    diagnostic: r.diagnostic.clone(),
                })
                .collect(),
        }
    }
}

fn compiler_version(command: &str) -> Option<String> {
    let program = command.split_whitespace().next()?;
    let out = Command::new(program).arg("--version").output().ok()?;
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .next()
        .map(str::to_string)
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(path, text).map_err(|e| Error::file(path, e))
}
