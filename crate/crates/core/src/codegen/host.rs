use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use crate::codegen::emit::EmittedProgram;
use crate::codegen::harness::{instantiate_harness, HarnessKind, HarnessParams};
use crate::{Error, Result};

pub const DEFAULT_CC: &str = "cc -O3";

/// Warning flags every emitted program must compile cleanly under.
pub const STRICT_FLAGS: [&str; 8] = [
    "-std=c99",
    "-Wall",
    "-Wextra",
    "-Wpedantic",
    "-Werror",
    "-Wshadow",
    "-Wdouble-promotion",
    "-Wconversion",
];

/// Host C compiler invocation, e.g. `cc -O3` or `clang -O2 -march=native`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostCompiler {
    pub command: Vec<String>,
}

impl Default for HostCompiler {
    fn default() -> Self {
        Self::new(DEFAULT_CC).expect("default compiler command is not empty")
    }
}

impl HostCompiler {
    pub fn new(command: &str) -> Result<Self> {
        let command: Vec<String> = command.split_whitespace().map(str::to_string).collect();
        if command.is_empty() {
            return Err(Error::HostBuild("empty compiler command".into()));
        }
        Ok(HostCompiler { command })
    }

    pub fn is_available(&self) -> bool {
        Command::new(&self.command[0])
            .arg("--version")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .is_ok_and(|s| s.success())
    }

    /// Writes the program and the instantiated harness into `dir` and builds
    /// `dir/<kind>`. Compiler diagnostics are returned in the error.
    pub fn build(
        &self,
        program: &EmittedProgram,
        kind: HarnessKind,
        params: &HarnessParams,
        dir: &Path,
    ) -> Result<PathBuf> {
        program.write_to(dir)?;
        let (main_name, exe_name) = match kind {
            HarnessKind::Bench => ("bench_main.c", "bench"),
            HarnessKind::Conform => ("conform_main.c", "conform"),
        };
        let main_path = dir.join(main_name);
        std::fs::write(&main_path, instantiate_harness(kind, params)?)
            .map_err(|e| Error::file(&main_path, e))?;
        let exe = dir.join(exe_name);
        let output = Command::new(&self.command[0])
            .args(&self.command[1..])
            .args(STRICT_FLAGS)
            .arg("-o")
            .arg(&exe)
            .arg(&main_path)
            .arg(dir.join("nn.c"))
            .arg(dir.join("weights.c"))
            .arg("-lm")
            .output()
            .map_err(|e| Error::HostBuild(format!("cannot run `{}`: {e}", self.command[0])))?;
        if !output.status.success() {
            return Err(Error::HostBuild(format!(
                "`{}` failed ({}):\n{}",
                self.command.join(" "),
                output.status,
                String::from_utf8_lossy(&output.stderr)
            )));
        }
        Ok(exe)
    }
}

/// Feeds `inputs` through a conform binary.
pub fn run_conform(exe: &Path, inputs: &[Vec<f32>], output_len: usize) -> Result<Vec<Vec<f32>>> {
    let mut child = Command::new(exe)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::HostBuild(format!("cannot start {}: {e}", exe.display())))?;
    let bytes: Vec<u8> = inputs
        .iter()
        .flatten()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    let mut stdin = child.stdin.take().expect("stdin is piped");
    let writer = std::thread::spawn(move || stdin.write_all(&bytes));
    let output = child.wait_with_output()?;
    writer
        .join()
        .map_err(|_| Error::HostBuild("stdin writer panicked".into()))??;
    if !output.status.success() {
        return Err(Error::HostBuild(format!(
            "{} exited with {}: {}",
            exe.display(),
            output.status,
            String::from_utf8_lossy(&output.stderr)
        )));
    }
    let expected = inputs.len() * output_len * 4;
    if output.stdout.len() != expected {
        return Err(Error::HostBuild(format!(
            "conform produced {} bytes, expected {expected}",
            output.stdout.len()
        )));
    }
    let values: Vec<f32> = output
        .stdout
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(values
        .chunks(output_len.max(1))
        .map(<[f32]>::to_vec)
        .collect())
}

/// Runs a bench binary with `iters` inferences per repetition and returns
/// the per-inference microseconds it printed.
pub fn run_bench(exe: &Path, iters: u64) -> Result<Vec<f64>> {
    let output = Command::new(exe)
        .arg(iters.to_string())
        .output()
        .map_err(|e| Error::HostBuild(format!("cannot start {}: {e}", exe.display())))?;
    if !output.status.success() {
        return Err(Error::HostBuild(format!(
            "{} exited with {}",
            exe.display(),
            output.status
        )));
    }
    String::from_utf8_lossy(&output.stdout)
        .lines()
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::HostBuild(format!("unparseable bench line `{l}`")))
        })
        .collect()
}

/// Median per-inference time. The inner iteration count is grown until the
/// fastest repetition lasts at least `min_run_ms`.
pub fn measure_time_us(exe: &Path, min_run_ms: f64) -> Result<f64> {
    const MAX_ITERS: u64 = 1 << 32;
    let target_us = min_run_ms * 1e3;
    let mut iters = 1u64;
    loop {
        let mut times = run_bench(exe, iters)?;
        if times.is_empty() {
            return Err(Error::HostBuild("bench printed no timings".into()));
        }
        times.sort_by(f64::total_cmp);
        let shortest_run = times[0] * iters as f64;
        if shortest_run >= target_us || iters >= MAX_ITERS {
            return Ok(median(&times));
        }
        let scale = if shortest_run > 0.0 {
            (target_us / shortest_run * 1.2).ceil() as u64
        } else {
            16
        };
        iters = (iters * scale.clamp(2, 1 << 20)).min(MAX_ITERS);
    }
}

pub(crate) fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
