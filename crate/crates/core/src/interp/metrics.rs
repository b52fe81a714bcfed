use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Targets, TaskKind};
use crate::interp::forward;
use crate::ir::Graph;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Auc,
    ErrorRate,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl MetricKind {
    pub fn direction(self) -> Direction {
        match self {
            MetricKind::Auc => Direction::HigherBetter,
            MetricKind::ErrorRate | MetricKind::Mse => Direction::LowerBetter,
        }
    }

    pub fn task(self) -> TaskKind {
        match self {
            MetricKind::Auc => TaskKind::Anomaly,
            MetricKind::ErrorRate => TaskKind::Classification,
            MetricKind::Mse => TaskKind::Regression,
        }
    }

    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::Anomaly => MetricKind::Auc,
            TaskKind::Classification => MetricKind::ErrorRate,
            TaskKind::Regression => MetricKind::Mse,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Auc => "auc",
            MetricKind::ErrorRate => "error_rate",
            MetricKind::Mse => "mse",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "auc" => Ok(MetricKind::Auc),
            "error_rate" | "error" | "accuracy" => Ok(MetricKind::ErrorRate),
            "mse" => Ok(MetricKind::Mse),
            other => Err(Error::Metric(format!("unknown metric `{other}`"))),
        }
    }
}

impl Direction {
    /// True if `a` is strictly worse than the threshold `t`.
    pub fn crosses(self, a: f64, t: f64) -> bool {
        match self {
            Direction::HigherBetter => a < t,
            Direction::LowerBetter => a > t,
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "higher_better" | "higher" => Ok(Direction::HigherBetter),
            "lower_better" | "lower" => Ok(Direction::LowerBetter),
            other => Err(Error::Metric(format!("unknown direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityMetric {
    pub kind: MetricKind,
    pub value: f64,
    pub direction: Direction,
}

impl QualityMetric {
    pub fn new(kind: MetricKind, value: f64) -> Self {
        QualityMetric {
            kind,
            value,
            direction: kind.direction(),
        }
    }

    /// Lower-is-better view of the metric (`1 - AUC` for AUC).
    pub fn error(&self) -> f64 {
        match self.direction {
            Direction::HigherBetter => 1.0 - self.value,
            Direction::LowerBetter => self.value,
        }
    }
}

/// Forward pass over every dataset row. Rows run in parallel; the result is
/// in row order.
pub fn predict_all(g: &Graph, d: &Dataset) -> Result<Vec<Vec<f32>>> {
    if d.input_len() != g.input_len() {
        return Err(Error::Dataset(format!(
            "rows have {} values, graph input needs {}",
            d.input_len(),
            g.input_len()
        )));
    }
    (0..d.len())
        .into_par_iter()
        .map(|i| forward(g, d.input(i)))
        .collect()
}

pub fn evaluate(g: &Graph, d: &Dataset, kind: MetricKind) -> Result<QualityMetric> {
    evaluate_outputs(&predict_all(g, d)?, d, kind)
}

/// Scores precomputed predictions (one output vector per dataset row).
pub fn evaluate_outputs(
    outputs: &[Vec<f32>],
    d: &Dataset,
    kind: MetricKind,
) -> Result<QualityMetric> {
    if kind.task() != d.task() {
        return Err(Error::Metric(format!(
            "metric {kind} is not defined for a {:?} dataset",
            d.task()
        )));
    }
    if outputs.len() != d.len() {
        return Err(Error::Metric(format!(
            "{} predictions for {} samples",
            outputs.len(),
            d.len()
        )));
    }
    let value = match (kind, d.targets()) {
        (MetricKind::Mse, Targets::Values { len, data }) => {
            let mut sum = 0.0f64;
            for (pred, target) in outputs.iter().zip(data.chunks_exact(*len)) {
                check_len(pred.len(), *len)?;
                for (p, t) in pred.iter().zip(target) {
                    let e = f64::from(*p) - f64::from(*t);
                    sum += e * e;
                }
            }
            sum / (d.len() * len) as f64
        }
        (MetricKind::ErrorRate, Targets::Labels(labels)) => {
            let wrong = outputs
                .iter()
                .zip(labels)
                .filter(|(pred, &label)| argmax(pred) != label as usize)
                .count();
            wrong as f64 / d.len() as f64
        }
        (MetricKind::Auc, Targets::Labels(labels)) => {
            let mut scores = Vec::with_capacity(d.len());
            for (pred, row) in outputs.iter().zip(d.rows()) {
                check_len(pred.len(), row.len())?;
                scores.push(reconstruction_mse(pred, row));
            }
            let positives: Vec<bool> = labels.iter().map(|&l| l != 0).collect();
            roc_auc(&scores, &positives)?
        }
        _ => unreachable!("task/target pairing is checked by Dataset::new"),
    };
    Ok(QualityMetric::new(kind, value))
}

fn check_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Metric(format!(
            "model produces {got} outputs, targets have {expected}"
        )));
    }
    Ok(())
}

fn reconstruction_mse(pred: &[f32], input: &[f32]) -> f64 {
    let sum: f64 = pred
        .iter()
        .zip(input)
        .map(|(p, x)| {
            let e = f64::from(*p) - f64::from(*x);
            e * e
        })
        .sum();
    sum / pred.len() as f64
}

/// Index of the largest value; the lowest index wins ties.
fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Area under the ROC curve by the trapezoid rule. Samples with equal scores
/// form one threshold step, so ties count one half per (positive, negative)
/// pair.
pub fn roc_auc(scores: &[f64], positives: &[bool]) -> Result<f64> {
    if scores.len() != positives.len() {
        return Err(Error::Metric("score and label counts differ".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN anomaly score".into()));
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric(
            "AUC undefined: labels contain a single class".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));

    let (mut tp, mut fp) = (0u64, 0u64);
    let mut area = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut dtp, mut dfp) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == s {
            if positives[order[i]] {
                dtp += 1;
            } else {
                dfp += 1;
            }
            i += 1;
        }
        // Twice the trapezoid area, kept integral until the final division.
        area += (dfp * (2 * tp + dtp)) as f64;
        tp += dtp;
        fp += dfp;
    }
    debug_assert_eq!((tp as usize, fp as usize), (n_pos, n_neg));
    Ok(area / (2.0 * n_pos as f64 * n_neg as f64))
}
