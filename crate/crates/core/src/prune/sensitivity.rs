use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::interp::{evaluate_outputs, forward, Dataset, Direction, MetricKind, QualityMetric};
use crate::ir::Graph;
use crate::prune::structural::{prune_structural, PrunedVariant};
use crate::{Error, Result};

pub const DEFAULT_PROBE_RATES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSensitivity {
    pub layer_id: String,
    /// `1 - p_max`; 1.0 means the layer must stay unpruned.
    pub s: f64,
    pub p_max: f64,
    /// `(rate, quality)` for every probe evaluated, ascending in rate.
    pub probe_curve: Vec<(f64, f64)>,
}

/// Quality of a pruned variant on `d`. Outputs removed from the last layer
/// are scored as zeros in their original positions.
pub fn evaluate_variant(v: &PrunedVariant, d: &Dataset, kind: MetricKind) -> Result<QualityMetric> {
    if d.input_len() != v.graph.input_len() {
        return Err(Error::Dataset(format!(
            "rows have {} values, graph input needs {}",
            d.input_len(),
            v.graph.input_len()
        )));
    }
    let outputs = (0..d.len())
        .into_par_iter()
        .map(|i| forward(&v.graph, d.input(i)).map(|o| v.expand_output(&o)))
        .collect::<Result<Vec<_>>>()?;
    evaluate_outputs(&outputs, d, kind)
}

/// Per-layer sensitivity: each trainable layer is pruned alone at every rate
/// of `probes` until the quality crosses `threshold` (drops below it for
/// higher-is-better metrics, rises above it otherwise). The crossing rate
/// becomes `p_max`; without a crossing `p_max` is the largest probe.
pub fn sensitivity_analysis(
    g: &Graph,
    d: &Dataset,
    probes: &[f64],
    threshold: f64,
    kind: MetricKind,
    direction: Direction,
) -> Result<Vec<LayerSensitivity>> {
    sensitivity_analysis_with(
        g,
        probes,
        threshold,
        direction,
        |v| evaluate_variant(v, d, kind).map(|q| q.value),
        |_, _, _| {},
    )
}

/// Generic form of [`sensitivity_analysis`]. `quality` scores a probe;
/// `observe(layer, rate, variant)` sees every probe before it is scored.
/// Layers are probed in parallel and reported in layer order.
pub fn sensitivity_analysis_with<Q, O>(
    g: &Graph,
    probes: &[f64],
    threshold: f64,
    direction: Direction,
    quality: Q,
    observe: O,
) -> Result<Vec<LayerSensitivity>>
where
    Q: Fn(&PrunedVariant) -> Result<f64> + Sync,
    O: Fn(usize, f64, &PrunedVariant) + Sync,
{
    if probes.is_empty() {
        return Err(Error::Prune("probe rate sequence is empty".into()));
    }
    if probes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Prune(
            "probe rates must be strictly ascending".into(),
        ));
    }
    if let Some(bad) = probes.iter().find(|p| !(0.0..1.0).contains(*p)) {
        return Err(Error::Prune(format!("probe rate {bad} outside [0, 1)")));
    }
    if !threshold.is_finite() {
        return Err(Error::Prune(format!("threshold {threshold} is not finite")));
    }
    let ids = g.layer_ids();
    let max_probe = *probes.last().unwrap();

    (0..ids.len())
        .into_par_iter()
        .map(|layer| {
            let mut rates = vec![0.0; ids.len()];
            let mut curve = Vec::new();
            let mut p_max = max_probe;
            for &p in probes {
                rates[layer] = p;
                let variant = prune_structural(g, &rates)?;
                observe(layer, p, &variant);
                let a = quality(&variant)?;
                curve.push((p, a));
                if direction.crosses(a, threshold) {
                    p_max = p;
                    break;
                }
            }
            Ok(LayerSensitivity {
                layer_id: ids[layer].to_string(),
                s: 1.0 - p_max,
                p_max,
                probe_curve: curve,
            })
        })
        .collect()
}
