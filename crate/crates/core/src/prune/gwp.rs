use serde::{Deserialize, Serialize};

use crate::ir::Graph;
use crate::prune::sensitivity::LayerSensitivity;
use crate::prune::structural::{prune_structural, remaining_outputs, PrunedVariant};
use crate::{Error, Result};

/// Global weighted pruning schedule: layer `i` is pruned at rate
/// `initial_rates[i] · j` in step `j`, for `0 ≤ j ≤ steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneSchedule {
    pub steps: usize,
    /// `p_init_i = (1 − s_i) / J`.
    pub initial_rates: Vec<f64>,
    /// Unpruned output widths `M_i`.
    pub widths: Vec<usize>,
}

impl PruneSchedule {
    pub fn from_sensitivities(g: &Graph, sens: &[LayerSensitivity], steps: usize) -> Result<Self> {
        let widths = g.layer_widths();
        if sens.len() != widths.len() {
            return Err(Error::Prune(format!(
                "{} sensitivities for {} trainable layers",
                sens.len(),
                widths.len()
            )));
        }
        let ids = g.layer_ids();
        if let Some((s, id)) = sens.iter().zip(&ids).find(|(s, id)| s.layer_id != **id) {
            return Err(Error::Prune(format!(
                "sensitivity for `{}` given where layer `{id}` was expected",
                s.layer_id
            )));
        }
        let p_max: Vec<f64> = sens.iter().map(|s| s.p_max).collect();
        Self::from_max_rates(widths, &p_max, steps)
    }

    /// Builds the schedule from sensitivities `s_i` directly.
    pub fn from_sensitivity_values(widths: Vec<usize>, s: &[f64], steps: usize) -> Result<Self> {
        if let Some(bad) = s.iter().find(|v| !(*v > &0.0 && *v <= &1.0)) {
            return Err(Error::Prune(format!("sensitivity {bad} outside (0, 1]")));
        }
        let p_max: Vec<f64> = s.iter().map(|s| 1.0 - s).collect();
        Self::from_max_rates(widths, &p_max, steps)
    }

    fn from_max_rates(widths: Vec<usize>, p_max: &[f64], steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Prune("number of steps J must be positive".into()));
        }
        if p_max.len() != widths.len() {
            return Err(Error::Prune(format!(
                "{} rates for {} layers",
                p_max.len(),
                widths.len()
            )));
        }
        if let Some(bad) = p_max.iter().find(|p| !(0.0..1.0).contains(*p)) {
            return Err(Error::Prune(format!(
                "maximum pruning rate {bad} outside [0, 1)"
            )));
        }
        Ok(PruneSchedule {
            steps,
            initial_rates: p_max.iter().map(|p| p / steps as f64).collect(),
            widths,
        })
    }

    fn check_step(&self, j: usize) -> Result<()> {
        if j > self.steps {
            return Err(Error::Prune(format!("step {j} outside 0..={}", self.steps)));
        }
        Ok(())
    }

    pub fn rates_at(&self, j: usize) -> Result<Vec<f64>> {
        self.check_step(j)?;
        Ok(self.initial_rates.iter().map(|p| p * j as f64).collect())
    }

    /// `m_i = ceil(M_i · (1 − p_init_i · j))`.
    pub fn remaining_at(&self, j: usize) -> Result<Vec<usize>> {
        Ok(self
            .rates_at(j)?
            .iter()
            .zip(&self.widths)
            .map(|(&p, &m)| remaining_outputs(m, p))
            .collect())
    }
}

/// Pruned model `Y_j` of the schedule; `j = 0` is the unpruned graph.
pub fn gwp_variant(g: &Graph, sched: &PruneSchedule, j: usize) -> Result<PrunedVariant> {
    if sched.widths != g.layer_widths() {
        return Err(Error::Prune(
            "schedule was built for a different graph".into(),
        ));
    }
    let rates = sched.rates_at(j)?;
    let mut v = prune_structural(g, &rates)?;
    v.j = j;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_of_worked_example() {
        let sched = PruneSchedule::from_sensitivity_values(vec![128], &[0.3], 10).unwrap();
        assert_eq!(sched.remaining_at(1).unwrap(), vec![120]);
        assert_eq!(sched.remaining_at(10).unwrap(), vec![39]);
    }

    #[test]
    fn insensitive_layer_never_pruned() {
        let sched = PruneSchedule::from_sensitivity_values(vec![64, 32], &[1.0, 0.5], 4).unwrap();
        assert_eq!(sched.initial_rates[0], 0.0);
        for j in 0..=4 {
            assert_eq!(sched.remaining_at(j).unwrap()[0], 64);
        }
    }

    #[test]
    fn step_out_of_range() {
        let sched = PruneSchedule::from_sensitivity_values(vec![8], &[0.5], 2).unwrap();
        assert!(sched.rates_at(3).is_err());
        assert!(PruneSchedule::from_sensitivity_values(vec![8], &[0.5], 0).is_err());
    }
}
