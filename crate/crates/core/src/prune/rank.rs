use crate::ir::Node;
use crate::{Error, Result};

/// ℓ¹ norm of every output neuron / filter of a trainable layer. Biases are
/// not part of the norm.
pub fn l1_norms(layer: &Node) -> Result<Vec<f64>> {
    let (width, w) = match (layer.output_width(), layer.weights()) {
        (Some(width), Some(w)) => (width, w),
        _ => {
            return Err(Error::Prune(format!(
                "node `{}` ({}) has no prunable outputs",
                layer.id,
                layer.op.kind()
            )))
        }
    };
    let per_output = w.len() / width;
    Ok(w.data
        .chunks_exact(per_output)
        .map(|row| row.iter().map(|v| f64::from(v.abs())).sum())
        .collect())
}

/// Output indices ordered by descending ℓ¹ norm (the keep order). Equal norms
/// keep the lower index first.
pub fn l1_rank(layer: &Node) -> Result<Vec<usize>> {
    let norms = l1_norms(layer)?;
    let mut order: Vec<usize> = (0..norms.len()).collect();
    // Stable sort keeps index order among ties.
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    Ok(order)
}
