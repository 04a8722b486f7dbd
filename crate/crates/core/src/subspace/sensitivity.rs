use crate::error::Result;
use crate::models::ModelFunction;

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityRanking {
    /// Zero-based coordinate indices, most sensitive first.
    pub order: Vec<usize>,
    pub gradient: Vec<f64>,
    pub warnings: Vec<String>,
}

impl SensitivityRanking {
    pub fn top(&self, n: usize) -> &[usize] {
        &self.order[..n.min(self.order.len())]
    }
}

/// Rank coordinates by `|∂f/∂x_i|` at `point`, descending, ties to the lower index.
pub fn local_sensitivity_ranking(model: &dyn ModelFunction, point: &[f64]) -> Result<SensitivityRanking> {
    let gradient = model.gradient(point)?;
    let mut order: Vec<usize> = (0..gradient.len()).collect();
    order.sort_by(|&a, &b| gradient[b].abs().total_cmp(&gradient[a].abs()));
    let mut warnings = Vec::new();
    if gradient.iter().all(|g| *g == 0.0) {
        let msg = "gradient is zero at the ranking point; falling back to index order".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(SensitivityRanking {
        order,
        gradient,
        warnings,
    })
}
