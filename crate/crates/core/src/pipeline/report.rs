use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Below this magnitude the reference value is not used as a denominator.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-12;

/// Histogram bin width in decades of relative error.
pub const HISTOGRAM_BIN_WIDTH: f64 = 0.25;

/// Exact zero errors are placed at this log10 value.
const LOG_ERROR_FLOOR: f64 = -16.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub index: usize,
    pub reference: f64,
    pub prediction: f64,
    /// Universal-kriging predictive variance at the point.
    pub variance: f64,
    pub error: f64,
    /// Set when `|reference|` is below the floor and `error` is absolute.
    pub absolute: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q25: f64,
    pub q75: f64,
    pub q90: f64,
    pub max: f64,
    pub absolute_fallbacks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Bin edges in log10 relative error, one more than `counts`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Evaluation counts for building the surface. Value and gradient counts
/// come from instrumented counters; a gradient costs two value evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub value_evals: usize,
    pub gradient_evals: usize,
    pub effective_cost: usize,
}

impl Budget {
    pub fn new(value_evals: usize, gradient_evals: usize) -> Self {
        Self {
            value_evals,
            gradient_evals,
            effective_cost: value_evals + 2 * gradient_evals,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub errors: Vec<PointError>,
    pub summary: ErrorSummary,
    pub histogram: Histogram,
    pub budget: Budget,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn relative_error(reference: f64, prediction: f64) -> (f64, bool) {
    let diff = (reference - prediction).abs();
    if reference.abs() < RELATIVE_ERROR_FLOOR {
        (diff, true)
    } else {
        (diff / reference.abs(), false)
    }
}

pub fn histogram(errors: &[f64]) -> Histogram {
    let logs: Vec<f64> = errors
        .iter()
        .map(|e| if *e > 0.0 { e.log10().max(LOG_ERROR_FLOOR) } else { LOG_ERROR_FLOOR })
        .collect();
    if logs.is_empty() {
        return Histogram {
            edges: vec![],
            counts: vec![],
        };
    }
    let w = HISTOGRAM_BIN_WIDTH;
    let lo = (logs.iter().cloned().fold(f64::INFINITY, f64::min) / w).floor();
    let mut hi = (logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / w).floor() + 1.0;
    if hi <= lo {
        hi = lo + 1.0;
    }
    let bins = (hi - lo) as usize;
    let mut counts = vec![0; bins];
    for l in &logs {
        let b = ((l / w).floor() - lo) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    Histogram {
        edges: (0..=bins).map(|i| (lo + i as f64) * w).collect(),
        counts,
    }
}

impl ErrorReport {
    /// Build the report from `(reference, prediction, variance)` triples.
    pub fn from_predictions(points: &[(f64, f64, f64)], budget: Budget) -> Self {
        let errors: Vec<PointError> = points
            .iter()
            .enumerate()
            .map(|(index, &(reference, prediction, variance))| {
                let (error, absolute) = relative_error(reference, prediction);
                PointError {
                    index,
                    reference,
                    prediction,
                    variance,
                    error,
                    absolute,
                }
            })
            .collect();
        let mut sorted: Vec<f64> = errors.iter().map(|e| e.error).collect();
        sorted.sort_by(f64::total_cmp);
        let count = sorted.len();
        let summary = ErrorSummary {
            count,
            mean: sorted.iter().sum::<f64>() / count.max(1) as f64,
            median: quantile(&sorted, 0.5),
            q10: quantile(&sorted, 0.1),
            q25: quantile(&sorted, 0.25),
            q75: quantile(&sorted, 0.75),
            q90: quantile(&sorted, 0.9),
            max: sorted.last().copied().unwrap_or(f64::NAN),
            absolute_fallbacks: errors.iter().filter(|e| e.absolute).count(),
        };
        let histogram = histogram(&sorted);
        Self {
            errors,
            summary,
            histogram,
            budget,
        }
    }

    pub fn write_errors_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "reference", "prediction", "variance", "error", "absolute"])?;
        for e in &self.errors {
            w.write_record([
                e.index.to_string(),
                e.reference.to_string(),
                e.prediction.to_string(),
                e.variance.to_string(),
                e.error.to_string(),
                u8::from(e.absolute).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_histogram_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["log10_error_lo", "log10_error_hi", "count"])?;
        for (i, c) in self.histogram.counts.iter().enumerate() {
            w.write_record([
                self.histogram.edges[i].to_string(),
                self.histogram.edges[i + 1].to_string(),
                c.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
