//! Monte Carlo estimate of the conditional expectation of `f` given the
//! active coordinates, `Ĝ(y) = (1/N) Σ f(W1y + W2z_i)`, and its full-space
//! form `F̂(x) = Ĝ(W1ᵀx)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{sample_conditional_z, ReducedDomain};
use crate::error::{Error, Result};
use crate::linalg::splitmix64;
use crate::models::ModelFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSurrogateConfig {
    /// Conditional samples per evaluation.
    pub samples: usize,
    pub seed: u64,
}

impl Default for McSurrogateConfig {
    fn default() -> Self {
        Self { samples: 1, seed: 0 }
    }
}

impl McSurrogateConfig {
    pub fn new(samples: usize, seed: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::OutOfRange {
                name: "N",
                value: 0.0,
                expected: "N >= 1".into(),
            });
        }
        Ok(Self { samples, seed })
    }

    /// Independent stream for the `index`-th evaluation point.
    pub fn for_point(&self, index: usize) -> Self {
        Self {
            samples: self.samples,
            seed: splitmix64(self.seed ^ splitmix64(index as u64 + 1)),
        }
    }
}

pub fn evaluate_ghat(model: &dyn ModelFunction, domain: &ReducedDomain, y: &[f64], cfg: &McSurrogateConfig) -> Result<f64> {
    let draws = sample_conditional_z(domain, y, cfg.samples, cfg.seed)?;
    let mut sum = 0.0;
    for z in &draws.samples {
        let x = domain.combine(y, z);
        sum += model.value(&x).map_err(|e| Error::Model {
            point: x.clone(),
            source: Box::new(e),
        })?;
    }
    Ok(sum / draws.samples.len() as f64)
}

pub fn evaluate_fhat(model: &dyn ModelFunction, domain: &ReducedDomain, x: &[f64], cfg: &McSurrogateConfig) -> Result<f64> {
    if x.len() != domain.m() {
        return Err(Error::ShapeMismatch(format!("expected a {}-vector", domain.m())));
    }
    evaluate_ghat(model, domain, &domain.project(x), cfg)
}

/// Training pairs `(y_k, Ĝ_k)` as CSV with header `y1..yn,value`.
pub fn write_training_csv<W: Write>(design: &[Vec<f64>], values: &[f64], out: W) -> Result<()> {
    let n = design.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=n).map(|i| format!("y{i}")).collect();
    header.push("value".into());
    w.write_record(&header)?;
    for (y, v) in design.iter().zip(values) {
        w.write_record(y.iter().chain(std::iter::once(v)).map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_training_csv<R: std::io::Read>(input: R) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut r = csv::Reader::from_reader(input);
    let (mut design, mut values) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let row = rec?
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("training CSV: {e}")))?;
        let (last, head) = row.split_last().ok_or_else(|| Error::Config("empty training row".into()))?;
        design.push(head.to_vec());
        values.push(*last);
    }
    Ok((design, values))
}
