use rand::Rng;
use rand_distr::StandardNormal;

use super::lift::solve_box_feasibility;
use super::{DensityKind, ReducedDomain};
use crate::error::{Error, Result};
use crate::linalg::seeded_rng;

/// Hit-and-run burn-in is this many steps per inactive dimension.
pub const BURN_IN_PER_DIM: usize = 100;
pub const THINNING: usize = 10;

/// Starting points are lifted into this slightly shrunken box when possible,
/// so the chain does not start on a vertex of the slice.
const INTERIOR_BOUND: f64 = 1.0 - 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct ChainDiagnostics {
    pub burn_in: usize,
    pub thinning: usize,
    /// Smallest per-coordinate effective sample size of the thinned draws.
    pub effective_sample_size: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalDraws {
    pub samples: Vec<Vec<f64>>,
    /// Present for Markov-chain draws (uniform inputs).
    pub diagnostics: Option<ChainDiagnostics>,
}

/// Draw `count` inactive coordinates `z` from the conditional density given `y`.
///
/// Gaussian inputs: independent standard normals. Uniform inputs: thinned
/// hit-and-run states on `{z : -1 <= W1y + W2z <= 1}`.
pub fn sample_conditional_z(domain: &ReducedDomain, y: &[f64], count: usize, seed: u64) -> Result<ConditionalDraws> {
    if count == 0 {
        return Err(Error::OutOfRange {
            name: "N",
            value: 0.0,
            expected: "N >= 1".into(),
        });
    }
    if y.len() != domain.n() {
        return Err(Error::ShapeMismatch(format!("reduced point has length {}, expected {}", y.len(), domain.n())));
    }
    let k = domain.m() - domain.n();
    let mut rng = seeded_rng(seed, 0);
    match domain.input().kind {
        DensityKind::GaussianStandard => Ok(ConditionalDraws {
            samples: (0..count)
                .map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect())
                .collect(),
            diagnostics: None,
        }),
        DensityKind::UniformHypercube => hit_and_run(domain, y, count, &mut rng),
    }
}

fn hit_and_run<R: Rng>(domain: &ReducedDomain, y: &[f64], count: usize, rng: &mut R) -> Result<ConditionalDraws> {
    let w2 = domain.w2();
    let (m, k) = (domain.m(), w2.ncols());
    let start = solve_box_feasibility(domain.w1(), y, INTERIOR_BOUND)
        .or_else(|_| solve_box_feasibility(domain.w1(), y, 1.0))?;
    let mut z = domain.project_inactive(&start);
    let center = domain.combine(y, &[]);
    let mut x = domain.combine(y, &z);

    let burn_in = BURN_IN_PER_DIM * k;
    let total = burn_in + THINNING * count;
    let mut samples = Vec::with_capacity(count);
    let mut dir = vec![0.0; k];
    let mut v = vec![0.0; m];
    for step in 1..=total {
        for d in dir.iter_mut() {
            *d = rng.sample(StandardNormal);
        }
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm > 0.0 {
            dir.iter_mut().for_each(|d| *d /= norm);
            for (i, vi) in v.iter_mut().enumerate() {
                *vi = (0..k).map(|j| w2[(i, j)] * dir[j]).sum();
            }
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for (xi, vi) in x.iter().zip(&v) {
                if vi.abs() < 1e-15 {
                    continue;
                }
                let (a, b) = ((-1.0 - xi) / vi, (1.0 - xi) / vi);
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                lo = lo.max(a);
                hi = hi.min(b);
            }
            // Pull the chord ends inward by a relative 1e-12 so roundoff
            // cannot step outside the box.
            let (lo, hi) = (lo.min(0.0) * (1.0 - 1e-12), hi.max(0.0) * (1.0 - 1e-12));
            if hi > lo {
                let t = rng.random_range(lo..=hi);
                z.iter_mut().zip(&dir).for_each(|(zj, dj)| *zj += t * dj);
                x = domain.combine(&[], &z);
                x.iter_mut().zip(&center).for_each(|(xi, ci)| *xi += ci);
            }
        }
        if step > burn_in && (step - burn_in) % THINNING == 0 {
            samples.push(z.clone());
        }
    }
    let ess = (0..k)
        .map(|j| effective_sample_size(&samples.iter().map(|s| s[j]).collect::<Vec<_>>()))
        .fold(f64::INFINITY, f64::min);
    Ok(ConditionalDraws {
        samples,
        diagnostics: Some(ChainDiagnostics {
            burn_in,
            thinning: THINNING,
            effective_sample_size: ess.min(count as f64),
        }),
    })
}

/// `N / (1 + 2 Σ ρ_k)` summing autocorrelations until the first non-positive lag.
fn effective_sample_size(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 3 {
        return n as f64;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let mut sum = 0.0;
    for lag in 1..n / 2 {
        let rho = (0..n - lag).map(|i| (series[i] - mean) * (series[i + lag] - mean)).sum::<f64>() / (n as f64 * var);
        if rho <= 0.0 {
            break;
        }
        sum += rho;
    }
    n as f64 / (1.0 + 2.0 * sum)
}
