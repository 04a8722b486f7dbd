//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

/// Spectral norm of `AᵀA - I`.
pub fn orthonormality_defect(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    spectral_norm(&(gram - DMatrix::identity(a.ncols(), a.ncols())))
}

/// Flip each column so that its largest-magnitude entry is positive.
/// Entries within a relative 1e-12 of the column maximum count as ties and
/// the lowest index wins.
pub fn canonicalize_signs(w: &mut DMatrix<f64>) {
    for j in 0..w.ncols() {
        let mut col = w.column_mut(j);
        let max = col.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if max == 0.0 {
            continue;
        }
        let pivot = col
            .iter()
            .position(|v| v.abs() >= max * (1.0 - 1e-12))
            .unwrap_or(0);
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Extend `r` orthonormal columns to an orthonormal basis of R^m.
///
/// New columns come from Gram-Schmidt (applied twice) on the coordinate
/// vectors, taking at each step the candidate with the largest residual.
pub fn complete_basis(cols: &DMatrix<f64>) -> DMatrix<f64> {
    let m = cols.nrows();
    let mut basis: Vec<DVector<f64>> = cols.column_iter().map(|c| c.into_owned()).collect();
    while basis.len() < m {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for i in 0..m {
            let mut v = DVector::zeros(m);
            v[i] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let d = b.dot(&v);
                    v.axpy(-d, b, 1.0);
                }
            }
            let norm = v.norm();
            if best.as_ref().map_or(true, |(n, _)| norm > *n) {
                best = Some((norm, v / norm));
            }
        }
        let (_, v) = best.expect("m > 0");
        basis.push(v);
    }
    DMatrix::from_columns(&basis)
}

/// Cholesky factorization that retries with a growing diagonal jitter.
///
/// Jitter starts at `1e-10 * trace / P` and grows tenfold per retry, at most
/// three retries. Returns the factor and the jitter actually applied.
pub fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(ch) = Cholesky::new(a.clone()) {
        return Ok((ch, 0.0));
    }
    let p = a.nrows().max(1) as f64;
    let base = 1e-10 * a.trace().abs().max(f64::MIN_POSITIVE) / p;
    let mut jitter = base;
    for _ in 0..3 {
        let mut shifted = a.clone();
        for i in 0..a.nrows() {
            shifted[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(shifted) {
            log::warn!("covariance needed diagonal jitter {jitter:e}");
            return Ok((ch, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Conditioning {
        suggested_jitter: jitter,
    })
}

/// Deterministic RNG for a (seed, stream) pair.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
