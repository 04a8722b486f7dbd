//! Discrete Karhunen-Loève decomposition of the exponential 1-norm
//! correlation `exp(-‖s - t‖₁ / β)` on a regular node grid of `[0,1]²`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::canonicalize_signs;

/// Largest grid (in nodes) accepted by the dense eigensolver.
pub const MAX_GRID_NODES: usize = 4096;

const CACHE_MAGIC: &[u8; 8] = b"KLCACHE\0";
const CACHE_VERSION: u32 = 1;

/// Leading eigenpairs of the correlation operator on a `q × q` node grid.
#[derive(Clone, Debug, PartialEq)]
pub struct KlExpansion {
    pub q: usize,
    pub beta: f64,
    /// `γ_i`, square roots of the operator eigenvalues, descending.
    pub values: Vec<f64>,
    /// Column `i` holds `φ_i` at the nodes, index `j * q + i` for node `(i h, j h)`.
    pub modes: DMatrix<f64>,
}

impl KlExpansion {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `γ_i / γ_1`.
    pub fn normalized_values(&self) -> Vec<f64> {
        let first = self.values[0];
        self.values.iter().map(|v| v / first).collect()
    }
}

/// Trapezoidal node weights on the unit square, row-major over nodes.
pub fn trapezoid_weights(q: usize) -> Vec<f64> {
    let h = 1.0 / (q - 1) as f64;
    let edge = |i: usize| if i == 0 || i == q - 1 { 0.5 } else { 1.0 };
    (0..q * q)
        .map(|k| {
            let (i, j) = (k % q, k / q);
            h * h * edge(i) * edge(j)
        })
        .collect()
}

/// Top-`m` eigenpairs of `C W` where `C_jk = exp(-‖s_j - s_k‖₁/β)` and `W`
/// holds trapezoidal weights. Modes are orthonormal in the weighted inner
/// product `φᵀWφ`.
pub fn kl_decompose(q: usize, beta: f64, m: usize) -> Result<KlExpansion> {
    if q < 2 {
        return Err(Error::invalid("KL grid needs at least 2 nodes per side"));
    }
    let nodes = q * q;
    if nodes > MAX_GRID_NODES {
        return Err(Error::OutOfRange {
            name: "q^2",
            value: nodes as f64,
            expected: format!("at most {MAX_GRID_NODES} nodes"),
        });
    }
    if m == 0 || m > nodes {
        return Err(Error::OutOfRange {
            name: "m",
            value: m as f64,
            expected: format!("1 <= m <= {nodes}"),
        });
    }
    if !(beta > 0.0) {
        return Err(Error::OutOfRange {
            name: "beta",
            value: beta,
            expected: "beta > 0".into(),
        });
    }
    let h = 1.0 / (q - 1) as f64;
    let sqrt_w: Vec<f64> = trapezoid_weights(q).iter().map(|w| w.sqrt()).collect();
    let sym = DMatrix::from_fn(nodes, nodes, |a, b| {
        let (ia, ja) = ((a % q) as f64, (a / q) as f64);
        let (ib, jb) = ((b % q) as f64, (b / q) as f64);
        let dist = h * ((ia - ib).abs() + (ja - jb).abs());
        sqrt_w[a] * (-dist / beta).exp() * sqrt_w[b]
    });
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..nodes).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order.truncate(m);

    let values = order.iter().map(|&k| eig.eigenvalues[k].max(0.0).sqrt()).collect();
    let mut modes = DMatrix::from_fn(nodes, m, |node, col| eig.eigenvectors[(node, order[col])] / sqrt_w[node]);
    canonicalize_signs(&mut modes);
    Ok(KlExpansion { q, beta, values, modes })
}

fn cache_path(dir: &Path, q: usize, beta: f64, m: usize) -> PathBuf {
    dir.join(format!("kl_q{q}_m{m}_b{:016x}.bin", beta.to_bits()))
}

pub fn write_kl_cache<W: Write>(kl: &KlExpansion, mut out: W) -> Result<()> {
    out.write_all(CACHE_MAGIC)?;
    out.write_all(&CACHE_VERSION.to_le_bytes())?;
    out.write_all(&(kl.q as u32).to_le_bytes())?;
    out.write_all(&(kl.len() as u32).to_le_bytes())?;
    out.write_all(&kl.beta.to_le_bytes())?;
    for v in kl.values.iter().chain(kl.modes.as_slice()) {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_kl_cache<R: Read>(mut input: R) -> Result<KlExpansion> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Config("not a KL cache file".into()));
    }
    let mut word = [0u8; 4];
    let mut read_u32 = |input: &mut R| -> Result<u32> {
        input.read_exact(&mut word)?;
        Ok(u32::from_le_bytes(word))
    };
    let version = read_u32(&mut input)?;
    if version != CACHE_VERSION {
        return Err(Error::Config(format!("KL cache version {version}, expected {CACHE_VERSION}")));
    }
    let q = read_u32(&mut input)? as usize;
    let m = read_u32(&mut input)? as usize;
    let read_f64 = |input: &mut R| -> Result<f64> {
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let beta = read_f64(&mut input)?;
    let values = (0..m).map(|_| read_f64(&mut input)).collect::<Result<Vec<_>>>()?;
    let data = (0..q * q * m).map(|_| read_f64(&mut input)).collect::<Result<Vec<_>>>()?;
    Ok(KlExpansion {
        q,
        beta,
        values,
        modes: DMatrix::from_vec(q * q, m, data),
    })
}

/// Decompose, reusing a sidecar file in `dir` keyed by `(q, β, m)` when present.
pub fn load_or_decompose(dir: Option<&Path>, q: usize, beta: f64, m: usize) -> Result<KlExpansion> {
    let Some(dir) = dir else {
        return kl_decompose(q, beta, m);
    };
    let path = cache_path(dir, q, beta, m);
    if let Ok(file) = fs::File::open(&path) {
        match read_kl_cache(std::io::BufReader::new(file)) {
            Ok(kl) if kl.q == q && kl.len() == m && kl.beta.to_bits() == beta.to_bits() => return Ok(kl),
            Ok(_) => log::warn!("KL cache {} has mismatched key; recomputing", path.display()),
            Err(e) => log::warn!("ignoring unreadable KL cache {}: {e}", path.display()),
        }
    }
    let kl = kl_decompose(q, beta, m)?;
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    {
        let mut w = std::io::BufWriter::new(fs::File::create(&tmp)?);
        write_kl_cache(&kl, &mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(kl)
}

/// Weighted Gram matrix `ΦᵀWΦ` of the modes.
pub fn weighted_gram(kl: &KlExpansion) -> DMatrix<f64> {
    let w = DVector::from_vec(trapezoid_weights(kl.q));
    let scaled = DMatrix::from_fn(kl.modes.nrows(), kl.modes.ncols(), |r, c| kl.modes[(r, c)] * w[r]);
    kl.modes.transpose() * scaled
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1-D trapezoidal eigenvalues of exp(-|s-t|/β), used for the
    /// separable-kernel cross-check.
    fn one_d_eigenvalues(q: usize, beta: f64) -> Vec<f64> {
        let h = 1.0 / (q - 1) as f64;
        let w: Vec<f64> = (0..q).map(|i| if i == 0 || i == q - 1 { 0.5 * h } else { h }).collect();
        let mat = DMatrix::from_fn(q, q, |a, b| {
            w[a].sqrt() * (-(h * (a as f64 - b as f64).abs()) / beta).exp() * w[b].sqrt()
        });
        let mut ev: Vec<f64> = SymmetricEigen::new(mat).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    #[test]
    fn modes_are_weighted_orthonormal() {
        let kl = kl_decompose(9, 0.5, 12).unwrap();
        let gram = weighted_gram(&kl);
        assert!((gram - DMatrix::identity(12, 12)).amax() < 1e-8);
        assert!(kl.values.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn separable_kernel_matches_tensor_product() {
        let (q, beta) = (17, 0.4);
        let kl = kl_decompose(q, beta, 3).unwrap();
        let one = one_d_eigenvalues(q, beta);
        let mut products: Vec<f64> = (0..q).flat_map(|i| (0..q).map(move |j| (i, j))).map(|(i, j)| one[i] * one[j]).collect();
        products.sort_by(|a, b| b.total_cmp(a));
        for k in 0..3 {
            let mu = kl.values[k].powi(2);
            assert!((mu - products[k]).abs() <= 0.02 * products[k], "{mu} vs {}", products[k]);
        }
    }

    #[test]
    fn long_correlation_is_nearly_rank_one() {
        let kl = kl_decompose(9, 1e6, 3).unwrap();
        assert!((kl.values[0].powi(2) - 1.0).abs() < 1e-5);
        assert!(kl.values[1].powi(2) < 1e-5);
    }

    #[test]
    fn guards() {
        assert!(matches!(kl_decompose(65, 1.0, 10), Err(Error::OutOfRange { name: "q^2", .. })));
        assert!(kl_decompose(5, 1.0, 26).is_err());
        assert!(kl_decompose(5, 0.0, 2).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let first = load_or_decompose(Some(dir.path()), 7, 0.3, 5).unwrap();
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        let second = load_or_decompose(Some(dir.path()), 7, 0.3, 5).unwrap();
        assert_eq!(first, second);
        let mut buf = Vec::new();
        write_kl_cache(&first, &mut buf).unwrap();
        buf[8] = 99;
        assert!(read_kl_cache(buf.as_slice()).is_err());
    }
}
