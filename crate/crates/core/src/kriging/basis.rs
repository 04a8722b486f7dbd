use nalgebra::DMatrix;

/// Monomials of total degree `<= degree` in `n` variables, graded
/// lexicographic order: `1, y1..yn, y1², y1y2, ..., yn²`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyBasis {
    n: usize,
    degree: usize,
    exponents: Vec<Vec<u32>>,
}

impl PolyBasis {
    pub fn new(n: usize, degree: usize) -> Self {
        let mut exponents = Vec::new();
        for d in 0..=degree {
            let mut level = Vec::new();
            compositions(n, d as u32, &mut vec![0; n], 0, &mut level);
            exponents.extend(level);
        }
        Self { n, degree, exponents }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        self.exponents
            .iter()
            .map(|e| e.iter().zip(y).map(|(&p, v)| v.powi(p as i32)).product())
            .collect()
    }

    pub fn design_matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let rows: Vec<Vec<f64>> = points.iter().map(|p| self.eval(p)).collect();
        DMatrix::from_fn(points.len(), self.len(), |i, j| rows[i][j])
    }
}

/// Exponent vectors summing to `remaining`, in descending lexicographic order.
fn compositions(n: usize, remaining: u32, current: &mut Vec<u32>, pos: usize, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == n || n == 0 {
        if n > 0 {
            current[pos] = remaining;
        }
        out.push(current.clone());
        if n > 0 {
            current[pos] = 0;
        }
        return;
    }
    for p in (0..=remaining).rev() {
        current[pos] = p;
        compositions(n, remaining - p, current, pos + 1, out);
    }
    current[pos] = 0;
}

/// `(n + d choose d)`.
pub fn basis_size(n: usize, degree: usize) -> usize {
    (1..=degree).fold(1, |acc, k| acc * (n + k) / k)
}
