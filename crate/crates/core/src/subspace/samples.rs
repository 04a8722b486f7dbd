use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Inputs `x_j`, values `f_j` and gradients `∇f_j` for `j = 1..M`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSampleSet {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    gradients: Vec<Vec<f64>>,
}

impl GradientSampleSet {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>, gradients: Vec<Vec<f64>>) -> Result<Self> {
        let count = points.len();
        if count == 0 {
            return Err(Error::invalid("gradient sample set needs at least one sample"));
        }
        if values.len() != count || gradients.len() != count {
            return Err(Error::ShapeMismatch(format!(
                "{} points, {} values, {} gradients",
                count,
                values.len(),
                gradients.len()
            )));
        }
        let m = points[0].len();
        if m == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        for (j, (x, g)) in points.iter().zip(&gradients).enumerate() {
            if x.len() != m || g.len() != m {
                return Err(Error::ShapeMismatch(format!(
                    "sample {j}: expected length {m}, got point {} and gradient {}",
                    x.len(),
                    g.len()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteSample { index: j, what: "point" });
            }
            if !values[j].is_finite() {
                return Err(Error::NonFiniteSample { index: j, what: "value" });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteSample { index: j, what: "gradient" });
            }
        }
        Ok(Self {
            points,
            values,
            gradients,
        })
    }

    /// Gradient-only sample set; points and values are filled with zeros.
    pub fn from_gradients(gradients: Vec<Vec<f64>>) -> Result<Self> {
        let m = gradients.first().map_or(0, Vec::len);
        let count = gradients.len();
        Self::new(vec![vec![0.0; m]; count], vec![0.0; count], gradients)
    }

    pub fn m(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gradients(&self) -> &[Vec<f64>] {
        &self.gradients
    }

    /// Biased sample variance `(1/M) Σ (f_j - mean)²`.
    pub fn sigma_hat2(&self) -> f64 {
        let m = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / m;
        self.values.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / m
    }

    /// CSV with header `x1..xm,f,g1..gm`, one row per sample.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let m = self.m();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
        header.push("f".into());
        header.extend((1..=m).map(|i| format!("g{i}")));
        w.write_record(&header)?;
        for j in 0..self.len() {
            let row = self.points[j]
                .iter()
                .chain(std::iter::once(&self.values[j]))
                .chain(&self.gradients[j])
                .map(|v| v.to_string());
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let width = r.headers()?.len();
        if width < 3 || width % 2 == 0 {
            return Err(Error::Config(format!(
                "sample CSV needs 2m+1 columns, found {width}"
            )));
        }
        let m = (width - 1) / 2;
        let (mut points, mut values, mut gradients) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Config(format!("sample CSV: {e}")))?;
            points.push(row[..m].to_vec());
            values.push(row[m]);
            gradients.push(row[m + 1..].to_vec());
        }
        Self::new(points, values, gradients)
    }
}
