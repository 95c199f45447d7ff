//! Complex element excitations `w_n = α_n e^{jβ_n}`.

use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{order_by_index, parse_field};
use crate::io::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationVector {
    weights: Vec<Complex64>,
}

/// Column layout of an excitation CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExcitationFormat {
    /// `index,amplitude,phase_deg`
    #[default]
    Polar,
    /// `index,re,im`
    Cartesian,
}

impl ExcitationVector {
    pub fn new(weights: Vec<Complex64>) -> Self {
        Self { weights }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); n])
    }

    /// Builds `α_n e^{jβ_n}` from amplitudes and phases in radians.
    pub fn from_polar(amplitudes: &[f64], phases: &[f64]) -> Result<Self> {
        if amplitudes.len() != phases.len() {
            return Err(Error::invalid(format!(
                "{} amplitudes but {} phases",
                amplitudes.len(),
                phases.len()
            )));
        }
        if amplitudes.iter().any(|&a| a < 0.0 || !a.is_finite()) {
            return Err(Error::invalid("amplitudes must be finite and non-negative"));
        }
        Ok(Self::new(
            amplitudes
                .iter()
                .zip(phases)
                .map(|(&a, &b)| Complex64::from_polar(a, b))
                .collect(),
        ))
    }

    pub fn from_dvector(v: &DVector<Complex64>) -> Self {
        Self::new(v.iter().copied().collect())
    }

    pub fn to_dvector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// `α_n = |w_n|`.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.norm()).collect()
    }

    /// `β_n = arg w_n` in `(-π, π]`.
    pub fn phases(&self) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| {
                let b = w.arg();
                if b == -std::f64::consts::PI {
                    std::f64::consts::PI
                } else {
                    b
                }
            })
            .collect()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.weights.iter().map(|w| w.norm()).fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .map(|w| w.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self::new(self.weights.iter().map(|w| w * c).collect())
    }

    /// Hermitian inner product `Σ conj(a_n) b_n`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .all(|w| w.re.is_finite() && w.im.is_finite())
    }

    /// Reads either CSV schema; the header decides which.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = reader.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        let format = match cols.as_slice() {
            ["index", "amplitude", "phase_deg"] => ExcitationFormat::Polar,
            ["index", "re", "im"] => ExcitationFormat::Cartesian,
            _ => {
                return Err(Error::input(format!(
                    "{}: expected header index,amplitude,phase_deg or index,re,im",
                    path.display()
                )))
            }
        };
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let index: usize = parse_field(&record, 0, path)?;
            let a: f64 = parse_field(&record, 1, path)?;
            let b: f64 = parse_field(&record, 2, path)?;
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::input(format!(
                    "{}: non-finite value at index {index}",
                    path.display()
                )));
            }
            let w = match format {
                ExcitationFormat::Polar => {
                    if a < 0.0 {
                        return Err(Error::input(format!(
                            "{}: negative amplitude at index {index}",
                            path.display()
                        )));
                    }
                    Complex64::from_polar(a, b.to_radians())
                }
                ExcitationFormat::Cartesian => Complex64::new(a, b),
            };
            rows.push((index, w));
        }
        if rows.is_empty() {
            return Err(Error::input(format!(
                "{}: no excitation rows",
                path.display()
            )));
        }
        Ok(Self::new(order_by_index(rows, path)?))
    }

    pub fn write_csv(&self, path: &Path, format: ExcitationFormat) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        match format {
            ExcitationFormat::Polar => {
                writer.write_record(["index", "amplitude", "phase_deg"])?;
                for (i, (a, b)) in self.amplitudes().into_iter().zip(self.phases()).enumerate() {
                    writer.write_record([
                        (i + 1).to_string(),
                        fmt_f64(a),
                        fmt_f64(b.to_degrees()),
                    ])?;
                }
            }
            ExcitationFormat::Cartesian => {
                writer.write_record(["index", "re", "im"])?;
                for (i, w) in self.weights.iter().enumerate() {
                    writer.write_record([(i + 1).to_string(), fmt_f64(w.re), fmt_f64(w.im)])?;
                }
            }
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}
