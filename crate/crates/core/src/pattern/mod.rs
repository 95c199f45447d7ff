//! Array factor, power pattern and pattern-level metrics.

pub mod grid;
pub mod mask;

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

pub use grid::{AngularGrid, Direction, GridKind, GridSpec};
pub use mask::{db_to_linear, linear_to_db, MaskRegion, MaskSpec, PatternMask};

use crate::error::{Error, Result};
use crate::excitation::ExcitationVector;
use crate::geometry::ArrayGeometry;
use crate::io::fmt_f64;

/// Floor applied to dB values in exported files only.
pub const REPORT_FLOOR_DB: f64 = -120.0;

/// Default full-sphere resolution for the Q-factor integral.
pub const Q_GRID_THETA: usize = 180;
pub const Q_GRID_PHI: usize = 360;

#[derive(Debug, Clone, PartialEq)]
pub struct PatternSamples {
    values: Vec<Complex64>,
    power: Vec<f64>,
}

impl PatternSamples {
    pub fn from_values(values: Vec<Complex64>) -> Self {
        let power = values.iter().map(|v| v.norm_sqr()).collect();
        Self { values, power }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn peak_power(&self) -> f64 {
        self.power.iter().cloned().fold(0.0, f64::max)
    }

    /// `P / max P`; all zeros stay zero.
    pub fn normalized_power(&self) -> Vec<f64> {
        let peak = self.peak_power();
        if peak > 0.0 {
            self.power.iter().map(|p| p / peak).collect()
        } else {
            self.power.clone()
        }
    }

    /// Normalized power in dB, floored at [`REPORT_FLOOR_DB`].
    pub fn power_db(&self) -> Vec<f64> {
        self.normalized_power()
            .into_iter()
            .map(|p| {
                if p > 0.0 {
                    linear_to_db(p).max(REPORT_FLOOR_DB)
                } else {
                    REPORT_FLOOR_DB
                }
            })
            .collect()
    }

    /// Writes `theta_deg,phi_deg,power_db,power_linear` with unnormalized `power_linear`.
    pub fn write_csv(&self, path: &Path, grid: &AngularGrid) -> Result<()> {
        check_len(self.len(), grid.len(), "pattern", "grid")?;
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["theta_deg", "phi_deg", "power_db", "power_linear"])?;
        for ((d, db), p) in grid
            .directions()
            .iter()
            .zip(self.power_db())
            .zip(&self.power)
        {
            writer.write_record([
                fmt_f64(d.theta.to_degrees()),
                fmt_f64(d.phi.to_degrees()),
                fmt_f64(db),
                fmt_f64(*p),
            ])?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn check_len(a: usize, b: usize, what_a: &str, what_b: &str) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!(
            "{what_a} has {a} samples but {what_b} has {b}"
        )));
    }
    Ok(())
}

/// `e^{j2π(x u + y v)}` for element `p` in direction cosines `(u, v)`.
#[inline]
pub fn steering(p: crate::geometry::Position, u: f64, v: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * (p.x * u + p.y * v)).sin_cos();
    Complex64::new(c, s)
}

/// `AF(θ_m, φ_m) = Σ_n w_n e^{j2π(x_n sinθ cosφ + y_n sinθ sinφ)}`.
pub fn array_factor(
    geom: &ArrayGeometry,
    w: &ExcitationVector,
    grid: &AngularGrid,
) -> Result<PatternSamples> {
    check_len(w.len(), geom.len(), "excitation", "geometry")?;
    if grid.is_empty() {
        return Err(Error::invalid("empty angular grid"));
    }
    let positions = geom.positions();
    let weights = w.weights();
    let values = grid
        .directions()
        .par_iter()
        .map(|d| {
            let (u, v) = d.cosines();
            positions
                .iter()
                .zip(weights)
                .fold(Complex64::new(0.0, 0.0), |acc, (&p, &wn)| {
                    acc + wn * steering(p, u, v)
                })
        })
        .collect();
    Ok(PatternSamples::from_values(values))
}

/// Weighted mask violation of the peak-normalized pattern, with the leading `1/2π`.
pub fn mask_matching(p: &PatternSamples, mask: &PatternMask, grid: &AngularGrid) -> Result<f64> {
    check_len(p.len(), mask.len(), "pattern", "mask")?;
    check_len(p.len(), grid.len(), "pattern", "grid")?;
    Ok(mask_violation(&p.normalized_power(), mask, grid.weights()))
}

/// Core of [`mask_matching`] on an already normalized power vector.
pub fn mask_violation(normalized: &[f64], mask: &PatternMask, weights: &[f64]) -> f64 {
    let heaviside = |t: f64| if t >= 0.0 { 1.0 } else { 0.0 };
    let sum: f64 = normalized
        .iter()
        .zip(mask.lower().iter().zip(mask.upper()))
        .zip(weights)
        .map(|((&pm, (&lm, &um)), &wm)| {
            wm * ((pm - um) * heaviside(pm - um) + (lm - pm) * heaviside(lm - pm))
        })
        .sum();
    sum / (2.0 * PI)
}

/// `Σ ω |P − P_ref| / Σ ω P_ref` on raw (unnormalized) powers.
pub fn pattern_tolerance(
    p: &PatternSamples,
    p_ref: &PatternSamples,
    grid: &AngularGrid,
) -> Result<f64> {
    check_len(p.len(), p_ref.len(), "pattern", "reference pattern")?;
    check_len(p.len(), grid.len(), "pattern", "grid")?;
    let w = grid.weights();
    let den: f64 = p_ref.power().iter().zip(w).map(|(pr, wm)| wm * pr).sum();
    if den <= 0.0 {
        return Err(Error::numerical("reference pattern has zero power"));
    }
    let num: f64 = p
        .power()
        .iter()
        .zip(p_ref.power())
        .zip(w)
        .map(|((a, b), wm)| wm * (a - b).abs())
        .sum();
    Ok(num / den)
}

/// `Σ α_n² / Σ ω_m P_m`, with `p` sampled on a full-sphere `grid`.
pub fn q_factor(w: &ExcitationVector, p: &PatternSamples, grid: &AngularGrid) -> Result<f64> {
    check_len(p.len(), grid.len(), "pattern", "grid")?;
    let radiated: f64 = p
        .power()
        .iter()
        .zip(grid.weights())
        .map(|(pm, wm)| pm * wm)
        .sum();
    if radiated <= 0.0 {
        return Err(Error::numerical("pattern radiates no power"));
    }
    let excitation: f64 = w.weights().iter().map(|x| x.norm_sqr()).sum();
    Ok(excitation / radiated)
}

/// Q-factor on the default full-sphere grid.
pub fn q_factor_full_sphere(geom: &ArrayGeometry, w: &ExcitationVector) -> Result<f64> {
    let grid = AngularGrid::full_sphere(Q_GRID_THETA, Q_GRID_PHI)?;
    let p = array_factor(geom, w, &grid)?;
    q_factor(w, &p, &grid)
}

/// Highest normalized power over the mask's sidelobe region, in dB.
pub fn peak_sidelobe_db(p: &PatternSamples, mask: &PatternMask) -> Result<Option<f64>> {
    check_len(p.len(), mask.len(), "pattern", "mask")?;
    let np = p.normalized_power();
    Ok((0..np.len())
        .filter(|&m| mask.region(m) == MaskRegion::Sidelobe)
        .map(|m| np[m])
        .reduce(f64::max)
        .map(linear_to_db))
}

/// Spread of `P / UM` over the main lobe, in dB: 0 for a pattern that follows
/// the desired shape exactly.
pub fn ripple_db(p: &PatternSamples, mask: &PatternMask) -> Result<Option<f64>> {
    check_len(p.len(), mask.len(), "pattern", "mask")?;
    let np = p.normalized_power();
    let ratios: Vec<f64> = (0..np.len())
        .filter(|&m| mask.region(m) == MaskRegion::MainLobe)
        .map(|m| np[m] / mask.upper()[m])
        .collect();
    if ratios.is_empty() {
        return Ok(None);
    }
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    if lo <= 0.0 {
        return Ok(Some(f64::INFINITY));
    }
    Ok(Some(linear_to_db(hi / lo)))
}

/// Width in degrees of the contiguous region around the peak whose normalized
/// power stays at or above `level_db`. One-dimensional grids only.
pub fn beamwidth_deg(p: &PatternSamples, grid: &AngularGrid, level_db: f64) -> Result<f64> {
    check_len(p.len(), grid.len(), "pattern", "grid")?;
    if !grid.is_one_dimensional() {
        return Err(Error::invalid("beamwidth needs a one-dimensional grid"));
    }
    let np = p.normalized_power();
    let level = db_to_linear(level_db);
    let peak = np
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .ok_or_else(|| Error::invalid("empty pattern"))?;
    let mut lo = peak;
    while lo > 0 && np[lo - 1] >= level {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < np.len() && np[hi + 1] >= level {
        hi += 1;
    }
    let th = |k: usize| grid.directions()[k].theta.to_degrees();
    Ok(th(hi) - th(lo))
}
