//! Reference excitations whose pattern fits a mask.
//!
//! The fitter alternates between the set of fields inside the mask (per-sample
//! magnitude clipping, phase kept) and the set of fields the array can
//! radiate (truncated pseudoinverse followed by the forward operator).

use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::ExcitationVector;
use crate::geometry::ArrayGeometry;
use crate::operator::RadiationOperator;
use crate::pattern::{array_factor, mask_matching, mask_violation, AngularGrid, PatternMask};

/// Φ_M below which a fit counts as converged.
pub const FIT_TOLERANCE: f64 = 1e-6;

fn default_max_iters() -> usize {
    2000
}
fn default_margin() -> f64 {
    0.25
}
fn default_sidelobe_margin() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitterConfig {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub seed: u64,
    /// Extra independent starts after the first.
    #[serde(default)]
    pub restarts: usize,
    /// Main-lobe tightening (dB) of the clipping target.
    #[serde(default = "default_margin")]
    pub margin_db: f64,
    /// Sidelobe tightening (dB) of the clipping target.
    #[serde(default = "default_sidelobe_margin")]
    pub sidelobe_margin_db: f64,
    /// Phase of the first start's field; later starts are always random.
    #[serde(default)]
    pub initial_phase: InitialPhase,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPhase {
    #[default]
    Random,
    Flat,
}

impl Default for FitterConfig {
    fn default() -> Self {
        Self {
            max_iters: default_max_iters(),
            seed: 0,
            restarts: 0,
            margin_db: default_margin(),
            sidelobe_margin_db: default_sidelobe_margin(),
            initial_phase: InitialPhase::Random,
        }
    }
}

impl FitterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("fitter max_iters must be >= 1"));
        }
        if !(self.margin_db >= 0.0 && self.sidelobe_margin_db >= 0.0) {
            return Err(Error::invalid("fitter margins must be >= 0 dB"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceFit {
    /// Best excitations, scaled so the largest amplitude is 1.
    pub excitations: ExcitationVector,
    /// Mask violation of `excitations`.
    pub phi_m: f64,
    pub converged: bool,
    /// Iterations run, summed over all starts.
    pub iterations: usize,
    /// Best-so-far Φ_M after each iteration.
    pub history: Vec<f64>,
}

/// Reads reference excitations and warns when their pattern violates `mask`.
pub fn load_reference(
    path: &Path,
    geom: &ArrayGeometry,
    mask: &PatternMask,
    grid: &AngularGrid,
) -> Result<ExcitationVector> {
    let w = ExcitationVector::read_csv(path)?;
    if w.len() != geom.len() {
        return Err(Error::input(format!(
            "{}: {} excitations for a {}-element array",
            path.display(),
            w.len(),
            geom.len()
        )));
    }
    let phi = mask_matching(&array_factor(geom, &w, grid)?, mask, grid)?;
    if phi > 0.0 {
        log::warn!(
            "reference {} violates the mask (Φ_M = {phi:e})",
            path.display()
        );
    }
    Ok(w)
}

/// Fits `mask` with excitations confined to the leading `rank` right singular vectors of `op`.
pub fn synthesize_reference(
    op: &RadiationOperator,
    mask: &PatternMask,
    grid: &AngularGrid,
    rank: usize,
    cfg: &FitterConfig,
) -> Result<ReferenceFit> {
    cfg.validate()?;
    if mask.len() != op.n_samples() || grid.len() != op.n_samples() {
        return Err(Error::invalid(
            "mask, grid and operator must share the same samples",
        ));
    }
    let target = mask.shrink(cfg.margin_db, cfg.sidelobe_margin_db);
    let lo: Vec<f64> = target.lower().iter().map(|x| x.sqrt()).collect();
    let hi: Vec<f64> = target.upper().iter().map(|x| x.sqrt()).collect();
    let start_mag: Vec<f64> = mask
        .lower()
        .iter()
        .zip(mask.upper())
        .map(|(l, u)| (l * u).sqrt().sqrt())
        .collect();
    let weights = grid.weights();
    let g = op.matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut best_key = (f64::INFINITY, f64::INFINITY);
    let mut best_w: Option<ExcitationVector> = None;
    let mut history = Vec::new();
    let mut iterations = 0;

    'starts: for start in 0..=cfg.restarts {
        let flat = start == 0 && cfg.initial_phase == InitialPhase::Flat;
        let field: Vec<Complex64> = start_mag
            .iter()
            .map(|&a| {
                let phase = if flat {
                    0.0
                } else {
                    2.0 * std::f64::consts::PI * rng.random::<f64>()
                };
                if a > 0.0 {
                    Complex64::from_polar(a, phase)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let mut w = op.pseudo_inverse(rank, &field)?;
        for _ in 0..cfg.max_iters {
            iterations += 1;
            let af: DVector<Complex64> = g * w.to_dvector();
            let power: Vec<f64> = af.iter().map(|z| z.norm_sqr()).collect();
            let peak = power.iter().cloned().fold(0.0, f64::max);
            if !(peak > 0.0) {
                return Err(Error::numerical("the fitter produced a zero field"));
            }
            let normalized: Vec<f64> = power.iter().map(|p| p / peak).collect();
            let key = (
                mask_violation(&normalized, mask, weights),
                mask_violation(&normalized, &target, weights),
            );
            if key < best_key {
                best_key = key;
                best_w = Some(w.clone());
            }
            history.push(best_key.0);
            if key.1 == 0.0 {
                break 'starts;
            }
            let a = peak.sqrt();
            let clipped: Vec<Complex64> = af
                .iter()
                .enumerate()
                .map(|(m, z)| {
                    let mag = z.norm() / a;
                    let t = mag.clamp(lo[m], hi[m]);
                    if mag > 0.0 {
                        Complex64::from_polar(t, z.arg())
                    } else {
                        Complex64::new(t, 0.0)
                    }
                })
                .collect();
            w = op.pseudo_inverse(rank, &clipped)?;
        }
    }

    let w = best_w.expect("at least one iteration ran");
    let scale = 1.0 / w.max_amplitude();
    let excitations = w.scaled(Complex64::new(scale, 0.0));
    let phi_m = best_key.0;
    if phi_m >= FIT_TOLERANCE {
        log::warn!("reference fit did not converge: Φ_M = {phi_m:e} after {iterations} iterations");
    }
    Ok(ReferenceFit {
        excitations,
        phi_m,
        converged: phi_m < FIT_TOLERANCE,
        iterations,
        history,
    })
}
