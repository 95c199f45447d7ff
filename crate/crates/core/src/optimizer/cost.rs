//! Constraint cost functions on excitation amplitudes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::ExcitationVector;
use crate::geometry::{elements_in_region, ApertureRegion, ArrayGeometry};

/// Floor on the smallest amplitude in the DRR denominator.
pub const DRR_EPSILON: f64 = 1e-12;

/// `max α / max(min α, ε)`.
pub fn cost_drr(w: &ExcitationVector) -> f64 {
    drr_of(&w.amplitudes())
}

fn drr_of(a: &[f64]) -> f64 {
    let hi = a.iter().cloned().fold(0.0, f64::max);
    let lo = a.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi == 0.0 {
        return 1.0;
    }
    hi / lo.max(DRR_EPSILON)
}

/// Sum of amplitudes over the elements lying in `region`.
pub fn cost_forbidden(w: &ExcitationVector, geom: &ArrayGeometry, region: &ApertureRegion) -> f64 {
    let a = w.amplitudes();
    elements_in_region(geom, region)
        .into_iter()
        .map(|n| a[n])
        .sum()
}

/// `Σ_n min_i |α_n − level_i|`.
pub fn cost_quantized(w: &ExcitationVector, levels: &[f64]) -> f64 {
    quantized_of(&w.amplitudes(), levels)
}

fn quantized_of(a: &[f64], levels: &[f64]) -> f64 {
    a.iter().map(|&x| nearest_level_distance(x, levels)).sum()
}

/// Distance from `x` to the closest entry of the sorted `levels`.
pub fn nearest_level_distance(x: f64, levels: &[f64]) -> f64 {
    let k = levels.partition_point(|&l| l < x);
    let mut d = f64::INFINITY;
    if k < levels.len() {
        d = d.min(levels[k] - x);
    }
    if k > 0 {
        d = d.min(x - levels[k - 1]);
    }
    d
}

/// The `2^B` levels `k / 2^B`, `k = 1..=2^B`.
pub fn levels_from_bits(bits: u32) -> Result<Vec<f64>> {
    if bits == 0 || bits > 16 {
        return Err(Error::invalid(format!(
            "bits must lie in 1..=16, got {bits}"
        )));
    }
    let count = 1usize << bits;
    Ok((1..=count).map(|k| k as f64 / count as f64).collect())
}

/// User-facing constraint description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSpec {
    Drr,
    ForbiddenRegion {
        region: ApertureRegion,
    },
    /// Give either `bits` or an explicit `levels` list.
    QuantizedAmplitudes {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bits: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<Vec<f64>>,
    },
}

/// A validated constraint bound to a geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    Drr,
    Forbidden { indices: Vec<usize> },
    Quantized { levels: Vec<f64> },
}

impl ConstraintSpec {
    pub fn resolve(&self, geom: &ArrayGeometry) -> Result<Constraint> {
        match self {
            ConstraintSpec::Drr => Ok(Constraint::Drr),
            ConstraintSpec::ForbiddenRegion { region } => {
                region.validate(geom.len())?;
                let indices = elements_in_region(geom, region);
                if indices.is_empty() {
                    return Err(Error::invalid("the forbidden region contains no elements"));
                }
                Ok(Constraint::Forbidden { indices })
            }
            ConstraintSpec::QuantizedAmplitudes { bits, levels } => {
                let levels = match (bits, levels) {
                    (Some(b), None) => levels_from_bits(*b)?,
                    (None, Some(l)) => l.clone(),
                    _ => {
                        return Err(Error::invalid(
                            "quantized amplitudes need exactly one of bits or levels",
                        ))
                    }
                };
                Constraint::quantized(levels)
            }
        }
    }
}

impl Constraint {
    pub fn quantized(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("quantization levels must be non-empty"));
        }
        if levels.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid("quantization levels must be positive"));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "quantization levels must be strictly increasing",
            ));
        }
        Ok(Constraint::Quantized { levels })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Constraint::Drr => "drr",
            Constraint::Forbidden { .. } => "forbidden_region",
            Constraint::Quantized { .. } => "quantized_amplitudes",
        }
    }

    pub fn cost(&self, w: &ExcitationVector) -> f64 {
        let a = w.amplitudes();
        match self {
            Constraint::Drr => drr_of(&a),
            Constraint::Forbidden { indices } => indices.iter().map(|&n| a[n]).sum(),
            Constraint::Quantized { levels } => quantized_of(&a, levels),
        }
    }
}
