//! Angular sampling of the far field.
//!
//! Every sample carries its direction `(θ, φ)` and a quadrature weight so that
//! `Σ_m ω_m f(θ_m, φ_m)` approximates `∫∫ f sinθ dθ dφ` over the grid's domain.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Axis};

/// Default oversampling: `M ≈ 8 N` samples for an `N`-element array.
pub const DEFAULT_OVERSAMPLING: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    /// Direction cosines `(sinθ cosφ, sinθ sinφ)`.
    pub fn cosines(&self) -> (f64, f64) {
        let s = self.theta.sin();
        (s * self.phi.cos(), s * self.phi.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind {
    /// `u = sinθ` uniform on `[-1, 1]` in the plane containing `axis`;
    /// `θ` is signed and `φ` fixed.
    Linear { axis: Axis },
    /// Uniform `(u, v)` lattice inside the visible disk.
    UvDisk,
    /// Midpoint product grid in `(θ, φ)` over `θ ∈ [0, θ_max]`, `φ ∈ [0, 2π)`.
    ThetaPhi,
    /// A single φ-plane cut for plotting; weights are uniform in θ.
    Cut,
}

/// How to sample the angular domain for synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// Pick `linear` for collinear geometries and `uv_disk` otherwise.
    Auto {
        #[serde(default = "default_oversampling")]
        oversampling: usize,
    },
    Linear {
        samples: usize,
    },
    UvDisk {
        samples: usize,
    },
    ThetaPhi {
        n_theta: usize,
        n_phi: usize,
    },
}

fn default_oversampling() -> usize {
    DEFAULT_OVERSAMPLING
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto {
            oversampling: DEFAULT_OVERSAMPLING,
        }
    }
}

impl GridSpec {
    pub fn build(&self, geom: &ArrayGeometry) -> Result<AngularGrid> {
        let n = geom.len();
        match *self {
            GridSpec::Auto { oversampling } => {
                if oversampling == 0 {
                    return Err(Error::invalid("oversampling must be >= 1"));
                }
                let m = (oversampling * n).max(2);
                match geom.collinear_axis() {
                    Some(axis) if n > 1 => AngularGrid::linear(m, axis),
                    _ => AngularGrid::uv_disk(m),
                }
            }
            GridSpec::Linear { samples } => {
                let axis = geom
                    .collinear_axis()
                    .ok_or_else(|| Error::invalid("a linear grid needs a collinear geometry"))?;
                AngularGrid::linear(samples, axis)
            }
            GridSpec::UvDisk { samples } => AngularGrid::uv_disk(samples),
            GridSpec::ThetaPhi { n_theta, n_phi } => {
                AngularGrid::theta_phi(n_theta, n_phi, PI / 2.0)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct AngularGrid {
    directions: Vec<Direction>,
    weights: Vec<f64>,
    kind: GridKind,
}

impl AngularGrid {
    /// `m` samples of `u = sinθ` uniformly spaced on `[-1, 1]`, both endpoints
    /// included. Weights are `π Δu` (trapezoid), which is exact for patterns
    /// that depend only on the direction cosine along `axis`: the hemisphere
    /// measure of that cosine is uniform with density `π`.
    pub fn linear(m: usize, axis: Axis) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid("a linear grid needs at least 2 samples"));
        }
        let phi = match axis {
            Axis::X => 0.0,
            Axis::Y => PI / 2.0,
        };
        let du = 2.0 / (m - 1) as f64;
        let mut directions = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for k in 0..m {
            let u = if k + 1 == m {
                1.0
            } else {
                -1.0 + k as f64 * du
            };
            directions.push(Direction {
                theta: u.asin(),
                phi,
            });
            let w = if k == 0 || k + 1 == m { 0.5 } else { 1.0 };
            weights.push(PI * du * w);
        }
        Ok(Self {
            directions,
            weights,
            kind: GridKind::Linear { axis },
        })
    }

    /// Midpoint lattice in `(u, v)` clipped to `u² + v² < 1`, with the
    /// smallest lattice size giving at least `m_min` samples. Weights are the
    /// solid-angle Jacobian `h² / cosθ`.
    pub fn uv_disk(m_min: usize) -> Result<Self> {
        if m_min == 0 {
            return Err(Error::invalid("a uv grid needs at least one sample"));
        }
        let mut k = ((4.0 * m_min as f64 / PI).sqrt().floor() as usize).max(1);
        loop {
            let grid = Self::uv_lattice(k);
            if grid.len() >= m_min {
                return Ok(grid);
            }
            k += 1;
        }
    }

    /// The `k × k` midpoint lattice on `[-1, 1]²`, restricted to the visible disk.
    pub fn uv_lattice(k: usize) -> Self {
        let h = 2.0 / k as f64;
        let mut directions = Vec::new();
        let mut weights = Vec::new();
        // v outer, u inner: same ordering convention as the planar element grid.
        for j in 0..k {
            let v = -1.0 + h * (j as f64 + 0.5);
            for i in 0..k {
                let u = -1.0 + h * (i as f64 + 0.5);
                let r2 = u * u + v * v;
                if r2 >= 1.0 {
                    continue;
                }
                let theta = r2.sqrt().asin();
                let phi = v.atan2(u).rem_euclid(2.0 * PI);
                directions.push(Direction { theta, phi });
                weights.push(h * h / (1.0 - r2).sqrt());
            }
        }
        Self {
            directions,
            weights,
            kind: GridKind::UvDisk,
        }
    }

    /// Midpoint product grid over `θ ∈ [0, θ_max]`, `φ ∈ [0, 2π)` with
    /// weights `sinθ Δθ Δφ`. `θ_max = π` covers the full sphere.
    pub fn theta_phi(n_theta: usize, n_phi: usize, theta_max: f64) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::invalid("theta/phi grid needs n_theta, n_phi >= 1"));
        }
        if !(theta_max > 0.0 && theta_max <= PI) {
            return Err(Error::invalid("theta_max must lie in (0, π]"));
        }
        let dt = theta_max / n_theta as f64;
        let dp = 2.0 * PI / n_phi as f64;
        let mut directions = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for i in 0..n_theta {
            let theta = (i as f64 + 0.5) * dt;
            for j in 0..n_phi {
                directions.push(Direction {
                    theta,
                    phi: j as f64 * dp,
                });
                weights.push(theta.sin() * dt * dp);
            }
        }
        Ok(Self {
            directions,
            weights,
            kind: GridKind::ThetaPhi,
        })
    }

    /// Full-sphere grid used for the Q-factor integral.
    pub fn full_sphere(n_theta: usize, n_phi: usize) -> Result<Self> {
        Self::theta_phi(n_theta, n_phi, PI)
    }

    /// `n` samples of `θ ∈ [-90°, 90°]` in the plane `φ = phi_deg`.
    pub fn cut(phi_deg: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("a pattern cut needs at least 2 samples"));
        }
        let phi = phi_deg.to_radians();
        let dt = PI / (n - 1) as f64;
        let directions = (0..n)
            .map(|k| Direction {
                theta: -PI / 2.0 + k as f64 * dt,
                phi,
            })
            .collect();
        Ok(Self {
            directions,
            weights: vec![dt; n],
            kind: GridKind::Cut,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn is_one_dimensional(&self) -> bool {
        matches!(self.kind, GridKind::Linear { .. } | GridKind::Cut)
    }

    /// Direction cosines of every sample.
    pub fn cosines(&self) -> Vec<(f64, f64)> {
        self.directions.iter().map(Direction::cosines).collect()
    }
}
