//! The discretized radiation operator `G` and its thin SVD.

mod decompose;

pub use decompose::{
    assemble, minimum_norm_excitations, nr_excitations, polar_sum, select_rank, NrCoefficients,
    TruncationReport,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::excitation::ExcitationVector;
use crate::geometry::ArrayGeometry;
use crate::pattern::{steering, AngularGrid};

/// Bound on `|⟨x_i, x_j⟩ - δ_ij|` for the singular vector columns.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
/// Bound on `‖G − UΣV*‖_F / ‖G‖_F`.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// Agreement between closed-form amplitude/phase and complex addition.
pub const POLAR_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RadiationOperator {
    matrix: DMatrix<Complex64>,
    u: DMatrix<Complex64>,
    sigma: Vec<f64>,
    v: DMatrix<Complex64>,
}

impl RadiationOperator {
    /// Samples `g_mn = e^{j2π(x_n sinθ_m cosφ_m + y_n sinθ_m sinφ_m)}` and
    /// factorizes it. Needs at least as many grid samples as elements.
    pub fn build(geom: &ArrayGeometry, grid: &AngularGrid) -> Result<Self> {
        let (m, n) = (grid.len(), geom.len());
        if m < n {
            return Err(Error::invalid(format!(
                "the grid has {m} samples but the array has {n} elements; need M >= N"
            )));
        }
        let cosines = grid.cosines();
        let data: Vec<Complex64> = geom
            .positions()
            .par_iter()
            .flat_map_iter(|&p| cosines.iter().map(move |&(u, v)| steering(p, u, v)))
            .collect();
        Self::from_matrix(DMatrix::from_vec(m, n, data))
    }

    /// Factorizes an arbitrary `M × N` matrix with `M >= N`.
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        let (m, n) = matrix.shape();
        if m < n || n == 0 {
            return Err(Error::invalid(format!(
                "operator must be M x N with M >= N >= 1, got {m} x {n}"
            )));
        }
        if matrix
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::numerical("operator has non-finite entries"));
        }
        // Thin QR first, so the SVD runs on the small N x N factor.
        let qr = matrix.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let svd = r.try_svd(true, true, f64::EPSILON, 0).ok_or_else(|| {
            Error::numerical(format!(
                "SVD of the {n} x {n} triangular factor did not converge"
            ))
        })?;
        let ur = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested V^H");

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let sigma: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
        let ur = DMatrix::from_fn(n, n, |i, j| ur[(i, order[j])]);
        let mut v = DMatrix::from_fn(n, n, |i, j| vt[(order[j], i)].conj());
        let mut u = q * ur;

        for j in 0..n {
            let (kmax, _) = v
                .column(j)
                .iter()
                .enumerate()
                .fold((0, -1.0), |best, (k, z)| {
                    if z.norm() > best.1 {
                        (k, z.norm())
                    } else {
                        best
                    }
                });
            let pivot = v[(kmax, j)];
            let phase = if pivot.norm() > 0.0 {
                pivot.conj() / pivot.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            for z in v.column_mut(j).iter_mut() {
                *z *= phase;
            }
            v[(kmax, j)] = Complex64::new(v[(kmax, j)].norm(), 0.0);
            for z in u.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }

        let op = Self {
            matrix,
            u,
            sigma,
            v,
        };
        op.validate()?;
        Ok(op)
    }

    fn validate(&self) -> Result<()> {
        if self.sigma.windows(2).any(|w| w[0] < w[1]) || self.sigma.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::numerical(
                "singular values are not non-negative and descending",
            ));
        }
        let ortho = |x: &DMatrix<Complex64>, name: &str| -> Result<()> {
            let gram = x.ad_mul(x);
            let n = gram.nrows();
            let mut worst = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
                }
            }
            if worst > ORTHONORMALITY_TOL {
                return Err(Error::numerical(format!(
                    "{name} columns deviate from orthonormality by {worst:e}"
                )));
            }
            Ok(())
        };
        ortho(&self.u, "U")?;
        ortho(&self.v, "V")?;
        let rel = self.reconstruction_error();
        if rel > RECONSTRUCTION_TOL {
            return Err(Error::numerical(format!(
                "SVD reconstruction error {rel:e}"
            )));
        }
        Ok(())
    }

    /// `‖G − UΣV*‖_F / ‖G‖_F`.
    pub fn reconstruction_error(&self) -> f64 {
        let mut us = self.u.clone();
        for (j, &s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        let rebuilt = us * self.v.adjoint();
        (&self.matrix - rebuilt).norm() / self.matrix.norm()
    }

    pub fn n_elements(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_samples(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Thin left singular vectors, `M × N`.
    pub fn u(&self) -> &DMatrix<Complex64> {
        &self.u
    }

    /// Right singular vectors, `N × N`, one per column.
    pub fn v(&self) -> &DMatrix<Complex64> {
        &self.v
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.sigma
    }

    /// `σ_n / σ_1`.
    pub fn normalized_spectrum(&self) -> Vec<f64> {
        let s1 = self.sigma[0];
        if s1 > 0.0 {
            self.sigma.iter().map(|s| s / s1).collect()
        } else {
            vec![0.0; self.sigma.len()]
        }
    }

    /// `G w`.
    pub fn apply(&self, w: &ExcitationVector) -> Result<DVector<Complex64>> {
        if w.len() != self.n_elements() {
            return Err(Error::invalid(format!(
                "excitation has {} entries but the operator has {} columns",
                w.len(),
                self.n_elements()
            )));
        }
        Ok(&self.matrix * w.to_dvector())
    }

    /// Truncated pseudoinverse `Σ_{s<rank} (u_s^H f / σ_s) v_s`.
    pub fn pseudo_inverse(&self, rank: usize, field: &[Complex64]) -> Result<ExcitationVector> {
        if field.len() != self.n_samples() {
            return Err(Error::invalid(format!(
                "field has {} samples but the operator has {} rows",
                field.len(),
                self.n_samples()
            )));
        }
        if rank == 0 || rank > self.n_elements() {
            return Err(Error::invalid(format!(
                "rank {rank} outside 1..={}",
                self.n_elements()
            )));
        }
        if let Some(s) = self.sigma[..rank].iter().position(|&s| s <= 0.0) {
            return Err(Error::numerical(format!(
                "singular value {} is zero",
                s + 1
            )));
        }
        let f = DVector::from_column_slice(field);
        let mut coeffs = self.u.columns(0, rank).ad_mul(&f);
        for (c, &s) in coeffs.iter_mut().zip(&self.sigma) {
            *c /= s;
        }
        Ok(ExcitationVector::from_dvector(
            &(self.v.columns(0, rank) * coeffs),
        ))
    }
}
