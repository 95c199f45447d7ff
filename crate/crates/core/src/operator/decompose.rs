//! Rank truncation and the radiating / non-radiating split of the excitations.

use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{RadiationOperator, POLAR_SUM_TOL};
use crate::error::{Error, Result};
use crate::excitation::ExcitationVector;
use crate::pattern::PatternSamples;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub chi: f64,
    /// Number of normalized singular values strictly above `chi`.
    pub s: usize,
    pub n: usize,
    /// `σ_{S+1}`, or 0 when nothing is truncated.
    pub leakage_bound: f64,
    /// Normalized spectrum `σ_n / σ_1`.
    pub spectrum: Vec<f64>,
}

impl TruncationReport {
    pub fn null_dim(&self) -> usize {
        self.n - self.s
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    fn check(&self, op: &RadiationOperator) -> Result<()> {
        if self.n != op.n_elements() || self.s == 0 || self.s > self.n {
            return Err(Error::invalid(format!(
                "truncation report (S={}, N={}) does not fit an operator with {} columns",
                self.s,
                self.n,
                op.n_elements()
            )));
        }
        Ok(())
    }
}

/// `S = #{n : σ_n / σ_1 > χ}`.
pub fn select_rank(op: &RadiationOperator, chi: f64) -> Result<TruncationReport> {
    if !(chi > 0.0 && chi < 1.0) {
        return Err(Error::invalid(format!("chi must lie in (0, 1), got {chi}")));
    }
    let spectrum = op.normalized_spectrum();
    let s = spectrum.iter().take_while(|&&x| x > chi).count();
    if s == 0 {
        return Err(Error::invalid(
            "no singular value above chi: the radiating subspace is empty",
        ));
    }
    let n = spectrum.len();
    let leakage_bound = if s < n { op.singular_values()[s] } else { 0.0 };
    Ok(TruncationReport {
        chi,
        s,
        n,
        leakage_bound,
        spectrum,
    })
}

/// Truncated-pseudoinverse preimage of the reference field: `w^RA = G_S⁺ AF^ref`.
pub fn minimum_norm_excitations(
    op: &RadiationOperator,
    rank: &TruncationReport,
    af_ref: &PatternSamples,
) -> Result<ExcitationVector> {
    rank.check(op)?;
    op.pseudo_inverse(rank.s, af_ref.values())
}

/// Expansion coefficients `γ_q` over the truncated right singular vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct NrCoefficients {
    gamma: Vec<Complex64>,
}

impl NrCoefficients {
    pub fn new(gamma: Vec<Complex64>) -> Result<Self> {
        if gamma
            .iter()
            .any(|g| !(g.re.is_finite() && g.im.is_finite()))
        {
            return Err(Error::invalid("NR coefficients must be finite"));
        }
        Ok(Self { gamma })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            gamma: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    /// From `[re_1, im_1, re_2, im_2, ...]`.
    pub fn from_interleaved(x: &[f64]) -> Result<Self> {
        if !x.len().is_multiple_of(2) {
            return Err(Error::invalid(
                "interleaved NR coefficients need an even length",
            ));
        }
        Self::new(
            x.chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect(),
        )
    }

    pub fn to_interleaved(&self) -> Vec<f64> {
        self.gamma.iter().flat_map(|g| [g.re, g.im]).collect()
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.gamma
    }

    pub fn norm(&self) -> f64 {
        self.gamma.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Writes `q,gamma_re,gamma_im,gamma_mag,gamma_phase_deg` with 1-based `q`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        use crate::io::fmt_f64;
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["q", "gamma_re", "gamma_im", "gamma_mag", "gamma_phase_deg"])?;
        for (q, g) in self.gamma.iter().enumerate() {
            writer.write_record([
                (q + 1).to_string(),
                fmt_f64(g.re),
                fmt_f64(g.im),
                fmt_f64(g.norm()),
                fmt_f64(g.arg().to_degrees()),
            ])?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// `w^NR = Σ_q γ_q v_{S+q}`.
pub fn nr_excitations(
    op: &RadiationOperator,
    rank: &TruncationReport,
    gamma: &NrCoefficients,
) -> Result<ExcitationVector> {
    rank.check(op)?;
    if gamma.len() != rank.null_dim() {
        return Err(Error::invalid(format!(
            "expected {} NR coefficients, got {}",
            rank.null_dim(),
            gamma.len()
        )));
    }
    if gamma.is_empty() {
        return Ok(ExcitationVector::zeros(rank.n));
    }
    let g = DVector::from_column_slice(gamma.values());
    Ok(ExcitationVector::from_dvector(
        &(op.v().columns(rank.s, rank.null_dim()) * g),
    ))
}

/// Amplitudes and phases of `w^RA + w^NR` from the closed-form polar expressions.
pub fn polar_sum(w_ra: &ExcitationVector, w_nr: &ExcitationVector) -> Result<(Vec<f64>, Vec<f64>)> {
    if w_ra.len() != w_nr.len() {
        return Err(Error::invalid(format!(
            "RA has {} entries but NR has {}",
            w_ra.len(),
            w_nr.len()
        )));
    }
    let (a_ra, b_ra) = (w_ra.amplitudes(), w_ra.phases());
    let (a_nr, b_nr) = (w_nr.amplitudes(), w_nr.phases());
    let mut alpha = Vec::with_capacity(w_ra.len());
    let mut beta = Vec::with_capacity(w_ra.len());
    for n in 0..w_ra.len() {
        let sq = a_ra[n] * a_ra[n]
            + 2.0 * a_nr[n] * a_ra[n] * (b_ra[n] - b_nr[n]).cos()
            + a_nr[n] * a_nr[n];
        alpha.push(sq.max(0.0).sqrt());
        beta.push(
            (a_ra[n] * b_ra[n].sin() + a_nr[n] * b_nr[n].sin())
                .atan2(a_ra[n] * b_ra[n].cos() + a_nr[n] * b_nr[n].cos()),
        );
    }
    Ok((alpha, beta))
}

/// `w = w^RA + w^NR`, cross-checked against the closed-form amplitude/phase.
///
/// Errors in `α²` are measured relative to `(α^RA + α^NR)²` and phase errors
/// are weighted by `|w|`.
pub fn assemble(w_ra: &ExcitationVector, w_nr: &ExcitationVector) -> Result<ExcitationVector> {
    let (alpha, beta) = polar_sum(w_ra, w_nr)?;
    let w = ExcitationVector::new(
        w_ra.weights()
            .iter()
            .zip(w_nr.weights())
            .map(|(a, b)| a + b)
            .collect(),
    );
    for (n, z) in w.weights().iter().enumerate() {
        let scale = w_ra.weights()[n].norm() + w_nr.weights()[n].norm();
        let amp_err = (alpha[n] * alpha[n] - z.norm_sqr()).abs();
        let dphi = (beta[n] - z.arg() + std::f64::consts::PI)
            .rem_euclid(2.0 * std::f64::consts::PI)
            - std::f64::consts::PI;
        let phase_err = z.norm() * dphi.abs();
        if amp_err > POLAR_SUM_TOL * scale * scale || phase_err > POLAR_SUM_TOL * scale {
            return Err(Error::numerical(format!(
                "closed-form amplitude/phase disagree with complex addition at element {}",
                n + 1
            )));
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ArrayGeometry, Axis};
    use crate::pattern::AngularGrid;
    use std::f64::consts::PI;

    fn small_op() -> RadiationOperator {
        let g = ArrayGeometry::linear(8, 0.3, Axis::Y).unwrap();
        let grid = AngularGrid::linear(64, Axis::Y).unwrap();
        RadiationOperator::build(&g, &grid).unwrap()
    }

    #[test]
    fn rank_is_strict_count() {
        let op = small_op();
        let spec = op.normalized_spectrum();
        let r = select_rank(&op, spec[3]).unwrap();
        assert_eq!(r.s, 3);
        assert_eq!(r.leakage_bound, op.singular_values()[3]);
        let r = select_rank(&op, spec[7] * 0.999).unwrap();
        assert_eq!(r.s, 8);
        assert_eq!(r.leakage_bound, 0.0);
        assert_eq!(r.null_dim(), 0);
    }

    #[test]
    fn chi_out_of_range() {
        let op = small_op();
        for chi in [0.0, 1.0, -0.5, 2.0, f64::NAN] {
            assert!(matches!(
                select_rank(&op, chi),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn zero_gamma_is_null_excitation() {
        let op = small_op();
        let r = select_rank(&op, 0.2).unwrap();
        let w = nr_excitations(&op, &r, &NrCoefficients::zeros(r.null_dim())).unwrap();
        assert!(w.weights().iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn unit_gamma_radiates_sigma() {
        let op = small_op();
        let r = select_rank(&op, 0.2).unwrap();
        let mut gamma = vec![Complex64::new(0.0, 0.0); r.null_dim()];
        gamma[0] = Complex64::new(1.0, 0.0);
        let w = nr_excitations(&op, &r, &NrCoefficients::new(gamma).unwrap()).unwrap();
        let field = op.apply(&w).unwrap();
        assert!((field.norm() - r.leakage_bound).abs() < 1e-12 * op.singular_values()[0]);
    }

    #[test]
    fn gamma_length_checked() {
        let op = small_op();
        let r = select_rank(&op, 0.2).unwrap();
        assert!(nr_excitations(&op, &r, &NrCoefficients::zeros(r.null_dim() + 1)).is_err());
    }

    #[test]
    fn interleaving() {
        let g = NrCoefficients::from_interleaved(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(
            g.values(),
            &[Complex64::new(1.0, 2.0), Complex64::new(3.0, 4.0)]
        );
        assert_eq!(g.to_interleaved(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(NrCoefficients::from_interleaved(&[1.0]).is_err());
        assert!(NrCoefficients::new(vec![Complex64::new(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn polar_sum_quarter_turn() {
        let ra = ExcitationVector::new(vec![Complex64::new(1.0, 0.0)]);
        let nr = ExcitationVector::new(vec![Complex64::new(0.0, 1.0)]);
        let (a, b) = polar_sum(&ra, &nr).unwrap();
        assert!((a[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((b[0] - PI / 4.0).abs() < 1e-15);
        let w = assemble(&ra, &nr).unwrap();
        assert_eq!(w.weights()[0], Complex64::new(1.0, 1.0));
    }

    #[test]
    fn assemble_identity_and_mismatch() {
        let ra = ExcitationVector::new(vec![Complex64::new(0.5, -0.2), Complex64::new(-1.0, 0.3)]);
        let w = assemble(&ra, &ExcitationVector::zeros(2)).unwrap();
        assert_eq!(w, ra);
        assert!(assemble(&ra, &ExcitationVector::zeros(3)).is_err());
    }

    #[test]
    fn truncation_report_json() {
        let op = small_op();
        let r = select_rank(&op, 0.2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        r.write_json(&path).unwrap();
        let back: TruncationReport =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
