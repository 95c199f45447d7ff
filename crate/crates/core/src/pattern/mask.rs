//! Lower/upper power-pattern masks.
//!
//! Masks are expressed relative to a 0 dB peak. Samples fall in one of three
//! regions: main lobe (`LM > 0`), transition (`LM = 0`, `UM = 1`) and sidelobe
//! (`LM = 0`, `UM < 1`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::AngularGrid;
use crate::error::{Error, Result};
use crate::geometry::{parse_field, Axis};
use crate::io::fmt_f64;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternMask {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskRegion {
    MainLobe,
    Transition,
    Sidelobe,
}

impl PatternMask {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::invalid("mask bounds differ in length"));
        }
        for (m, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) || l < 0.0 || l > u {
                return Err(Error::invalid(format!(
                    "mask sample {m}: need 0 <= LM <= UM, got LM={l}, UM={u}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn region(&self, m: usize) -> MaskRegion {
        if self.lower[m] > 0.0 {
            MaskRegion::MainLobe
        } else if self.upper[m] < 1.0 {
            MaskRegion::Sidelobe
        } else {
            MaskRegion::Transition
        }
    }

    /// Tightens the mask by `margin_db` inside the main lobe (both bounds) and
    /// by `sidelobe_margin_db` on the sidelobe ceiling. Where the main-lobe
    /// bounds would cross they meet at their geometric mean.
    pub fn shrink(&self, margin_db: f64, sidelobe_margin_db: f64) -> Self {
        let up = db_to_linear(margin_db);
        let sl = db_to_linear(-sidelobe_margin_db);
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        for m in 0..self.len() {
            match self.region(m) {
                MaskRegion::MainLobe => {
                    let (l, u) = (self.lower[m] * up, self.upper[m] / up);
                    if l <= u {
                        lower[m] = l;
                        upper[m] = u;
                    } else {
                        let g = (self.lower[m] * self.upper[m]).sqrt();
                        lower[m] = g;
                        upper[m] = g;
                    }
                }
                MaskRegion::Sidelobe => upper[m] = self.upper[m] * sl,
                MaskRegion::Transition => {}
            }
        }
        Self { lower, upper }
    }

    /// Reads `theta_deg,phi_deg,lm_linear,um_linear`. Angles must match `grid`
    /// to 1e-6 degrees.
    pub fn read_csv(path: &Path, grid: &AngularGrid) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = reader.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols != ["theta_deg", "phi_deg", "lm_linear", "um_linear"] {
            return Err(Error::input(format!(
                "{}: expected header theta_deg,phi_deg,lm_linear,um_linear",
                path.display()
            )));
        }
        let mut lower = Vec::with_capacity(grid.len());
        let mut upper = Vec::with_capacity(grid.len());
        for (m, record) in reader.records().enumerate() {
            let record = record?;
            let theta: f64 = parse_field(&record, 0, path)?;
            let phi: f64 = parse_field(&record, 1, path)?;
            let d = grid.directions().get(m).ok_or_else(|| {
                Error::input(format!(
                    "{}: more rows than grid samples ({})",
                    path.display(),
                    grid.len()
                ))
            })?;
            if (theta - d.theta.to_degrees()).abs() > 1e-6
                || (phi - d.phi.to_degrees()).abs() > 1e-6
            {
                return Err(Error::input(format!(
                    "{}: row {} direction ({theta}, {phi}) does not match the grid",
                    path.display(),
                    m + 1
                )));
            }
            lower.push(parse_field(&record, 2, path)?);
            upper.push(parse_field(&record, 3, path)?);
        }
        if lower.len() != grid.len() {
            return Err(Error::input(format!(
                "{}: {} rows for {} grid samples",
                path.display(),
                lower.len(),
                grid.len()
            )));
        }
        Self::new(lower, upper).map_err(|e| Error::input(format!("{}: {e}", path.display())))
    }

    pub fn write_csv(&self, path: &Path, grid: &AngularGrid) -> Result<()> {
        if grid.len() != self.len() {
            return Err(Error::invalid("mask and grid differ in length"));
        }
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["theta_deg", "phi_deg", "lm_linear", "um_linear"])?;
        for (m, d) in grid.directions().iter().enumerate() {
            writer.write_record([
                fmt_f64(d.theta.to_degrees()),
                fmt_f64(d.phi.to_degrees()),
                fmt_f64(self.lower[m]),
                fmt_f64(self.upper[m]),
            ])?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn default_axis() -> Axis {
    Axis::Y
}

/// Descriptor-based mask construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskSpec {
    /// Shaped beam along the direction cosine of `axis`. Angles are signed,
    /// measured from broadside toward the positive axis. The beam occupies
    /// `[null_start, null_start + fnbw]` between first nulls; the main lobe
    /// is that interval narrowed by `transition` on both sides. The shape is
    /// flat up to `csc_start` and falls as `(sin csc_start / sin θ)²` after.
    CosecantSquared {
        sll_db: f64,
        rpe_db: f64,
        fnbw_deg: f64,
        null_start_deg: f64,
        transition_deg: f64,
        csc_start_deg: f64,
        #[serde(default = "default_axis")]
        axis: Axis,
        /// Beam width across `axis` for planar grids; unbounded when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cross_fnbw_deg: Option<f64>,
    },
    /// Rectangular flat-top beam at broadside with per-axis null widths.
    /// Beyond the x nulls the ceiling is `sll_db`, beyond the y nulls it is
    /// `sll_y_db` (default `sll_db`), and the lower of the two where both apply.
    FlatTop {
        sll_db: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sll_y_db: Option<f64>,
        rpe_db: f64,
        fnbw_x_deg: f64,
        fnbw_y_deg: f64,
        transition_deg: f64,
    },
}

fn check_common(sll_db: f64, rpe_db: f64) -> Result<()> {
    if !(sll_db < 0.0) {
        return Err(Error::invalid(format!(
            "SLL must be negative dB, got {sll_db}"
        )));
    }
    if !(rpe_db >= 0.0 && rpe_db.is_finite()) {
        return Err(Error::invalid(format!("RPE must be >= 0 dB, got {rpe_db}")));
    }
    Ok(())
}

fn check_width(name: &str, fnbw: f64, transition: f64) -> Result<()> {
    if !(fnbw > 0.0 && fnbw < 180.0) {
        return Err(Error::invalid(format!(
            "{name} must lie in (0, 180) deg, got {fnbw}"
        )));
    }
    if !(transition >= 0.0 && 2.0 * transition < fnbw) {
        return Err(Error::invalid(format!(
            "transition width {transition} deg leaves no main lobe inside {name} = {fnbw} deg"
        )));
    }
    Ok(())
}

impl MaskSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MaskSpec::CosecantSquared {
                sll_db,
                rpe_db,
                fnbw_deg,
                null_start_deg,
                transition_deg,
                csc_start_deg,
                cross_fnbw_deg,
                ..
            } => {
                check_common(sll_db, rpe_db)?;
                check_width("fnbw", fnbw_deg, transition_deg)?;
                if null_start_deg < -90.0 || null_start_deg + fnbw_deg > 90.0 {
                    return Err(Error::invalid(
                        "cosecant beam must lie within [-90, 90] deg",
                    ));
                }
                if !(csc_start_deg > 0.0 && csc_start_deg < 90.0) {
                    return Err(Error::invalid("csc_start must lie in (0, 90) deg"));
                }
                if let Some(c) = cross_fnbw_deg {
                    check_width("cross_fnbw", c, transition_deg)?;
                }
                Ok(())
            }
            MaskSpec::FlatTop {
                sll_db,
                sll_y_db,
                rpe_db,
                fnbw_x_deg,
                fnbw_y_deg,
                transition_deg,
            } => {
                check_common(sll_db, rpe_db)?;
                if let Some(s) = sll_y_db {
                    check_common(s, rpe_db)?;
                }
                check_width("fnbw_x", fnbw_x_deg, transition_deg)?;
                check_width("fnbw_y", fnbw_y_deg, transition_deg)
            }
        }
    }

    pub fn build(&self, grid: &AngularGrid) -> Result<PatternMask> {
        self.validate()?;
        let m = grid.len();
        let mut lower = vec![0.0; m];
        let mut upper = vec![1.0; m];
        match *self {
            MaskSpec::CosecantSquared {
                sll_db,
                rpe_db,
                fnbw_deg,
                null_start_deg,
                transition_deg,
                csc_start_deg,
                axis,
                cross_fnbw_deg,
            } => {
                let sll = db_to_linear(sll_db);
                let rpe = db_to_linear(-rpe_db);
                let (lo, hi) = (null_start_deg, null_start_deg + fnbw_deg);
                let (ml_lo, ml_hi) = (lo + transition_deg, hi - transition_deg);
                let c = csc_start_deg.to_radians().sin();
                let cross = cross_fnbw_deg.map(|f| {
                    (
                        (f / 2.0).to_radians().sin(),
                        (f / 2.0 - transition_deg).to_radians().sin(),
                    )
                });
                for (k, (ux, uy)) in grid.cosines().into_iter().enumerate() {
                    let (along, across) = match axis {
                        Axis::X => (ux, uy),
                        Axis::Y => (uy, ux),
                    };
                    let th = along.clamp(-1.0, 1.0).asin().to_degrees();
                    let (in_beam_cross, in_lobe_cross) = match cross {
                        Some((edge, inner)) => (across.abs() <= edge, across.abs() <= inner),
                        None => (true, true),
                    };
                    if !(th >= lo && th <= hi && in_beam_cross) {
                        upper[k] = sll;
                    } else if th >= ml_lo && th <= ml_hi && in_lobe_cross {
                        let shape = if th > csc_start_deg {
                            (c / along).powi(2)
                        } else {
                            1.0
                        };
                        upper[k] = shape;
                        lower[k] = shape * rpe;
                    }
                }
            }
            MaskSpec::FlatTop {
                sll_db,
                sll_y_db,
                rpe_db,
                fnbw_x_deg,
                fnbw_y_deg,
                transition_deg,
            } => {
                let sll_x = db_to_linear(sll_db);
                let sll_y = db_to_linear(sll_y_db.unwrap_or(sll_db));
                let rpe = db_to_linear(-rpe_db);
                let half = |f: f64, t: f64| (f / 2.0 - t).to_radians().sin();
                let (ex, ey) = (half(fnbw_x_deg, 0.0), half(fnbw_y_deg, 0.0));
                let (ix, iy) = (
                    half(fnbw_x_deg, transition_deg),
                    half(fnbw_y_deg, transition_deg),
                );
                for (k, (ux, uy)) in grid.cosines().into_iter().enumerate() {
                    let (sx, sy) = (ux.abs() > ex, uy.abs() > ey);
                    if sx || sy {
                        let mut u = 1.0f64;
                        if sx {
                            u = u.min(sll_x);
                        }
                        if sy {
                            u = u.min(sll_y);
                        }
                        upper[k] = u;
                    } else if ux.abs() <= ix && uy.abs() <= iy {
                        lower[k] = rpe;
                    }
                }
            }
        }
        PatternMask::new(lower, upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tc1_spec() -> MaskSpec {
        MaskSpec::CosecantSquared {
            sll_db: -20.0,
            rpe_db: 1.0,
            fnbw_deg: 68.0,
            null_start_deg: -10.0,
            transition_deg: 8.0,
            csc_start_deg: 8.0,
            axis: Axis::Y,
            cross_fnbw_deg: None,
        }
    }

    fn flat(rpe_db: f64) -> MaskSpec {
        MaskSpec::FlatTop {
            sll_db: -20.0,
            sll_y_db: Some(-25.0),
            rpe_db,
            fnbw_x_deg: 50.0,
            fnbw_y_deg: 50.0,
            transition_deg: 10.0,
        }
    }

    #[test]
    fn cosecant_regions() {
        let grid = AngularGrid::linear(256, Axis::Y).unwrap();
        let mask = tc1_spec().build(&grid).unwrap();
        let max_um = mask.upper().iter().cloned().fold(0.0, f64::max);
        assert!((max_um - 1.0).abs() < 1e-15);
        for (k, d) in grid.directions().iter().enumerate() {
            let th = d.theta.to_degrees();
            let (l, u) = (mask.lower()[k], mask.upper()[k]);
            if !(-10.0..=58.0).contains(&th) {
                assert!((u - 0.01).abs() < 1e-15 && l == 0.0);
            } else if (-2.0..=50.0).contains(&th) {
                let shape = if th > 8.0 {
                    (8f64.to_radians().sin() / d.theta.sin()).powi(2)
                } else {
                    1.0
                };
                assert!((u - shape).abs() < 1e-12);
                assert!((l - shape * db_to_linear(-1.0)).abs() < 1e-12);
            } else {
                assert!(l == 0.0 && u == 1.0);
            }
        }
    }

    #[test]
    fn flat_top_zero_ripple_collapses() {
        let grid = AngularGrid::uv_disk(512).unwrap();
        let mask = flat(0.0).build(&grid).unwrap();
        let mut inside = 0;
        for k in 0..mask.len() {
            if mask.region(k) == MaskRegion::MainLobe {
                assert_eq!(mask.lower()[k], mask.upper()[k]);
                inside += 1;
            }
        }
        assert!(inside > 0);
    }

    #[test]
    fn flat_top_asymmetric_sidelobes() {
        let grid = AngularGrid::uv_disk(2048).unwrap();
        let mask = flat(0.5).build(&grid).unwrap();
        let e = 25f64.to_radians().sin();
        for (k, (ux, uy)) in grid.cosines().into_iter().enumerate() {
            let u = mask.upper()[k];
            match (ux.abs() > e, uy.abs() > e) {
                (true, false) => assert!((u - 0.01).abs() < 1e-15),
                (false, true) | (true, true) => assert!((u - db_to_linear(-25.0)).abs() < 1e-15),
                (false, false) => assert_eq!(u, 1.0),
            }
        }
    }

    #[test]
    fn invalid_descriptors_rejected() {
        let grid = AngularGrid::linear(16, Axis::Y).unwrap();
        let bad = [
            MaskSpec::FlatTop {
                sll_db: 3.0,
                sll_y_db: None,
                rpe_db: 1.0,
                fnbw_x_deg: 50.0,
                fnbw_y_deg: 50.0,
                transition_deg: 5.0,
            },
            MaskSpec::FlatTop {
                sll_db: -20.0,
                sll_y_db: None,
                rpe_db: -1.0,
                fnbw_x_deg: 50.0,
                fnbw_y_deg: 50.0,
                transition_deg: 5.0,
            },
            MaskSpec::FlatTop {
                sll_db: -20.0,
                sll_y_db: None,
                rpe_db: 1.0,
                fnbw_x_deg: 190.0,
                fnbw_y_deg: 50.0,
                transition_deg: 5.0,
            },
            MaskSpec::FlatTop {
                sll_db: -20.0,
                sll_y_db: None,
                rpe_db: 1.0,
                fnbw_x_deg: 20.0,
                fnbw_y_deg: 50.0,
                transition_deg: 10.0,
            },
        ];
        for spec in bad {
            assert!(matches!(spec.build(&grid), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn shrink_keeps_order_and_tightens() {
        let grid = AngularGrid::linear(256, Axis::Y).unwrap();
        let mask = tc1_spec().build(&grid).unwrap();
        let s = mask.shrink(0.25, 2.0);
        for k in 0..mask.len() {
            assert!(s.lower()[k] <= s.upper()[k]);
            assert!(s.lower()[k] >= mask.lower()[k]);
            assert!(s.upper()[k] <= mask.upper()[k]);
        }
        let crossed = mask.shrink(3.0, 0.0);
        for k in 0..mask.len() {
            assert!(crossed.lower()[k] <= crossed.upper()[k]);
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.csv");
        let grid = AngularGrid::linear(64, Axis::Y).unwrap();
        let mask = tc1_spec().build(&grid).unwrap();
        mask.write_csv(&path, &grid).unwrap();
        let back = PatternMask::read_csv(&path, &grid).unwrap();
        for k in 0..mask.len() {
            assert!(
                (back.lower()[k] - mask.lower()[k]).abs() <= 1e-11 * mask.lower()[k].max(1e-300)
            );
            assert!((back.upper()[k] - mask.upper()[k]).abs() <= 1e-11 * mask.upper()[k]);
        }
    }

    #[test]
    fn new_rejects_crossed_bounds() {
        assert!(PatternMask::new(vec![0.5], vec![0.4]).is_err());
        assert!(PatternMask::new(vec![-0.1], vec![0.4]).is_err());
        assert!(PatternMask::new(vec![0.1, 0.2], vec![0.4]).is_err());
    }
}
