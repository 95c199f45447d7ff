//! Scenario files and the end-to-end synthesis pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::{ExcitationFormat, ExcitationVector};
use crate::geometry::{ArrayGeometry, Axis};
use crate::io::{ensure_dir, fmt_f64, write_json};
use crate::operator::{
    minimum_norm_excitations, nr_excitations, select_rank, NrCoefficients, RadiationOperator,
    TruncationReport,
};
use crate::optimizer::{
    cost_drr, optimize_nr, Constraint, ConstraintSpec, ConvergenceTrace, PsoConfig,
};
use crate::pattern::{
    array_factor, mask_matching, pattern_tolerance, peak_sidelobe_db, q_factor, ripple_db,
    AngularGrid, GridSpec, MaskSpec, PatternMask,
};
use crate::reference::{load_reference, synthesize_reference, FitterConfig};

fn default_axis() -> Axis {
    Axis::Y
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    Linear {
        n: usize,
        spacing: f64,
        #[serde(default = "default_axis")]
        axis: Axis,
    },
    Planar {
        nx: usize,
        ny: usize,
        spacing: f64,
    },
    /// CSV with `index,x_lambda,y_lambda`.
    File {
        path: PathBuf,
    },
}

fn default_q_theta() -> usize {
    crate::pattern::Q_GRID_THETA
}
fn default_q_phi() -> usize {
    crate::pattern::Q_GRID_PHI
}

/// Resolution of the full-sphere grid used for the Q-factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QGridConfig {
    #[serde(default = "default_q_theta")]
    pub n_theta: usize,
    #[serde(default = "default_q_phi")]
    pub n_phi: usize,
}

impl Default for QGridConfig {
    fn default() -> Self {
        Self {
            n_theta: default_q_theta(),
            n_phi: default_q_phi(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Load excitations from this CSV instead of fitting the mask.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Truncation threshold of the fitter; the scenario `chi` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_fit: Option<f64>,
    #[serde(default)]
    pub fitter: FitterConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostConfig {
    /// Zero the forbidden-region elements after optimization and re-check the mask.
    #[serde(default)]
    pub hard_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub chi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// φ planes (degrees) for exported pattern cuts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_cuts: Option<Vec<f64>>,
    /// Mask CSV on the synthesis grid; alternative to `[mask]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_file: Option<PathBuf>,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub q_grid: QGridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskSpec>,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ConstraintSpec>,
    #[serde(default)]
    pub pso: PsoConfig,
    #[serde(default)]
    pub post: PostConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return Err(Error::Config(format!(
                "chi must lie in (0, 1), got {}",
                self.chi
            )));
        }
        if let Some(c) = self.reference.chi_fit {
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::Config(format!(
                    "reference.chi_fit must lie in (0, 1), got {c}"
                )));
            }
        }
        match (&self.mask, &self.mask_file) {
            (Some(m), None) => m.validate().map_err(cfg_err)?,
            (None, Some(_)) => {}
            _ => {
                return Err(Error::Config(
                    "give exactly one of [mask] or mask_file".into(),
                ))
            }
        }
        self.reference.fitter.validate().map_err(cfg_err)?;
        self.pso.validate().map_err(cfg_err)?;
        if let Some(cuts) = &self.phi_cuts {
            if cuts.iter().any(|c| !c.is_finite()) {
                return Err(Error::Config("phi_cuts must be finite".into()));
            }
        }
        if self.post.hard_zero
            && !matches!(
                self.constraint,
                Some(ConstraintSpec::ForbiddenRegion { .. })
            )
        {
            return Err(Error::Config(
                "post.hard_zero needs a forbidden_region constraint".into(),
            ));
        }
        Ok(())
    }
}

/// A loaded scenario: the configuration plus the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub base_dir: PathBuf,
}

/// Everything derived from the geometry and grid, including the SVD.
pub struct Prepared {
    pub geometry: ArrayGeometry,
    pub grid: AngularGrid,
    pub q_grid: AngularGrid,
    pub mask: PatternMask,
    pub operator: RadiationOperator,
    pub rank: TruncationReport,
    pub constraint: Option<Constraint>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let config = ScenarioConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    pub fn from_config(config: ScenarioConfig, base_dir: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            base_dir: base_dir.into(),
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Overrides the fitter and swarm seeds.
    pub fn set_seed(&mut self, seed: u64) {
        self.config.reference.fitter.seed = seed;
        self.config.pso.seed = seed;
    }

    pub fn output_dir(&self, cli: Option<&Path>) -> PathBuf {
        match (cli, &self.config.output) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(p)) => self.resolve(p),
            (None, None) => PathBuf::from("out").join(&self.config.name),
        }
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        match &self.config.geometry {
            GeometrySpec::Linear { n, spacing, axis } => ArrayGeometry::linear(*n, *spacing, *axis),
            GeometrySpec::Planar { nx, ny, spacing } => {
                ArrayGeometry::planar_grid(*nx, *ny, *spacing)
            }
            GeometrySpec::File { path } => ArrayGeometry::read_csv(&self.resolve(path)),
        }
        .map_err(|e| match e {
            Error::InvalidArgument(m) => Error::Config(format!("geometry: {m}")),
            other => other,
        })
    }

    /// Default cuts: the array axis plane for linear arrays, both principal planes otherwise.
    pub fn phi_cuts(&self, geom: &ArrayGeometry) -> Vec<f64> {
        if let Some(c) = &self.config.phi_cuts {
            return c.clone();
        }
        match geom.collinear_axis() {
            Some(Axis::X) if geom.len() > 1 => vec![0.0],
            Some(Axis::Y) if geom.len() > 1 => vec![90.0],
            _ => vec![0.0, 90.0],
        }
    }

    pub fn prepare(&self) -> Result<Prepared> {
        let geometry = self.geometry()?;
        let grid = self
            .config
            .grid
            .build(&geometry)
            .map_err(|e| Error::Config(format!("grid: {e}")))?;
        let q = &self.config.q_grid;
        let q_grid = AngularGrid::full_sphere(q.n_theta, q.n_phi)
            .map_err(|e| Error::Config(format!("q_grid: {e}")))?;
        let mask = match (&self.config.mask, &self.config.mask_file) {
            (Some(spec), _) => spec
                .build(&grid)
                .map_err(|e| Error::Config(format!("mask: {e}")))?,
            (None, Some(path)) => PatternMask::read_csv(&self.resolve(path), &grid)?,
            (None, None) => unreachable!("validated"),
        };
        let operator = RadiationOperator::build(&geometry, &grid)?;
        let rank = select_rank(&operator, self.config.chi)?;
        let constraint = match &self.config.constraint {
            Some(c) => Some(
                c.resolve(&geometry)
                    .map_err(|e| Error::Config(format!("constraint: {e}")))?,
            ),
            None => None,
        };
        log::info!(
            "{}: N={} M={} S={} (chi={})",
            self.config.name,
            geometry.len(),
            grid.len(),
            rank.s,
            rank.chi
        );
        Ok(Prepared {
            geometry,
            grid,
            q_grid,
            mask,
            operator,
            rank,
            constraint,
        })
    }

    /// Loads or fits the reference excitations.
    pub fn reference(&self, prep: &Prepared) -> Result<ReferenceOutcome> {
        let rc = &self.config.reference;
        if let Some(path) = &rc.path {
            let w = load_reference(&self.resolve(path), &prep.geometry, &prep.mask, &prep.grid)?;
            let phi_m = mask_matching(
                &array_factor(&prep.geometry, &w, &prep.grid)?,
                &prep.mask,
                &prep.grid,
            )?;
            return Ok(ReferenceOutcome {
                excitations: w,
                info: ReferenceInfo {
                    source: "file".into(),
                    phi_m,
                    converged: phi_m == 0.0,
                    iterations: 0,
                    fit_rank: None,
                },
            });
        }
        let fit_rank = match rc.chi_fit {
            Some(chi) => select_rank(&prep.operator, chi)?.s,
            None => prep.rank.s,
        };
        let fit =
            synthesize_reference(&prep.operator, &prep.mask, &prep.grid, fit_rank, &rc.fitter)?;
        Ok(ReferenceOutcome {
            excitations: fit.excitations,
            info: ReferenceInfo {
                source: "alternating_projection".into(),
                phi_m: fit.phi_m,
                converged: fit.converged,
                iterations: fit.iterations,
                fit_rank: Some(fit_rank),
            },
        })
    }

    /// Pattern-level and constraint metrics of `w`.
    pub fn evaluate(
        &self,
        prep: &Prepared,
        w: &ExcitationVector,
        reference: Option<&ExcitationVector>,
    ) -> Result<Metrics> {
        if w.len() != prep.geometry.len() {
            return Err(Error::input(format!(
                "{} excitations for a {}-element array",
                w.len(),
                prep.geometry.len()
            )));
        }
        let p = array_factor(&prep.geometry, w, &prep.grid)?;
        let xi = match reference {
            Some(r) => {
                if r.len() != w.len() {
                    return Err(Error::input("reference and excitations differ in length"));
                }
                Some(pattern_tolerance(
                    &p,
                    &array_factor(&prep.geometry, r, &prep.grid)?,
                    &prep.grid,
                )?)
            }
            None => None,
        };
        let pq = array_factor(&prep.geometry, w, &prep.q_grid)?;
        Ok(Metrics {
            phi_m: mask_matching(&p, &prep.mask, &prep.grid)?,
            xi_vs_reference: xi,
            drr: cost_drr(w),
            q_factor: q_factor(w, &pq, &prep.q_grid)?,
            constraint_cost: prep.constraint.as_ref().map(|c| c.cost(w)),
            peak_sidelobe_db: peak_sidelobe_db(&p, &prep.mask)?,
            ripple_db: ripple_db(&p, &prep.mask)?,
            max_amplitude: w.max_amplitude(),
        })
    }

    /// Runs reference, minimum-norm and swarm stages.
    pub fn synthesize(&self, prep: &Prepared) -> Result<SynthesisRun> {
        let constraint = prep
            .constraint
            .as_ref()
            .ok_or_else(|| Error::Config("synthesize needs a [constraint] table".into()))?;
        let reference = self.reference(prep)?;
        if !reference.info.converged {
            log::warn!(
                "reference does not satisfy the mask (Φ_M = {:e})",
                reference.info.phi_m
            );
        }
        let p_ref = array_factor(&prep.geometry, &reference.excitations, &prep.grid)?;
        let w_ra = minimum_norm_excitations(&prep.operator, &prep.rank, &p_ref)?;
        let sol = optimize_nr(
            &prep.operator,
            &prep.rank,
            &w_ra,
            constraint,
            &self.config.pso,
        )?;

        let w_nr = nr_excitations(&prep.operator, &prep.rank, &sol.gamma)?;
        let leakage_norm = prep.operator.apply(&w_nr)?.norm();
        let leakage_limit = prep.rank.leakage_bound * sol.gamma.norm();

        let mut w_final = sol.excitations.clone();
        let mut hard_zero = None;
        if self.config.post.hard_zero {
            if let Constraint::Forbidden { indices } = constraint {
                let mut weights = w_final.weights().to_vec();
                for &n in indices {
                    weights[n] = num_complex::Complex64::new(0.0, 0.0);
                }
                w_final = ExcitationVector::new(weights);
                let phi = mask_matching(
                    &array_factor(&prep.geometry, &w_final, &prep.grid)?,
                    &prep.mask,
                    &prep.grid,
                )?;
                if phi > 0.0 {
                    log::warn!("hard zeroing pushed the pattern outside the mask (Φ_M = {phi:e})");
                }
                hard_zero = Some(HardZeroInfo {
                    zeroed: indices.len(),
                    phi_m_after: phi,
                });
            }
        }

        let metrics_ref =
            self.evaluate(prep, &reference.excitations, Some(&reference.excitations))?;
        let metrics_ra = self.evaluate(prep, &w_ra, Some(&reference.excitations))?;
        let metrics_final = self.evaluate(prep, &w_final, Some(&reference.excitations))?;
        let p_ra = array_factor(&prep.geometry, &w_ra, &prep.grid)?;
        let p_final = array_factor(&prep.geometry, &w_final, &prep.grid)?;
        let target = self.config.pso.target_cost;
        let summary = Summary {
            name: self.config.name.clone(),
            n: prep.geometry.len(),
            m: prep.grid.len(),
            s: prep.rank.s,
            chi: prep.rank.chi,
            sigma_s_plus_1: prep.rank.leakage_bound,
            reference: reference.info.clone(),
            constraint: constraint.name().to_string(),
            cost_ra: sol.initial_cost,
            cost_final: metrics_final.constraint_cost.unwrap_or(sol.best_cost),
            target_cost: target,
            target_reached: target.map(|t| sol.best_cost <= t),
            converged_at: sol.trace.converged_at,
            iterations: sol.trace.records.last().map(|r| r.iteration).unwrap_or(0),
            swarm_size: sol.swarm_size,
            search_bound: sol.search_bound,
            gamma_norm: sol.gamma.norm(),
            leakage_norm,
            leakage_limit,
            xi_final_vs_ra: pattern_tolerance(&p_final, &p_ra, &prep.grid)?,
            hard_zero,
            metrics_ref,
            metrics_ra,
            metrics_final,
        };
        Ok(SynthesisRun {
            w_ref: reference.excitations,
            w_ra,
            gamma: sol.gamma,
            w_final,
            trace: sol.trace,
            summary,
        })
    }

    /// Writes the pattern of `w` along each φ cut as `pattern_<tag>_phi<deg>.csv`.
    pub fn write_cuts(
        &self,
        prep: &Prepared,
        dir: &Path,
        tag: &str,
        w: &ExcitationVector,
    ) -> Result<()> {
        for phi in self.phi_cuts(&prep.geometry) {
            let grid = AngularGrid::cut(phi, CUT_SAMPLES)?;
            let p = array_factor(&prep.geometry, w, &grid)?;
            p.write_csv(
                &dir.join(format!("pattern_{tag}_phi{}.csv", fmt_f64(phi))),
                &grid,
            )?;
        }
        Ok(())
    }

    pub fn write_decomposition(&self, prep: &Prepared, dir: &Path) -> Result<()> {
        ensure_dir(dir)?;
        prep.geometry.write_csv(&dir.join("geometry.csv"))?;
        prep.rank.write_json(&dir.join("truncation.json"))?;
        let path = dir.join("spectrum.csv");
        let mut writer = csv::Writer::from_path(&path)?;
        writer.write_record(["n", "sigma", "sigma_normalized"])?;
        for (k, (s, sn)) in prep
            .operator
            .singular_values()
            .iter()
            .zip(&prep.rank.spectrum)
            .enumerate()
        {
            writer.write_record([(k + 1).to_string(), fmt_f64(*s), fmt_f64(*sn)])?;
        }
        writer.flush().map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    pub fn write_run(&self, prep: &Prepared, run: &SynthesisRun, dir: &Path) -> Result<()> {
        self.write_decomposition(prep, dir)?;
        prep.mask.write_csv(&dir.join("mask.csv"), &prep.grid)?;
        for (tag, w) in [
            ("ref", &run.w_ref),
            ("ra", &run.w_ra),
            ("final", &run.w_final),
        ] {
            w.write_csv(&dir.join(format!("w_{tag}.csv")), ExcitationFormat::Polar)?;
            self.write_cuts(prep, dir, tag, w)?;
        }
        run.gamma.write_csv(&dir.join("gamma.csv"))?;
        run.trace.write_csv(&dir.join("trace.csv"))?;
        for (i, g) in &run.trace.snapshots {
            g.write_csv(&dir.join(format!("gamma_iter{i}.csv")))?;
        }
        array_factor(&prep.geometry, &run.w_final, &prep.grid)?
            .write_csv(&dir.join("pattern_final_grid.csv"), &prep.grid)?;
        write_json(&dir.join("summary.json"), &run.summary)
    }
}

/// Samples per exported pattern cut (0.25° steps).
pub const CUT_SAMPLES: usize = 721;

#[derive(Debug, Clone)]
pub struct ReferenceOutcome {
    pub excitations: ExcitationVector,
    pub info: ReferenceInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceInfo {
    pub source: String,
    pub phi_m: f64,
    pub converged: bool,
    pub iterations: usize,
    pub fit_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub phi_m: f64,
    pub xi_vs_reference: Option<f64>,
    pub drr: f64,
    pub q_factor: f64,
    pub constraint_cost: Option<f64>,
    pub peak_sidelobe_db: Option<f64>,
    pub ripple_db: Option<f64>,
    pub max_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardZeroInfo {
    pub zeroed: usize,
    pub phi_m_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub chi: f64,
    pub sigma_s_plus_1: f64,
    pub reference: ReferenceInfo,
    pub constraint: String,
    pub cost_ra: f64,
    pub cost_final: f64,
    pub target_cost: Option<f64>,
    pub target_reached: Option<bool>,
    pub converged_at: Option<usize>,
    pub iterations: usize,
    pub swarm_size: usize,
    pub search_bound: f64,
    pub gamma_norm: f64,
    /// `‖G w^NR‖₂`.
    pub leakage_norm: f64,
    /// `σ_{S+1} ‖γ‖₂`.
    pub leakage_limit: f64,
    pub xi_final_vs_ra: f64,
    pub hard_zero: Option<HardZeroInfo>,
    pub metrics_ref: Metrics,
    pub metrics_ra: Metrics,
    pub metrics_final: Metrics,
}

pub struct SynthesisRun {
    pub w_ref: ExcitationVector,
    pub w_ra: ExcitationVector,
    pub gamma: NrCoefficients,
    pub w_final: ExcitationVector,
    pub trace: ConvergenceTrace,
    pub summary: Summary,
}
