//! Synchronous global-best particle swarm over the NR coefficients.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::Constraint;
use crate::error::{Error, Result};
use crate::excitation::ExcitationVector;
use crate::io::fmt_f64;
use crate::operator::{
    assemble, nr_excitations, NrCoefficients, RadiationOperator, TruncationReport,
};

fn default_inertia() -> f64 {
    0.4
}
fn default_accel() -> f64 {
    2.0
}
fn default_max_iters() -> usize {
    500
}
fn default_clamp() -> f64 {
    0.5
}
fn default_bound_factor() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoConfig {
    /// Swarm size `T`; `N − S` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swarm_size: Option<usize>,
    #[serde(default = "default_inertia")]
    pub inertia: f64,
    #[serde(default = "default_accel")]
    pub c1: f64,
    #[serde(default = "default_accel")]
    pub c2: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Stop once the best cost is at or below this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_cost: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Per-dimension bound `R`; `bound_factor · max α^RA` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_bound: Option<f64>,
    #[serde(default = "default_bound_factor")]
    pub bound_factor: f64,
    /// Velocity limit as a fraction of `R`.
    #[serde(default = "default_clamp")]
    pub velocity_clamp: f64,
    /// Iterations at which to keep a copy of the best γ.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_iters: Vec<usize>,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: None,
            inertia: default_inertia(),
            c1: default_accel(),
            c2: default_accel(),
            max_iters: default_max_iters(),
            target_cost: None,
            seed: 0,
            search_bound: None,
            bound_factor: default_bound_factor(),
            velocity_clamp: default_clamp(),
            snapshot_iters: Vec::new(),
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.swarm_size {
            if t < 2 {
                return Err(Error::invalid("swarm size must be >= 2"));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if let Some(r) = self.search_bound {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::invalid("search bound must be positive"));
            }
        }
        if !(self.bound_factor > 0.0) {
            return Err(Error::invalid("bound_factor must be positive"));
        }
        if !(self.velocity_clamp > 0.0 && self.velocity_clamp <= 1.0) {
            return Err(Error::invalid("velocity_clamp must lie in (0, 1]"));
        }
        for (name, x) in [("inertia", self.inertia), ("c1", self.c1), ("c2", self.c2)] {
            if !x.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub best_cost: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceTrace {
    /// Iteration 0 is the initial swarm.
    pub records: Vec<TraceRecord>,
    pub snapshots: Vec<(usize, NrCoefficients)>,
    /// First iteration whose best cost reached the target.
    pub converged_at: Option<usize>,
}

impl ConvergenceTrace {
    pub fn is_monotone(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].best_cost <= w[0].best_cost)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["iteration", "best_cost"])?;
        for r in &self.records {
            writer.write_record([r.iteration.to_string(), fmt_f64(r.best_cost)])?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NrSolution {
    pub gamma: NrCoefficients,
    pub excitations: ExcitationVector,
    pub trace: ConvergenceTrace,
    pub best_cost: f64,
    /// Cost of `w^RA` alone.
    pub initial_cost: f64,
    pub search_bound: f64,
    pub swarm_size: usize,
}

/// Minimizes `constraint` over `w^RA + Σ γ_q v_{S+q}` with a particle swarm.
///
/// Positions are the interleaved `(re, im)` parts of γ. Particle 0 starts at
/// γ = 0 and the others uniformly in `[−R, R]`; velocities start at zero.
/// Random draws follow a fixed order: initial positions particle by particle
/// (skipping particle 0), then per iteration, per particle, per dimension,
/// `r1` before `r2`.
pub fn optimize_nr(
    op: &RadiationOperator,
    rank: &TruncationReport,
    w_ra: &ExcitationVector,
    constraint: &Constraint,
    cfg: &PsoConfig,
) -> Result<NrSolution> {
    cfg.validate()?;
    if rank.s >= rank.n {
        return Err(Error::invalid("no NR degrees of freedom: S = N"));
    }
    if w_ra.len() != rank.n {
        return Err(Error::invalid("RA excitations do not match the operator"));
    }
    let dim = 2 * rank.null_dim();
    let swarm = cfg.swarm_size.unwrap_or(rank.null_dim()).max(2);
    let bound = match cfg.search_bound {
        Some(r) => r,
        None => cfg.bound_factor * w_ra.max_amplitude(),
    };
    if !(bound > 0.0) {
        return Err(Error::invalid(
            "search bound is zero; RA excitations vanish",
        ));
    }
    let vmax = cfg.velocity_clamp * bound;
    let target = cfg.target_cost.unwrap_or(f64::NEG_INFINITY);

    let evaluate = |x: &[f64]| -> Result<f64> {
        let gamma = NrCoefficients::from_interleaved(x)?;
        let w = assemble(w_ra, &nr_excitations(op, rank, &gamma)?)?;
        Ok(constraint.cost(&w))
    };
    let evaluate_all =
        |xs: &[Vec<f64>]| -> Result<Vec<f64>> { xs.par_iter().map(|x| evaluate(x)).collect() };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pos: Vec<Vec<f64>> = (0..swarm)
        .map(|t| {
            if t == 0 {
                vec![0.0; dim]
            } else {
                (0..dim).map(|_| rng.random_range(-bound..=bound)).collect()
            }
        })
        .collect();
    let mut vel = vec![vec![0.0; dim]; swarm];
    let mut cost = evaluate_all(&pos)?;
    let initial_cost = cost[0];
    let mut pbest = pos.clone();
    let mut pbest_cost = cost.clone();
    let (mut g, mut gcost) = argmin(&pbest_cost);
    let mut gbest = pbest[g].clone();

    let mut trace = ConvergenceTrace::default();
    let record = |i: usize, best: f64, gbest: &[f64], trace: &mut ConvergenceTrace| -> Result<()> {
        trace.records.push(TraceRecord {
            iteration: i,
            best_cost: best,
        });
        if cfg.snapshot_iters.contains(&i) {
            trace
                .snapshots
                .push((i, NrCoefficients::from_interleaved(gbest)?));
        }
        if trace.converged_at.is_none() && best <= target {
            trace.converged_at = Some(i);
        }
        Ok(())
    };
    record(0, gcost, &gbest, &mut trace)?;

    for i in 1..=cfg.max_iters {
        if gcost <= target {
            break;
        }
        for t in 0..swarm {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = cfg.inertia * vel[t][d]
                    + cfg.c1 * r1 * (pbest[t][d] - pos[t][d])
                    + cfg.c2 * r2 * (gbest[d] - pos[t][d]);
                let mut v = v.clamp(-vmax, vmax);
                let mut x = pos[t][d] + v;
                if x > bound {
                    x = 2.0 * bound - x;
                    v = -v;
                } else if x < -bound {
                    x = -2.0 * bound - x;
                    v = -v;
                }
                pos[t][d] = x.clamp(-bound, bound);
                vel[t][d] = v;
            }
        }
        cost = evaluate_all(&pos)?;
        for t in 0..swarm {
            if cost[t] < pbest_cost[t] {
                pbest_cost[t] = cost[t];
                pbest[t].clone_from(&pos[t]);
            }
        }
        let (cand, ccost) = argmin(&pbest_cost);
        if ccost < gcost {
            g = cand;
            gcost = ccost;
            gbest.clone_from(&pbest[g]);
        }
        record(i, gcost, &gbest, &mut trace)?;
    }

    let gamma = NrCoefficients::from_interleaved(&gbest)?;
    let excitations = assemble(w_ra, &nr_excitations(op, rank, &gamma)?)?;
    Ok(NrSolution {
        gamma,
        excitations,
        trace,
        best_cost: gcost,
        initial_cost,
        search_bound: bound,
        swarm_size: swarm,
    })
}

fn argmin(xs: &[f64]) -> (usize, f64) {
    xs.iter().enumerate().fold(
        (0, f64::INFINITY),
        |b, (k, &x)| if x < b.1 { (k, x) } else { b },
    )
}
