//! Constraint costs and the swarm search over the non-radiating subspace.

pub mod cost;
pub mod pso;

pub use cost::{
    cost_drr, cost_forbidden, cost_quantized, levels_from_bits, nearest_level_distance, Constraint,
    ConstraintSpec, DRR_EPSILON,
};
pub use pso::{optimize_nr, ConvergenceTrace, NrSolution, PsoConfig, TraceRecord};
