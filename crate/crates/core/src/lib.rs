//! Phased-array excitation synthesis by null-space exploitation of the
//! discretized radiation operator.
//!
//! The pipeline is: sample the far field on an [`pattern::AngularGrid`], build
//! the [`operator::RadiationOperator`] and its SVD, truncate at a threshold to
//! split radiating from non-radiating subspaces, compute minimum-norm
//! excitations that reproduce a reference pattern, and finally search the
//! non-radiating subspace with a particle swarm to satisfy an extra
//! constraint on the excitations without disturbing the pattern.

pub mod error;
pub mod excitation;
pub mod geometry;
pub mod io;
pub mod operator;
pub mod optimizer;
pub mod pattern;
pub mod reference;
pub mod scenario;

pub use error::{Error, Result};
pub use excitation::{ExcitationFormat, ExcitationVector};
pub use geometry::{ApertureRegion, ArrayGeometry, Axis, Position};
pub use scenario::{Scenario, ScenarioConfig};
