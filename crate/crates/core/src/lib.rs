//! Production-chain economies with oligarchic capture.
//!
//! An economy is a DAG of goods: raw resources feed companies whose output
//! follows a Cobb-Douglas production function with decreasing returns. The
//! crate evaluates plans ([`value`]), solves the GDP optimum and the
//! oligarch's two-stage problem ([`solver`], [`scenario`]), generates random
//! economies ([`generator`]) and runs seeded Monte Carlo sweeps
//! ([`experiments`]) whose aggregates are rendered by [`report`].

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod economy;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod generator;
pub mod graph;
pub mod io;
pub mod report;
pub mod scenario;
pub mod solver;
pub mod validate;
pub mod value;

pub use economy::{Economy, GoodIndex, OligarchSpec, ProductionPlan};
pub use error::{GeneratorError, IoError, ModelError, ScenarioError, SolverError, Stage};
pub use generator::{generate_economy, generate_oligarch, GeneratorConfig};
pub use scenario::{inefficiency_ratio, run_scenario, run_scenario_with_baseline, ScenarioResult};
pub use solver::{PlanSolution, SolveStatus, SolverSettings};
pub use validate::{validate_economy, ValidationReport};
pub use value::{production_output, total_value_added, value_added, ValueReport};
