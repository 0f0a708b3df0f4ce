//! Concave maximization for the three planning problems.
//!
//! * [`solve_global_optimum`]: GDP-maximizing plan subject to balance.
//! * [`solve_oligarch_stage`]: oligarch profit under capture caps.
//! * [`solve_adaptation_stage`]: the rest of the economy re-optimizes while
//!   the oligarch keeps its profit.
//!
//! Every solve runs a log-barrier method over the flows with positive
//! coefficients (see [`Problem`]). Reported objectives are recomputed from
//! the returned plan with the evaluation functions in [`crate::value`].

mod barrier;
mod problem;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::economy::{member_mask, Economy, GoodIndex, OligarchSpec, ProductionPlan};
use crate::error::SolverError;
use crate::io::PlanFile;
use crate::value;

pub use problem::{Constraint, Problem, ProblemKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Lower bound on every flow with a positive coefficient.
    pub epsilon: f64,
    pub kkt_tolerance: f64,
    /// Cap on Newton steps per solve.
    pub max_iterations: usize,
    /// Factor applied to the barrier parameter after each centering.
    pub barrier_decrease: f64,
    /// Relative relaxation of the oligarch profit guarantee in the adaptation
    /// stage; the absolute relaxation is `max(epsilon, profit_slack * |profit|)`.
    pub profit_slack: f64,
    /// Keep the capture caps binding during adaptation.
    pub cap_adaptation: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            kkt_tolerance: 1e-6,
            max_iterations: 500,
            barrier_decrease: 0.2,
            profit_slack: 1e-5,
            cap_adaptation: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::InvalidSettings(msg.into()));
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.kkt_tolerance > 0.0) {
            return bad("kkt_tolerance must be positive");
        }
        if !(self.barrier_decrease > 0.0 && self.barrier_decrease < 1.0) {
            return bad("barrier_decrease must lie in (0, 1)");
        }
        if !(self.profit_slack >= 0.0) {
            return bad("profit_slack must be non-negative");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        Ok(())
    }

    /// The profit floor enforced in the adaptation stage.
    pub fn relaxed_floor(&self, profit: f64) -> f64 {
        profit - self.epsilon.max(self.profit_slack * profit.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    IterationLimit,
    Infeasible,
}

/// Lagrange multipliers: one per constraint of the problem, one per flow
/// lower bound.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Multipliers {
    pub constraints: Vec<f64>,
    pub bounds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanSolution {
    pub plan: ProductionPlan,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub multipliers: Multipliers,
}

impl PlanSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// JSON form of a [`PlanSolution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSolutionFile {
    #[serde(flatten)]
    pub plan: PlanFile,
    pub objective: f64,
    pub kkt_residual: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl From<&PlanSolution> for PlanSolutionFile {
    fn from(s: &PlanSolution) -> Self {
        Self {
            plan: PlanFile::from(&s.plan),
            objective: s.objective,
            kkt_residual: s.kkt_residual,
            status: s.status,
            iterations: s.iterations,
        }
    }
}

/// Inputs of the oligarch stage: the no-oligarch optimum, the capture power
/// and the oligarch.
#[derive(Debug, Clone, Copy)]
pub struct CaptureContext<'a> {
    pub baseline: &'a PlanSolution,
    pub gamma: f64,
    pub oligarch: &'a OligarchSpec,
}

impl<'a> CaptureContext<'a> {
    pub fn new(baseline: &'a PlanSolution, gamma: f64, oligarch: &'a OligarchSpec) -> Result<Self, SolverError> {
        if !baseline.is_optimal() {
            return Err(SolverError::InvalidContext(format!(
                "baseline status is {:?}, expected Optimal",
                baseline.status
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(SolverError::InvalidContext(format!("gamma = {gamma} outside [0, 1]")));
        }
        Ok(Self { baseline, gamma, oligarch })
    }
}

fn finish(
    problem: &Problem<'_>,
    outcome: barrier::Outcome,
    objective: impl FnOnce(&ProductionPlan) -> f64,
) -> Result<PlanSolution, SolverError> {
    let plan = problem.plan(&outcome.z)?;
    Ok(PlanSolution {
        objective: objective(&plan),
        plan,
        kkt_residual: outcome.kkt_residual,
        iterations: outcome.iterations,
        status: outcome.status,
        multipliers: outcome.multipliers,
    })
}

fn infeasible(problem: &Problem<'_>, z: DVector<f64>, iterations: usize) -> Result<PlanSolution, SolverError> {
    let plan = problem.plan(&z.map(|v| if v.is_finite() { v.max(0.0) } else { 0.0 }))?;
    Ok(PlanSolution {
        objective: f64::NAN,
        plan,
        kkt_residual: f64::INFINITY,
        iterations,
        status: SolveStatus::Infeasible,
        multipliers: Multipliers::default(),
    })
}

fn check_economy(economy: &Economy, plan: &ProductionPlan) -> Result<(), SolverError> {
    if plan.n_goods() != economy.n_goods() {
        return Err(SolverError::InvalidContext("baseline plan does not match economy".into()));
    }
    Ok(())
}

/// The GDP-maximizing plan.
pub fn solve_global_optimum(economy: &Economy, settings: &SolverSettings) -> Result<PlanSolution, SolverError> {
    settings.validate()?;
    let problem = Problem::global(economy, settings);
    let Some(z0) = problem.interior_start() else {
        return infeasible(&problem, DVector::zeros(problem.n_variables()), 0);
    };
    let outcome = barrier::maximize(&problem, z0, settings, true, |_| false);
    finish(&problem, outcome, |plan| {
        value::total_value_added(economy, plan, None).expect("plan matches economy").total
    })
}

/// The oligarch's profit-maximizing plan under the capture caps.
pub fn solve_oligarch_stage(
    economy: &Economy,
    ctx: &CaptureContext<'_>,
    settings: &SolverSettings,
) -> Result<PlanSolution, SolverError> {
    settings.validate()?;
    check_economy(economy, &ctx.baseline.plan)?;
    let problem = Problem::oligarch_stage(economy, ctx, settings);
    let Some(z0) = problem.interior_start() else {
        return infeasible(&problem, DVector::zeros(problem.n_variables()), 0);
    };
    let outcome = barrier::maximize(&problem, z0, settings, true, |_| false);
    let mask = ctx.oligarch.mask(economy.n_goods());
    finish(&problem, outcome, |plan| value::value_over(economy, plan, &mask))
}

/// Re-adaptation of the economy around the oligarch profit `oligarch_profit`.
///
/// The reported objective is the full GDP of the returned plan.
pub fn solve_adaptation_stage(
    economy: &Economy,
    members: &[GoodIndex],
    oligarch_profit: f64,
    settings: &SolverSettings,
) -> Result<PlanSolution, SolverError> {
    adapt(economy, members, oligarch_profit, None, settings)
}

/// Adaptation with the capture caps of `ctx` still binding.
pub fn solve_adaptation_stage_capped(
    economy: &Economy,
    ctx: &CaptureContext<'_>,
    oligarch_profit: f64,
    settings: &SolverSettings,
) -> Result<PlanSolution, SolverError> {
    check_economy(economy, &ctx.baseline.plan)?;
    adapt(economy, ctx.oligarch.members(), oligarch_profit, Some(ctx), settings)
}

fn adapt(
    economy: &Economy,
    members: &[GoodIndex],
    oligarch_profit: f64,
    capture: Option<&CaptureContext<'_>>,
    settings: &SolverSettings,
) -> Result<PlanSolution, SolverError> {
    settings.validate()?;
    for &m in members {
        economy.company(m)?;
    }
    let floor = settings.relaxed_floor(oligarch_profit);
    let problem = Problem::adaptation(economy, members, floor, capture, settings);
    let Some(z0) = problem.interior_start() else {
        return infeasible(&problem, DVector::zeros(problem.n_variables()), 0);
    };

    // Phase one: push the oligarch's value above its floor. The rest of the
    // economy keeps a small weight to stay bounded; it is shrunk while the
    // floor is out of reach, since it trades off against the oligarch.
    let target = floor + 0.25 * (oligarch_profit - floor);
    let mut z = z0;
    let mut iterations = 0;
    let mut start = None;
    for weight in [1e-3, 1e-6, 1e-9] {
        let (phase_one, _) = problem.floor_phase(weight).expect("adaptation has a value floor");
        let run = barrier::maximize(&phase_one, z, settings, true, |z| phase_one.primary_objective(z) > target);
        iterations += run.iterations;
        start = interior_above_floor(&problem, &run.z, &run.interior);
        z = run.interior;
        if start.is_some() {
            break;
        }
    }
    let Some(z) = start else {
        return infeasible(&problem, z, iterations);
    };

    let mut outcome = barrier::maximize(&problem, z, settings, true, |_| false);
    iterations += outcome.iterations;
    outcome.iterations = iterations;
    finish(&problem, outcome, |plan| {
        value::total_value_added(economy, plan, None).expect("plan matches economy").total
    })
}

/// A strictly feasible point of `problem` on the segment from the interior
/// point `inner` towards `best`, which may lie on the boundary of the
/// constraints other than the value floor. Concavity makes every point of the
/// segment short of `best` strictly feasible for those constraints.
fn interior_above_floor(problem: &Problem<'_>, best: &DVector<f64>, inner: &DVector<f64>) -> Option<DVector<f64>> {
    if problem.is_strictly_feasible(best) {
        return Some(best.clone());
    }
    [1e-6, 1e-4, 1e-2, 0.1, 0.5]
        .into_iter()
        .map(|theta| best * (1.0 - theta) + inner * theta)
        .find(|z| problem.is_strictly_feasible(z))
}

/// KKT residual of `plan` for `problem` under the given multipliers.
pub fn kkt_residual(problem: &Problem<'_>, plan: &ProductionPlan, multipliers: &Multipliers) -> Result<f64, SolverError> {
    let z = problem.point(plan)?;
    Ok(problem.kkt_residual_at(&z, multipliers))
}

/// Oligarch value added of a plan (helper shared by the scenario pipeline).
pub fn oligarch_value(economy: &Economy, plan: &ProductionPlan, members: &[GoodIndex]) -> f64 {
    value::value_over(economy, plan, &member_mask(members, economy.n_goods()))
}
