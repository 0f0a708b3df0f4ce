//! The three-stage pipeline for one (economy, oligarch, γ) triple.

use serde::{Deserialize, Serialize};

use crate::economy::{Economy, OligarchSpec};
use crate::error::{ScenarioError, Stage};
use crate::solver::{
    oligarch_value, solve_adaptation_stage, solve_adaptation_stage_capped, solve_global_optimum,
    solve_oligarch_stage, CaptureContext, PlanSolution, SolverSettings,
};

/// Profit gains below this are treated as no gain at all.
pub const DEFAULT_GAIN_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub psi_star: f64,
    /// Oligarch value added under the no-oligarch optimum.
    pub oligarch_baseline_profit: f64,
    /// Best oligarch value added under the capture caps.
    pub oligarch_optimal_profit: f64,
    /// GDP after the rest of the economy adapts.
    pub final_gdp: f64,
    /// What the oligarch actually keeps in the adapted plan.
    pub final_oligarch_profit: f64,
    pub relative_gdp: f64,
    pub profit_gain: f64,
    pub gdp_loss: f64,
    /// `None` when the gain is below the floor.
    pub inefficiency_ratio: Option<f64>,
}

/// GDP lost per unit of oligarch gain, undefined for gains under `gain_floor`.
pub fn inefficiency_ratio(gdp_loss: f64, profit_gain: f64, gain_floor: f64) -> Option<f64> {
    assert!(gain_floor > 0.0, "gain floor must be positive");
    (profit_gain >= gain_floor).then(|| gdp_loss / profit_gain)
}

fn require_optimal(stage: Stage, solution: &PlanSolution) -> Result<(), ScenarioError> {
    if solution.is_optimal() {
        Ok(())
    } else {
        Err(ScenarioError::NotOptimal { stage, status: solution.status })
    }
}

/// Solves the no-oligarch optimum and runs the scenario on it.
pub fn run_scenario(
    economy: &Economy,
    oligarch: &OligarchSpec,
    gamma: f64,
    settings: &SolverSettings,
) -> Result<ScenarioResult, ScenarioError> {
    let baseline = solve_global_optimum(economy, settings)
        .map_err(|source| ScenarioError::Solver { stage: Stage::GlobalOptimum, source })?;
    run_scenario_with_baseline(economy, &baseline, oligarch, gamma, settings)
}

/// Runs the oligarch and adaptation stages against a precomputed optimum, so
/// sweeps over oligarchs and γ solve the global problem once per economy.
pub fn run_scenario_with_baseline(
    economy: &Economy,
    baseline: &PlanSolution,
    oligarch: &OligarchSpec,
    gamma: f64,
    settings: &SolverSettings,
) -> Result<ScenarioResult, ScenarioError> {
    require_optimal(Stage::GlobalOptimum, baseline)?;
    if baseline.plan.n_goods() != economy.n_goods() {
        return Err(ScenarioError::Input("baseline plan does not match the economy".into()));
    }
    let ctx = CaptureContext::new(baseline, gamma, oligarch)
        .map_err(|source| ScenarioError::Solver { stage: Stage::OligarchProfit, source })?;
    let stage1 = solve_oligarch_stage(economy, &ctx, settings)
        .map_err(|source| ScenarioError::Solver { stage: Stage::OligarchProfit, source })?;
    require_optimal(Stage::OligarchProfit, &stage1)?;

    let stage2 = if settings.cap_adaptation {
        solve_adaptation_stage_capped(economy, &ctx, stage1.objective, settings)
    } else {
        solve_adaptation_stage(economy, oligarch.members(), stage1.objective, settings)
    }
    .map_err(|source| ScenarioError::Solver { stage: Stage::Adaptation, source })?;
    require_optimal(Stage::Adaptation, &stage2)?;

    let psi_star = baseline.objective;
    let oligarch_baseline_profit = oligarch_value(economy, &baseline.plan, oligarch.members());
    let profit_gain = stage1.objective - oligarch_baseline_profit;
    let gdp_loss = psi_star - stage2.objective;
    Ok(ScenarioResult {
        psi_star,
        oligarch_baseline_profit,
        oligarch_optimal_profit: stage1.objective,
        final_gdp: stage2.objective,
        final_oligarch_profit: oligarch_value(economy, &stage2.plan, oligarch.members()),
        relative_gdp: stage2.objective / psi_star,
        profit_gain,
        gdp_loss,
        inefficiency_ratio: inefficiency_ratio(gdp_loss, profit_gain, DEFAULT_GAIN_FLOOR),
    })
}
