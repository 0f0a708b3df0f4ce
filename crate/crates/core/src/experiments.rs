//! Seeded Monte Carlo sweeps over economies, oligarch depths, sizes and
//! capture powers, and their aggregation into grids.
//!
//! Every replication draws one economy and reuses it for all cells; the
//! oligarch of a cell depends only on (economy seed, depth, size), so the
//! same oligarch is seen under every γ.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeneratorError, ScenarioError};
use crate::generator::{generate_economy, generate_oligarch, GeneratorConfig};
use crate::scenario::{run_scenario_with_baseline, ScenarioResult};
use crate::solver::{solve_global_optimum, SolverSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub replications: usize,
    pub depths: Vec<usize>,
    /// Oligarch sizes; `None` means every size from 1 to |M| − d for depth d.
    pub sizes: Option<Vec<usize>>,
    pub gammas: Vec<f64>,
    pub master_seed: u64,
    pub solver: SolverSettings,
    /// Worker threads; results do not depend on it.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorConfig::default(),
            replications: 1000,
            depths: (1..=5).collect(),
            sizes: None,
            gammas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            master_seed: 0,
            solver: SolverSettings::default(),
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |msg: String| Err(GeneratorError::InvalidConfig(msg));
        self.generator.validate()?;
        self.solver.validate().map_err(|e| GeneratorError::InvalidConfig(e.to_string()))?;
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.depths.is_empty() || self.depths.contains(&0) {
            return bad("depths must be a non-empty list of positive integers".into());
        }
        if let Some(sizes) = &self.sizes {
            let n = self.generator.n_companies;
            if sizes.is_empty() || sizes.iter().any(|&s| s == 0 || s > n) {
                return bad(format!("sizes must be a non-empty list within 1..={n}"));
            }
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return bad("gammas must be a non-empty list within [0, 1]".into());
        }
        Ok(())
    }

    /// The sizes swept at `depth`, in increasing order.
    pub fn sizes_at(&self, depth: usize) -> Vec<usize> {
        let mut sizes = match &self.sizes {
            Some(s) => s.clone(),
            None => (1..=self.generator.n_companies.saturating_sub(depth)).collect(),
        };
        sizes.sort_unstable();
        sizes.dedup();
        sizes
    }

    fn sorted_depths(&self) -> Vec<usize> {
        let mut d = self.depths.clone();
        d.sort_unstable();
        d.dedup();
        d
    }

    fn sorted_gammas(&self) -> Vec<f64> {
        let mut g = self.gammas.clone();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }
}

/// Outcome tag of one record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RecordStatus {
    Ok,
    /// No economy satisfied the generator constraints.
    NoEconomy,
    /// No oligarch with the requested size and depth exists.
    NoOligarch,
    /// A solver stage failed; the tag names the stage and the reason.
    Failed(String),
}

impl std::fmt::Display for RecordStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RecordStatus::Ok => f.write_str("ok"),
            RecordStatus::NoEconomy => f.write_str("no-economy"),
            RecordStatus::NoOligarch => f.write_str("no-oligarch"),
            RecordStatus::Failed(tag) => f.write_str(tag),
        }
    }
}

impl std::str::FromStr for RecordStatus {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "ok" => RecordStatus::Ok,
            "no-economy" => RecordStatus::NoEconomy,
            "no-oligarch" => RecordStatus::NoOligarch,
            other => RecordStatus::Failed(other.to_string()),
        })
    }
}

fn failure_tag(err: &ScenarioError) -> String {
    match err {
        ScenarioError::NotOptimal { stage, status } => format!("{stage}:{status:?}"),
        ScenarioError::Solver { stage, .. } => format!("{stage}:error"),
        ScenarioError::Input(_) => "input:error".into(),
    }
}

/// The scenario numbers kept per record, matching the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub psi_star: f64,
    pub oligarch_baseline: f64,
    pub oligarch_optimal: f64,
    pub final_gdp: f64,
    pub relative_gdp: f64,
    pub profit_gain: f64,
    pub gdp_loss: f64,
    pub inefficiency_ratio: Option<f64>,
}

impl From<ScenarioResult> for Outcome {
    fn from(r: ScenarioResult) -> Self {
        Self {
            psi_star: r.psi_star,
            oligarch_baseline: r.oligarch_baseline_profit,
            oligarch_optimal: r.oligarch_optimal_profit,
            final_gdp: r.final_gdp,
            relative_gdp: r.relative_gdp,
            profit_gain: r.profit_gain,
            gdp_loss: r.gdp_loss,
            inefficiency_ratio: r.inefficiency_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub replication: usize,
    pub economy_seed: u64,
    pub depth_requested: usize,
    pub depth_achieved: Option<usize>,
    pub size: usize,
    pub gamma: f64,
    /// False when no oligarch of the requested shape could be drawn.
    pub feasible: bool,
    /// Present only when every stage reached Optimal.
    pub result: Option<Outcome>,
    pub status: RecordStatus,
}

impl ExperimentRecord {
    fn sort_key(&self, other: &Self) -> std::cmp::Ordering {
        (self.replication, self.depth_requested, self.size)
            .cmp(&(other.replication, other.depth_requested, other.size))
            .then(self.gamma.total_cmp(&other.gamma))
    }
}

/// Seed of the economy of replication `r`.
pub fn economy_seed(master_seed: u64, replication: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replication as u64);
    rng.next_u64()
}

/// Seed of the oligarch drawn for (depth, size) in an economy.
pub fn oligarch_seed(economy_seed: u64, depth: usize, size: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(economy_seed);
    rng.set_stream(((depth as u64) << 32) | size as u64);
    rng.next_u64()
}

/// Runs the sweep. Records come back sorted by (replication, depth, size, γ)
/// whatever the worker count.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>, GeneratorError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| GeneratorError::InvalidConfig(e.to_string()))?;
    let mut records: Vec<ExperimentRecord> = pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .flat_map_iter(|r| run_replication(config, r))
            .collect()
    });
    records.sort_by(ExperimentRecord::sort_key);
    Ok(records)
}

/// All records of one replication.
pub fn run_replication(config: &ExperimentConfig, replication: usize) -> Vec<ExperimentRecord> {
    let seed = economy_seed(config.master_seed, replication);
    let economy = generate_economy(&config.generator, seed);
    if let Err(e) = &economy {
        log::warn!("replication {replication}: {e}");
    }
    let baseline = economy.as_ref().ok().map(|e| solve_global_optimum(e, &config.solver));
    let mut records = Vec::new();
    for depth in config.sorted_depths() {
        for size in config.sizes_at(depth) {
            let cell = |gamma, depth_achieved, status, result| ExperimentRecord {
                replication,
                economy_seed: seed,
                depth_requested: depth,
                depth_achieved,
                size,
                gamma,
                feasible: depth_achieved.is_some(),
                result,
                status,
            };
            let Ok(economy) = &economy else {
                records.extend(config.sorted_gammas().into_iter().map(|g| cell(g, None, RecordStatus::NoEconomy, None)));
                continue;
            };
            let oligarch = match generate_oligarch(economy, size, depth, oligarch_seed(seed, depth, size)) {
                Ok(o) => o,
                Err(_) => {
                    records.extend(
                        config.sorted_gammas().into_iter().map(|g| cell(g, None, RecordStatus::NoOligarch, None)),
                    );
                    continue;
                }
            };
            for gamma in config.sorted_gammas() {
                let outcome = match baseline.as_ref().expect("economy exists") {
                    Ok(b) => run_scenario_with_baseline(economy, b, &oligarch, gamma, &config.solver),
                    Err(e) => Err(ScenarioError::Solver { stage: crate::Stage::GlobalOptimum, source: e.clone() }),
                };
                let record = match outcome {
                    Ok(result) => cell(gamma, Some(oligarch.depth()), RecordStatus::Ok, Some(result.into())),
                    Err(err) => {
                        log::warn!("replication {replication}, depth {depth}, size {size}, gamma {gamma}: {err}");
                        cell(gamma, Some(oligarch.depth()), RecordStatus::Failed(failure_tag(&err)), None)
                    }
                };
                records.push(record);
            }
        }
    }
    log::info!("replication {replication} done ({} records)", records.len());
    records
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridKind {
    /// Rows are depths, columns sizes, at one γ.
    RelativeGdpByDepthSize { gamma: f64 },
    /// Rows are sizes, columns γ values, at one depth.
    RelativeGdpBySizeGamma { depth: usize },
    /// Rows are depths, columns sizes, at one γ.
    InefficiencyByDepthSize { gamma: f64 },
}

impl GridKind {
    pub fn name(&self) -> &'static str {
        match self {
            GridKind::RelativeGdpByDepthSize { .. } => "relative_gdp_by_depth_size",
            GridKind::RelativeGdpBySizeGamma { .. } => "relative_gdp_by_size_gamma",
            GridKind::InefficiencyByDepthSize { .. } => "inefficiency_by_depth_size",
        }
    }

    pub fn metric(&self) -> &'static str {
        match self {
            GridKind::InefficiencyByDepthSize { .. } => "inefficiency_ratio",
            _ => "relative_gdp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: Option<f64>,
    /// Records entering the mean.
    pub count: usize,
    pub std: Option<f64>,
    /// Scenarios whose ratio is undefined (ratio grids only).
    pub count_undefined: usize,
    /// Scenarios where a solver stage failed.
    pub count_failed: usize,
    /// Replications where no oligarch of this shape existed.
    pub count_infeasible: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateGrid {
    pub kind: GridKind,
    pub metric: String,
    pub n_companies: usize,
    pub rows: Axis,
    pub columns: Axis,
    /// `cells[row][column]`.
    pub cells: Vec<Vec<Cell>>,
}

impl AggregateGrid {
    pub fn cell(&self, row: f64, column: f64) -> Option<&Cell> {
        let r = self.rows.values.iter().position(|&v| same(v, row))?;
        let c = self.columns.values.iter().position(|&v| same(v, column))?;
        Some(&self.cells[r][c])
    }

    pub fn populated(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.count > 0).count()
    }

    pub fn total_failed(&self) -> usize {
        self.cells.iter().flatten().map(|c| c.count_failed).sum()
    }
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

/// Sum with O(log n) error growth.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn summarize(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let std = (values.len() > 1).then(|| {
        let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
        (pairwise_sum(&sq) / (n - 1.0)).sqrt()
    });
    (Some(mean), std)
}

fn unique_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| same(*a, *b));
    v
}

fn size_axis(sizes: Vec<f64>, n_companies: usize) -> Axis {
    let labels = sizes.iter().map(|s| format!("{:.0}%", 100.0 * s / n_companies as f64)).collect();
    Axis { name: "size".into(), values: sizes, labels }
}

fn plain_axis(name: &str, values: Vec<f64>) -> Axis {
    let labels = values.iter().map(|v| format!("{v}")).collect();
    Axis { name: name.into(), values, labels }
}

/// Aggregates records of one sweep into a grid. `n_companies` labels the
/// size axis as a share of all companies.
pub fn aggregate(records: &[ExperimentRecord], kind: GridKind, n_companies: usize) -> AggregateGrid {
    let selected: Vec<&ExperimentRecord> = records
        .iter()
        .filter(|r| match kind {
            GridKind::RelativeGdpByDepthSize { gamma } | GridKind::InefficiencyByDepthSize { gamma } => {
                same(r.gamma, gamma)
            }
            GridKind::RelativeGdpBySizeGamma { depth } => r.depth_requested == depth,
        })
        .collect();
    let key = |r: &ExperimentRecord| -> (f64, f64) {
        match kind {
            GridKind::RelativeGdpBySizeGamma { .. } => (r.size as f64, r.gamma),
            _ => (r.depth_requested as f64, r.size as f64),
        }
    };
    let row_values = unique_sorted(selected.iter().map(|r| key(r).0));
    let col_values = unique_sorted(selected.iter().map(|r| key(r).1));
    let (rows, columns) = match kind {
        GridKind::RelativeGdpBySizeGamma { .. } => {
            (size_axis(row_values.clone(), n_companies), plain_axis("gamma", col_values.clone()))
        }
        _ => (plain_axis("depth", row_values.clone()), size_axis(col_values.clone(), n_companies)),
    };

    let mut buckets: BTreeMap<(usize, usize), (Vec<f64>, Cell)> = BTreeMap::new();
    for r in &selected {
        let (a, b) = key(r);
        let ri = row_values.iter().position(|&v| same(v, a)).expect("row value");
        let ci = col_values.iter().position(|&v| same(v, b)).expect("column value");
        let (values, cell) = buckets.entry((ri, ci)).or_default();
        match (&r.result, r.feasible) {
            (_, false) => cell.count_infeasible += 1,
            (None, true) => cell.count_failed += 1,
            (Some(res), true) => match kind {
                GridKind::InefficiencyByDepthSize { .. } => match res.inefficiency_ratio {
                    Some(v) => values.push(v),
                    None => cell.count_undefined += 1,
                },
                _ => values.push(res.relative_gdp),
            },
        }
    }
    let mut cells = vec![vec![Cell::default(); col_values.len()]; row_values.len()];
    for ((ri, ci), (values, mut cell)) in buckets {
        (cell.mean, cell.std) = summarize(&values);
        cell.count = values.len();
        cells[ri][ci] = cell;
    }
    AggregateGrid { kind, metric: kind.metric().into(), n_companies, rows, columns, cells }
}
