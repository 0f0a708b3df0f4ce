//! `oligarchy`: generate economies, solve them, run oligarch scenarios and
//! Monte Carlo sweeps, and draw the resulting grids.
//!
//! Exit codes: 1 for usage and I/O errors, 2 for invalid inputs, 3 when a
//! solver stage does not converge.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};
use serde::Serialize;

use oligarchy_core::experiments::{aggregate, run_monte_carlo, AggregateGrid, ExperimentConfig, GridKind};
use oligarchy_core::generator::OligarchWitness;
use oligarchy_core::io::{read_economy, read_json, write_economy, OligarchFile};
use oligarchy_core::report::{self, FigureKind, FigureSpec};
use oligarchy_core::solver::{solve_global_optimum, PlanSolutionFile};
use oligarchy_core::{
    fixtures, generate_economy, run_scenario, validate_economy, Economy, GeneratorConfig, GeneratorError, GoodIndex,
    IoError, OligarchSpec, ScenarioError, SolverSettings,
};

#[derive(Parser)]
#[command(name = "oligarchy", version, about = "Production-chain economies under oligarchic capture")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random economy and write it as JSON.
    Gen(GenArgs),
    /// Solve the no-oligarch GDP optimum of an economy.
    Solve(SolveArgs),
    /// Run the oligarch and adaptation stages for one oligarch and capture power.
    Scenario(ScenarioArgs),
    /// Monte Carlo sweep: writes records.csv and grids.json.
    Mc(McArgs),
    /// Draw grids as SVG or CSV, or flatten a plan to CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct GeneratorArgs {
    /// Generator configuration as JSON; replaces the generator flags below.
    #[arg(long, value_name = "FILE")]
    generator_config: Option<PathBuf>,
    #[arg(long, default_value_t = GeneratorConfig::default().n_raw, conflicts_with = "generator_config")]
    n_raw: usize,
    #[arg(long, default_value_t = GeneratorConfig::default().n_companies, conflicts_with = "generator_config")]
    n_companies: usize,
    /// Inputs per company.
    #[arg(long, default_value_t = GeneratorConfig::default().indegree, conflicts_with = "generator_config")]
    indegree: usize,
    /// Minimum longest path of the production graph.
    #[arg(long, default_value_t = GeneratorConfig::default().min_graph_depth, conflicts_with = "generator_config")]
    min_graph_depth: usize,
    /// Size of an oligarch every economy must be able to host.
    #[arg(long, default_value_t = 12, conflicts_with = "generator_config")]
    witness_size: usize,
    /// Depth of that oligarch.
    #[arg(long, default_value_t = 3, conflicts_with = "generator_config")]
    witness_depth: usize,
    /// Do not require the oligarch witness.
    #[arg(long, conflicts_with = "generator_config")]
    no_witness: bool,
    /// Base b of the prices b^k.
    #[arg(long, default_value_t = GeneratorConfig::default().price_base, conflicts_with = "generator_config")]
    price_base: f64,
    #[arg(long, default_value_t = GeneratorConfig::default().max_attempts, conflicts_with = "generator_config")]
    max_attempts: usize,
}

impl GeneratorArgs {
    fn config(&self) -> Result<GeneratorConfig, Failure> {
        if let Some(path) = &self.generator_config {
            return Ok(read_json(path)?);
        }
        Ok(GeneratorConfig {
            n_raw: self.n_raw,
            n_companies: self.n_companies,
            indegree: self.indegree,
            min_graph_depth: self.min_graph_depth,
            oligarch_feasibility: (!self.no_witness)
                .then_some(OligarchWitness { size: self.witness_size, depth: self.witness_depth }),
            price_base: self.price_base,
            max_attempts: self.max_attempts,
            ..Default::default()
        })
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Lower bound on every active flow.
    #[arg(long, default_value_t = SolverSettings::default().epsilon)]
    epsilon: f64,
    /// Largest accepted KKT residual.
    #[arg(long, default_value_t = SolverSettings::default().kkt_tolerance)]
    kkt_tol: f64,
    /// Newton step cap per solve.
    #[arg(long, default_value_t = SolverSettings::default().max_iterations)]
    max_iterations: usize,
    /// Barrier parameter factor per centering.
    #[arg(long, default_value_t = SolverSettings::default().barrier_decrease)]
    barrier_decrease: f64,
    /// Relative relaxation of the oligarch profit guarantee during adaptation.
    #[arg(long, default_value_t = SolverSettings::default().profit_slack)]
    profit_slack: f64,
    /// Keep the capture caps binding during adaptation.
    #[arg(long)]
    cap_adaptation: bool,
}

impl SolverArgs {
    fn settings(&self) -> Result<SolverSettings, Failure> {
        let s = SolverSettings {
            epsilon: self.epsilon,
            kkt_tolerance: self.kkt_tol,
            max_iterations: self.max_iterations,
            barrier_decrease: self.barrier_decrease,
            profit_slack: self.profit_slack,
            cap_adaptation: self.cap_adaptation,
        };
        s.validate().map_err(|e| Failure::invalid(e.to_string()))?;
        Ok(s)
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the eight-good worked example instead of drawing an economy.
    #[arg(long)]
    example: bool,
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Economy JSON.
    economy: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    economy: PathBuf,
    /// Comma-separated 1-based company indices.
    #[arg(long, value_delimiter = ',', required_unless_present = "oligarch", conflicts_with = "oligarch")]
    members: Vec<usize>,
    /// Oligarch JSON (`{"members": [...]}`).
    #[arg(long)]
    oligarch: Option<PathBuf>,
    /// Capture power.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    /// Master seed of the sweep.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Number of economies L.
    #[arg(long, default_value_t = 1000)]
    replications: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    gammas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    depths: Vec<usize>,
    /// Oligarch sizes [default: 1 to companies minus depth].
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[command(flatten)]
    generator: GeneratorArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output directory.
    #[arg(short, long, default_value = ".")]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Heatmap,
    Lines,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridChoice {
    RelativeGdpByDepthSize,
    RelativeGdpBySizeGamma,
    InefficiencyByDepthSize,
}

#[derive(Args)]
struct ReportArgs {
    /// grids.json or records.csv from `mc`, or a plan JSON with --economy.
    input: PathBuf,
    /// .svg draws a figure, .csv writes the grid (or plan) as a table.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "heatmap")]
    figure: Figure,
    /// Grid to draw; line charts always use relative-gdp-by-size-gamma.
    #[arg(long, value_enum, default_value = "relative-gdp-by-depth-size")]
    grid: GridChoice,
    /// Capture power of depth-by-size grids.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Depths of size-by-gamma grids [default: all].
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
    /// Companies per economy, for the size labels of records input.
    #[arg(long, default_value_t = GeneratorConfig::default().n_companies)]
    n_companies: usize,
    #[arg(long, default_value = "")]
    title: String,
    /// Economy of a plan input.
    #[arg(long)]
    economy: Option<PathBuf>,
}

/// An error with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn solver(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Format { .. } | IoError::Model(_) => Failure::invalid(e.to_string()),
            _ => Failure::usage(e.to_string()),
        }
    }
}

impl From<GeneratorError> for Failure {
    fn from(e: GeneratorError) -> Self {
        Failure::invalid(e.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::NotOptimal { .. } => Failure::solver(e.to_string()),
            _ => Failure::invalid(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Scenario(a) => scenario(a),
        Command::Mc(a) => mc(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn emit_json<T: Serialize>(output: Option<&Path>, value: &T) -> Result<(), Failure> {
    match output {
        Some(path) => Ok(oligarchy_core::io::write_json(path, value)?),
        None => {
            let text = serde_json::to_string_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn load_economy(path: &Path) -> Result<Economy, Failure> {
    let economy = read_economy(path)?;
    let report = validate_economy(&economy);
    if !report.is_ok() {
        return Err(Failure::invalid(format!("{}: {report}", path.display())));
    }
    Ok(economy)
}

fn gen(a: GenArgs) -> Result<(), Failure> {
    let economy = if a.example {
        fixtures::e8()
    } else {
        let config = a.generator.config()?;
        generate_economy(&config, a.seed)?
    };
    info!("economy with {} goods", economy.n_goods());
    match &a.output {
        Some(path) => Ok(write_economy(path, &economy)?),
        None => emit_json(None, &oligarchy_core::io::EconomyFile::from(&economy)),
    }
}

fn solve(a: SolveArgs) -> Result<(), Failure> {
    let economy = load_economy(&a.economy)?;
    let settings = a.solver.settings()?;
    let solution = solve_global_optimum(&economy, &settings).map_err(|e| Failure::invalid(e.to_string()))?;
    info!("objective {} after {} iterations", solution.objective, solution.iterations);
    emit_json(a.output.as_deref(), &PlanSolutionFile::from(&solution))?;
    if !solution.is_optimal() {
        return Err(Failure::solver(format!(
            "global-optimum stage finished with status {:?} (KKT residual {:.3e})",
            solution.status, solution.kkt_residual
        )));
    }
    Ok(())
}

fn scenario(a: ScenarioArgs) -> Result<(), Failure> {
    let economy = load_economy(&a.economy)?;
    let settings = a.solver.settings()?;
    let members: Vec<GoodIndex> = match &a.oligarch {
        Some(path) => read_json::<OligarchFile>(path)?.members,
        None => a
            .members
            .iter()
            .map(|&m| GoodIndex::new(m).ok_or_else(|| Failure::invalid("good indices are 1-based")))
            .collect::<Result<_, _>>()?,
    };
    let oligarch = OligarchSpec::new(&economy, &members).map_err(|e| Failure::invalid(e.to_string()))?;
    if !(0.0..=1.0).contains(&a.gamma) {
        return Err(Failure::invalid(format!("gamma {} outside [0, 1]", a.gamma)));
    }
    let result = run_scenario(&economy, &oligarch, a.gamma, &settings)?;
    emit_json(a.output.as_deref(), &result)
}

fn mc(a: McArgs) -> Result<(), Failure> {
    let config = ExperimentConfig {
        generator: a.generator.config()?,
        replications: a.replications,
        depths: a.depths,
        sizes: a.sizes,
        gammas: a.gammas,
        master_seed: a.seed,
        solver: a.solver.settings()?,
        workers: a.workers,
    };
    config.validate()?;
    std::fs::create_dir_all(&a.output)
        .map_err(|e| Failure::usage(format!("{}: {e}", a.output.display())))?;
    let records = run_monte_carlo(&config)?;
    let csv = report::emit_csv(&records, &a.output.join("records.csv"))?;
    info!("{} records, sha256 {}", csv.items, csv.sha256);

    let n = config.generator.n_companies;
    let mut gammas = config.gammas.clone();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    let mut depths = config.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    let mut grids = Vec::new();
    for &gamma in &gammas {
        grids.push(aggregate(&records, GridKind::RelativeGdpByDepthSize { gamma }, n));
    }
    for &depth in &depths {
        grids.push(aggregate(&records, GridKind::RelativeGdpBySizeGamma { depth }, n));
    }
    for &gamma in &gammas {
        grids.push(aggregate(&records, GridKind::InefficiencyByDepthSize { gamma }, n));
    }
    report::emit_grids_json(&grids, &a.output.join("grids.json"))?;
    let failed: usize = grids[..gammas.len()].iter().map(AggregateGrid::total_failed).sum();
    if failed > 0 {
        log::warn!("{failed} scenarios did not converge or were infeasible; see the status column");
    }
    Ok(())
}

fn wanted(choice: GridChoice, figure: Figure, gamma: f64, depths: Option<&[usize]>, kind: &GridKind) -> bool {
    let depth_ok = |d: &usize| depths.is_none_or(|ds| ds.contains(d));
    match (figure, choice, kind) {
        (Figure::Lines, _, GridKind::RelativeGdpBySizeGamma { depth }) => depth_ok(depth),
        (Figure::Lines, _, _) => false,
        (_, GridChoice::RelativeGdpByDepthSize, GridKind::RelativeGdpByDepthSize { gamma: g })
        | (_, GridChoice::InefficiencyByDepthSize, GridKind::InefficiencyByDepthSize { gamma: g }) => {
            (g - gamma).abs() < 1e-12
        }
        (_, GridChoice::RelativeGdpBySizeGamma, GridKind::RelativeGdpBySizeGamma { depth }) => depth_ok(depth),
        _ => false,
    }
}

fn report_cmd(a: ReportArgs) -> Result<(), Failure> {
    let to_csv = a.output.extension().is_some_and(|e| e == "csv");
    if let Some(economy_path) = &a.economy {
        let economy = load_economy(economy_path)?;
        let file: PlanSolutionFile = read_json(&a.input)?;
        let plan = file.plan.to_plan(&economy)?;
        if !to_csv {
            return Err(Failure::usage("plans are written as CSV; use an output ending in .csv"));
        }
        report::emit_plan_csv(&economy, &plan, &a.output)?;
        return Ok(());
    }

    let is_records = a.input.extension().is_some_and(|e| e == "csv");
    let grids: Vec<AggregateGrid> = if is_records {
        let records = report::read_records_csv(&a.input)?;
        let mut depths: Vec<usize> = records.iter().map(|r| r.depth_requested).collect();
        depths.sort_unstable();
        depths.dedup();
        let mut kinds = vec![
            GridKind::RelativeGdpByDepthSize { gamma: a.gamma },
            GridKind::InefficiencyByDepthSize { gamma: a.gamma },
        ];
        kinds.extend(depths.into_iter().map(|depth| GridKind::RelativeGdpBySizeGamma { depth }));
        kinds.into_iter().map(|k| aggregate(&records, k, a.n_companies)).collect()
    } else {
        report::read_grids_json(&a.input)?
    };
    let chosen: Vec<AggregateGrid> = grids
        .into_iter()
        .filter(|g| wanted(a.grid, a.figure, a.gamma, a.depths.as_deref(), &g.kind))
        .filter(|g| !g.cells.is_empty())
        .collect();
    if chosen.is_empty() {
        return Err(Failure::invalid(format!("{}: no grid matches the selection", a.input.display())));
    }
    if to_csv {
        let [grid] = chosen.as_slice() else {
            return Err(Failure::usage(format!("{} grids match; narrow the selection for CSV", chosen.len())));
        };
        report::emit_grid_csv(grid, &a.output)?;
        return Ok(());
    }
    let spec = FigureSpec {
        kind: match a.figure {
            Figure::Heatmap => FigureKind::Heatmap,
            Figure::Lines => FigureKind::LineFamily,
        },
        title: a.title,
        ..Default::default()
    };
    if matches!(a.figure, Figure::Heatmap) && chosen.len() != 1 {
        return Err(Failure::usage(format!("{} grids match; a heatmap draws one (use --depths)", chosen.len())));
    }
    let written = report::emit_figure(&chosen, &spec, &a.output)?;
    info!("{}: {} items, sha256 {}", written.path.display(), written.items, written.sha256);
    Ok(())
}
