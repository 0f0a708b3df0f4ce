use std::path::PathBuf;

use thiserror::Error;

use crate::solver::SolveStatus;

/// Errors raised by economy construction and evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("good index {index} outside 1..={n_goods}")]
    IndexOutOfRange { index: usize, n_goods: usize },
    #[error("good {0} is a raw resource, not a company")]
    NotACompany(usize),
    #[error("negative flow {value} from good {supplier} to good {consumer}")]
    NegativeFlow { supplier: usize, consumer: usize, value: f64 },
    #[error("invalid oligarch: {0}")]
    InvalidOligarch(String),
    #[error("company {0} is unreachable from every raw resource")]
    Unreachable(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
    #[error("no economy satisfied all constraints after {attempts} attempts (last rejection: {reason})")]
    RejectionExhausted { attempts: usize, reason: String },
    #[error("invalid request: {0}")]
    Precondition(String),
    #[error("no oligarch of size {size} and depth {depth} fits this economy")]
    NoFeasibleOligarch { size: usize, depth: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),
    #[error("invalid capture context: {0}")]
    InvalidContext(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Pipeline stage names used in scenario error attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    GlobalOptimum,
    OligarchProfit,
    Adaptation,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::GlobalOptimum => "global-optimum",
            Stage::OligarchProfit => "oligarch-profit",
            Stage::Adaptation => "adaptation",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("{stage} stage: {source}")]
    Solver { stage: Stage, source: SolverError },
    #[error("{stage} stage finished with status {status:?}")]
    NotOptimal { stage: Stage, status: SolveStatus },
    #[error("invalid scenario input: {0}")]
    Input(String),
}

impl ScenarioError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            ScenarioError::Solver { stage, .. } | ScenarioError::NotOptimal { stage, .. } => {
                Some(*stage)
            }
            ScenarioError::Input(_) => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("nothing to write: {0}")]
    Empty(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
