//! Structural checks on an economy.

use std::fmt;

use serde::Serialize;

use crate::economy::Economy;
use crate::graph;

/// One violated structural assumption. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NotUpperTriangular { row: usize, col: usize, value: f64 },
    RawColumnNonzero { row: usize, col: usize, value: f64 },
    CoefficientOutOfRange { row: usize, col: usize, value: f64 },
    ReturnsNotDecreasing { company: usize, sum: f64 },
    CycleFound,
    NonPositiveAlpha { good: usize, value: f64 },
    NonPositivePrice { good: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotUpperTriangular { row, col, value } => {
                write!(f, "not upper triangular: beta[{row},{col}] = {value}")
            }
            Violation::RawColumnNonzero { row, col, value } => {
                write!(f, "raw column nonzero: beta[{row},{col}] = {value}")
            }
            Violation::CoefficientOutOfRange { row, col, value } => {
                write!(f, "coefficient outside [0, 1): beta[{row},{col}] = {value}")
            }
            Violation::ReturnsNotDecreasing { company, sum } => {
                write!(f, "returns to scale not decreasing: company {company} has sum {sum}")
            }
            Violation::CycleFound => f.write_str("production graph has a cycle"),
            Violation::NonPositiveAlpha { good, value } => {
                write!(f, "non-positive technology level alpha[{good}] = {value}")
            }
            Violation::NonPositivePrice { good, value } => {
                write!(f, "non-positive price v[{good}] = {value}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("OK");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Collects every violated structural assumption; never stops at the first.
pub fn validate_economy(economy: &Economy) -> ValidationReport {
    let mut violations = Vec::new();
    let n = economy.n_goods();
    let beta = economy.beta();
    for k in 0..n {
        for m in 0..n {
            let value = beta[(k, m)];
            if value == 0.0 {
                continue;
            }
            let (row, col) = (k + 1, m + 1);
            if !(0.0..1.0).contains(&value) {
                violations.push(Violation::CoefficientOutOfRange { row, col, value });
            }
            if m <= k {
                violations.push(Violation::NotUpperTriangular { row, col, value });
            }
            if economy.is_raw(m) {
                violations.push(Violation::RawColumnNonzero { row, col, value });
            }
        }
    }
    for m in economy.companies() {
        let sum: f64 = beta.column(m).iter().sum();
        if sum >= 1.0 {
            violations.push(Violation::ReturnsNotDecreasing { company: m + 1, sum });
        }
    }
    if !graph::is_acyclic(economy) {
        violations.push(Violation::CycleFound);
    }
    for (k, &value) in economy.alpha().iter().enumerate() {
        if value <= 0.0 {
            violations.push(Violation::NonPositiveAlpha { good: k + 1, value });
        }
    }
    for (k, &value) in economy.prices().iter().enumerate() {
        if value <= 0.0 {
            violations.push(Violation::NonPositivePrice { good: k + 1, value });
        }
    }
    ValidationReport { violations }
}
