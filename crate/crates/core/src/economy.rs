//! Domain types for production-chain economies.
//!
//! Goods are addressed by [`GoodIndex`], a 1-based index. The first `n_raw`
//! goods are raw resources harvested at a fixed price; the remaining goods are
//! each manufactured by exactly one company. Indices are topologically sorted,
//! so the production coefficient matrix is strictly upper triangular.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// 1-based index of a good (and of the company producing it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct GoodIndex(usize);

impl GoodIndex {
    /// Builds an index from its 1-based value. Returns `None` for 0.
    pub fn new(one_based: usize) -> Option<Self> {
        (one_based >= 1).then_some(Self(one_based))
    }

    pub fn from_zero_based(k: usize) -> Self {
        Self(k + 1)
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn zero_based(self) -> usize {
        self.0 - 1
    }
}

impl TryFrom<usize> for GoodIndex {
    type Error = String;

    fn try_from(value: usize) -> Result<Self, Self::Error> {
        Self::new(value).ok_or_else(|| "good indices are 1-based".to_string())
    }
}

impl From<GoodIndex> for usize {
    fn from(value: GoodIndex) -> usize {
        value.0
    }
}

impl fmt::Display for GoodIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Immutable description of a production chain.
///
/// Construction only checks shapes. Structural assumptions (triangularity,
/// decreasing returns, positivity) are reported by
/// [`validate_economy`](crate::validate::validate_economy).
#[derive(Debug, Clone, PartialEq)]
pub struct Economy {
    n_raw: usize,
    beta: DMatrix<f64>,
    alpha: Vec<f64>,
    prices: Vec<f64>,
}

impl Economy {
    pub fn new(
        n_raw: usize,
        beta: DMatrix<f64>,
        alpha: Vec<f64>,
        prices: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let n = beta.nrows();
        if beta.ncols() != n {
            return Err(ModelError::Shape(format!(
                "beta must be square, got {}x{}",
                beta.nrows(),
                beta.ncols()
            )));
        }
        if alpha.len() != n || prices.len() != n {
            return Err(ModelError::Shape(format!(
                "alpha ({}) and prices ({}) must have one entry per good ({n})",
                alpha.len(),
                prices.len()
            )));
        }
        if n_raw > n {
            return Err(ModelError::Shape(format!(
                "n_raw = {n_raw} exceeds the number of goods {n}"
            )));
        }
        if beta.iter().chain(&alpha).chain(&prices).any(|v| !v.is_finite()) {
            return Err(ModelError::Shape("non-finite parameter".into()));
        }
        Ok(Self { n_raw, beta, alpha, prices })
    }

    /// Builds an economy from 1-based `(row, col, value)` triplets.
    pub fn from_triplets(
        n_raw: usize,
        n_goods: usize,
        triplets: &[(usize, usize, f64)],
        alpha: Vec<f64>,
        prices: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let mut beta = DMatrix::zeros(n_goods, n_goods);
        for &(row, col, value) in triplets {
            if row == 0 || col == 0 || row > n_goods || col > n_goods {
                return Err(ModelError::Shape(format!(
                    "beta entry ({row}, {col}) outside 1..={n_goods}"
                )));
            }
            beta[(row - 1, col - 1)] = value;
        }
        Self::new(n_raw, beta, alpha, prices)
    }

    pub fn n_raw(&self) -> usize {
        self.n_raw
    }

    pub fn n_goods(&self) -> usize {
        self.beta.nrows()
    }

    pub fn n_companies(&self) -> usize {
        self.n_goods() - self.n_raw
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// Zero-based coefficient lookup.
    pub fn coefficient(&self, supplier: usize, consumer: usize) -> f64 {
        self.beta[(supplier, consumer)]
    }

    pub fn is_raw(&self, k: usize) -> bool {
        k < self.n_raw
    }

    /// Zero-based company indices in ascending order.
    pub fn companies(&self) -> std::ops::Range<usize> {
        self.n_raw..self.n_goods()
    }

    /// Zero-based `(supplier, consumer, beta)` for every positive coefficient,
    /// in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_goods();
        let mut out = Vec::new();
        for k in 0..n {
            for m in 0..n {
                let b = self.beta[(k, m)];
                if b > 0.0 {
                    out.push((k, m, b));
                }
            }
        }
        out
    }

    /// Zero-based suppliers of good `m` with their coefficients.
    pub fn inputs(&self, m: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n_goods()).filter_map(move |k| {
            let b = self.beta[(k, m)];
            (b > 0.0).then_some((k, b))
        })
    }

    /// Zero-based consumers of good `k` with their coefficients.
    pub fn consumers(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n_goods()).filter_map(move |m| {
            let b = self.beta[(k, m)];
            (b > 0.0).then_some((m, b))
        })
    }

    /// Returns a copy with every price multiplied by `factor`.
    pub fn with_scaled_prices(&self, factor: f64) -> Self {
        Self {
            prices: self.prices.iter().map(|p| p * factor).collect(),
            ..self.clone()
        }
    }

    /// Checks that `m` is a company index and returns it zero-based.
    pub fn company(&self, m: GoodIndex) -> Result<usize, ModelError> {
        let k = m.zero_based();
        if k >= self.n_goods() {
            return Err(ModelError::IndexOutOfRange { index: m.get(), n_goods: self.n_goods() });
        }
        if self.is_raw(k) {
            return Err(ModelError::NotACompany(m.get()));
        }
        Ok(k)
    }
}

/// A flow matrix together with the outputs it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductionPlan {
    flows: DMatrix<f64>,
    outputs: Vec<f64>,
}

impl ProductionPlan {
    /// Builds a plan from flows, deriving each company's output from the
    /// production function.
    pub fn from_flows(economy: &Economy, flows: DMatrix<f64>) -> Result<Self, ModelError> {
        let n = economy.n_goods();
        if flows.nrows() != n || flows.ncols() != n {
            return Err(ModelError::Shape(format!(
                "flow matrix is {}x{}, economy has {n} goods",
                flows.nrows(),
                flows.ncols()
            )));
        }
        let mut outputs = vec![0.0; n];
        for m in economy.companies() {
            outputs[m] = crate::value::output_at(economy, &flows, m)?;
        }
        Ok(Self { flows, outputs })
    }

    /// The plan with every flow at zero.
    pub fn zero(economy: &Economy) -> Self {
        let n = economy.n_goods();
        Self::from_flows(economy, DMatrix::zeros(n, n)).expect("zero flows are valid")
    }

    pub fn flows(&self) -> &DMatrix<f64> {
        &self.flows
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn n_goods(&self) -> usize {
        self.outputs.len()
    }

    /// Zero-based flow lookup.
    pub fn flow(&self, supplier: usize, consumer: usize) -> f64 {
        self.flows[(supplier, consumer)]
    }

    /// Total shipped out of good `k`.
    pub fn outflow(&self, k: usize) -> f64 {
        self.flows.row(k).iter().sum()
    }

    /// Output minus total outflow for every company; negative means the plan
    /// ships more than it produces.
    pub fn balance_slack(&self, economy: &Economy) -> Vec<f64> {
        economy
            .companies()
            .map(|m| self.outputs[m] - self.outflow(m))
            .collect()
    }
}

/// A set of companies controlled by one oligarch, with its depth in the
/// production chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OligarchSpec {
    members: Vec<GoodIndex>,
    depth: usize,
}

impl OligarchSpec {
    /// Validates membership and consistency and derives the depth.
    pub fn new(economy: &Economy, members: &[GoodIndex]) -> Result<Self, ModelError> {
        if members.is_empty() {
            return Err(ModelError::InvalidOligarch("member set is empty".into()));
        }
        let mut sorted: Vec<GoodIndex> = members.to_vec();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != members.len() {
            return Err(ModelError::InvalidOligarch("duplicate members".into()));
        }
        for &m in &sorted {
            economy.company(m)?;
        }
        let zero: Vec<usize> = sorted.iter().map(|m| m.zero_based()).collect();
        if !crate::graph::is_consistent(economy, &zero) {
            return Err(ModelError::InvalidOligarch(
                "members do not form a connected part of the production chain".into(),
            ));
        }
        let depth = crate::graph::oligarch_depth(economy, &sorted)?;
        Ok(Self { members: sorted, depth })
    }

    /// Sorted member indices.
    pub fn members(&self) -> &[GoodIndex] {
        &self.members
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, m: GoodIndex) -> bool {
        self.members.binary_search(&m).is_ok()
    }

    /// Membership mask over all goods, zero-based.
    pub fn mask(&self, n_goods: usize) -> Vec<bool> {
        member_mask(&self.members, n_goods)
    }
}

pub(crate) fn member_mask(members: &[GoodIndex], n_goods: usize) -> Vec<bool> {
    let mut mask = vec![false; n_goods];
    for m in members {
        if m.zero_based() < n_goods {
            mask[m.zero_based()] = true;
        }
    }
    mask
}
