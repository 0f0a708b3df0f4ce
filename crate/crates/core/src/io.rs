//! JSON file formats for economies, oligarchs and plans.
//!
//! Matrices are stored as 1-based `[row, col, value]` triplets of the nonzero
//! entries. Floats are written in shortest round-trip form.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::economy::{Economy, GoodIndex, OligarchSpec, ProductionPlan};
use crate::error::IoError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomyFile {
    pub n_raw: usize,
    pub n_goods: usize,
    pub alpha: Vec<f64>,
    pub prices: Vec<f64>,
    pub beta: Vec<(usize, usize, f64)>,
}

impl From<&Economy> for EconomyFile {
    fn from(e: &Economy) -> Self {
        Self {
            n_raw: e.n_raw(),
            n_goods: e.n_goods(),
            alpha: e.alpha().to_vec(),
            prices: e.prices().to_vec(),
            beta: triplets(e.beta()),
        }
    }
}

impl TryFrom<EconomyFile> for Economy {
    type Error = crate::error::ModelError;

    fn try_from(f: EconomyFile) -> Result<Self, Self::Error> {
        Economy::from_triplets(f.n_raw, f.n_goods, &f.beta, f.alpha, f.prices)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OligarchFile {
    pub members: Vec<GoodIndex>,
}

impl From<&OligarchSpec> for OligarchFile {
    fn from(o: &OligarchSpec) -> Self {
        Self { members: o.members().to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub n_goods: usize,
    pub flows: Vec<(usize, usize, f64)>,
    pub outputs: Vec<f64>,
}

impl From<&ProductionPlan> for PlanFile {
    fn from(p: &ProductionPlan) -> Self {
        Self { n_goods: p.n_goods(), flows: triplets(p.flows()), outputs: p.outputs().to_vec() }
    }
}

impl PlanFile {
    /// Rebuilds the flow matrix; outputs are recomputed from the economy.
    pub fn to_plan(&self, economy: &Economy) -> Result<ProductionPlan, IoError> {
        let flows = dense(self.n_goods, &self.flows).map_err(|message| IoError::Format {
            path: Default::default(),
            message,
        })?;
        Ok(ProductionPlan::from_flows(economy, flows)?)
    }
}

pub fn triplets(m: &DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            if v != 0.0 {
                out.push((r + 1, c + 1, v));
            }
        }
    }
    out
}

pub fn dense(n: usize, entries: &[(usize, usize, f64)]) -> Result<DMatrix<f64>, String> {
    let mut m = DMatrix::zeros(n, n);
    for &(r, c, v) in entries {
        if r == 0 || c == 0 || r > n || c > n {
            return Err(format!("entry ({r}, {c}) outside 1..={n}"));
        }
        m[(r - 1, c - 1)] = v;
    }
    Ok(m)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.into(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| IoError::Json { path: path.into(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| IoError::Io { path: path.into(), source })
}

pub fn read_economy(path: &Path) -> Result<Economy, IoError> {
    let file: EconomyFile = read_json(path)?;
    Economy::try_from(file).map_err(|e| IoError::Format { path: path.into(), message: e.to_string() })
}

pub fn write_economy(path: &Path, economy: &Economy) -> Result<(), IoError> {
    write_json(path, &EconomyFile::from(economy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::e8;
    use proptest::prelude::*;

    #[test]
    fn economy_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e8.json");
        write_economy(&path, &e8()).unwrap();
        assert_eq!(read_economy(&path).unwrap(), e8());
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"n_raw\": 2"));
    }

    #[test]
    fn bad_index_is_format_error() {
        let f = EconomyFile { n_raw: 1, n_goods: 2, alpha: vec![1.0; 2], prices: vec![1.0; 2], beta: vec![(0, 2, 0.5)] };
        assert!(Economy::try_from(f).is_err());
        let o: Result<OligarchFile, _> = serde_json::from_str(r#"{"members":[0]}"#);
        assert!(o.is_err());
    }

    proptest! {
        #[test]
        fn plan_values_survive_json(values in proptest::collection::vec(1e-9f64..1e6, 12)) {
            let e = e8();
            let mut x = DMatrix::zeros(8, 8);
            for (v, (k, m, _)) in values.iter().zip(e.edges()) {
                x[(k, m)] = *v;
            }
            let plan = ProductionPlan::from_flows(&e, x).unwrap();
            let text = serde_json::to_string(&PlanFile::from(&plan)).unwrap();
            let back: PlanFile = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.to_plan(&e).unwrap(), plan);
        }
    }
}
