//! Production output, value added and GDP of a plan.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::economy::{member_mask, Economy, GoodIndex, ProductionPlan};
use crate::error::ModelError;

/// Cobb-Douglas output of company `m` under `flows`.
///
/// Factors with a zero coefficient are skipped rather than evaluated as
/// `0^0`, so an input-free company produces exactly its technology level.
pub fn production_output(
    economy: &Economy,
    flows: &DMatrix<f64>,
    m: GoodIndex,
) -> Result<f64, ModelError> {
    let m = economy.company(m)?;
    if flows.nrows() != economy.n_goods() || flows.ncols() != economy.n_goods() {
        return Err(ModelError::Shape("flow matrix does not match economy".into()));
    }
    output_at(economy, flows, m)
}

pub(crate) fn output_at(economy: &Economy, flows: &DMatrix<f64>, m: usize) -> Result<f64, ModelError> {
    let mut y = economy.alpha()[m];
    for k in 0..economy.n_goods() {
        let x = flows[(k, m)];
        if x < 0.0 {
            return Err(ModelError::NegativeFlow { supplier: k + 1, consumer: m + 1, value: x });
        }
        let b = economy.coefficient(k, m);
        if b != 0.0 {
            y *= x.powf(b);
        }
    }
    Ok(y)
}

/// Value added of company `m`: output value minus the value of its inputs.
pub fn value_added(economy: &Economy, plan: &ProductionPlan, m: GoodIndex) -> Result<f64, ModelError> {
    let m = economy.company(m)?;
    check_plan(economy, plan)?;
    Ok(value_added_at(economy, plan, m))
}

pub(crate) fn value_added_at(economy: &Economy, plan: &ProductionPlan, m: usize) -> f64 {
    let v = economy.prices();
    let cost: f64 = (0..economy.n_goods()).map(|k| v[k] * plan.flow(k, m)).sum();
    plan.outputs()[m] * v[m] - cost
}

fn check_plan(economy: &Economy, plan: &ProductionPlan) -> Result<(), ModelError> {
    if plan.n_goods() != economy.n_goods() {
        return Err(ModelError::Shape(format!(
            "plan has {} goods, economy has {}",
            plan.n_goods(),
            economy.n_goods()
        )));
    }
    Ok(())
}

/// Per-company value added, GDP and (optionally) an oligarch's share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueReport {
    /// Indexed over all goods; raw entries are 0.
    pub per_company_value_added: Vec<f64>,
    pub total: f64,
    pub oligarch_total: Option<f64>,
}

/// GDP of a plan, accumulated over companies in ascending index order.
pub fn total_value_added(
    economy: &Economy,
    plan: &ProductionPlan,
    oligarch: Option<&[GoodIndex]>,
) -> Result<ValueReport, ModelError> {
    check_plan(economy, plan)?;
    let mut per_company = vec![0.0; economy.n_goods()];
    let mut total = 0.0;
    for m in economy.companies() {
        let rho = value_added_at(economy, plan, m);
        per_company[m] = rho;
        total += rho;
    }
    let oligarch_total = oligarch.map(|members| {
        let mask = member_mask(members, economy.n_goods());
        economy.companies().filter(|&m| mask[m]).map(|m| per_company[m]).sum()
    });
    Ok(ValueReport { per_company_value_added: per_company, total, oligarch_total })
}

/// Sum of value added over a zero-based company mask.
pub(crate) fn value_over(economy: &Economy, plan: &ProductionPlan, mask: &[bool]) -> f64 {
    economy
        .companies()
        .filter(|&m| mask[m])
        .map(|m| value_added_at(economy, plan, m))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{e8, E8_OPTIMAL_FLOWS};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn idx(k: usize) -> GoodIndex {
        GoodIndex::new(k).unwrap()
    }

    fn one_input(v_m: f64) -> Economy {
        Economy::from_triplets(1, 2, &[(1, 2, 0.5)], vec![1.0, 1.0], vec![1.0, v_m]).unwrap()
    }

    fn e8_published_plan() -> ProductionPlan {
        let e = e8();
        let mut x = DMatrix::zeros(8, 8);
        for &(k, m, f) in &E8_OPTIMAL_FLOWS {
            x[(k - 1, m - 1)] = f;
        }
        ProductionPlan::from_flows(&e, x).unwrap()
    }

    #[test]
    fn empty_product_is_alpha() {
        let e = Economy::from_triplets(1, 2, &[], vec![1.0, 1.3], vec![1.0, 2.0]).unwrap();
        let x = DMatrix::zeros(2, 2);
        assert_eq!(production_output(&e, &x, idx(2)).unwrap(), 1.3);
        let plan = ProductionPlan::from_flows(&e, x).unwrap();
        assert_relative_eq!(value_added(&e, &plan, idx(2)).unwrap(), 2.6, epsilon = 1e-12);
    }

    #[test]
    fn square_root_input() {
        let e = one_input(4.0);
        let mut x = DMatrix::zeros(2, 2);
        x[(0, 1)] = 4.0;
        assert_relative_eq!(production_output(&e, &x, idx(2)).unwrap(), 2.0, epsilon = 1e-12);
        let plan = ProductionPlan::from_flows(&e, x).unwrap();
        assert_relative_eq!(value_added(&e, &plan, idx(2)).unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn negative_flow_is_domain_error() {
        let e = one_input(4.0);
        let mut x = DMatrix::zeros(2, 2);
        x[(0, 1)] = -1.0;
        assert!(matches!(
            production_output(&e, &x, idx(2)),
            Err(ModelError::NegativeFlow { supplier: 1, consumer: 2, .. })
        ));
        assert!(matches!(production_output(&e, &x, idx(1)), Err(ModelError::NotACompany(1))));
    }

    #[test]
    fn zero_plan_leaves_only_input_free_output() {
        // company 2 has no inputs, company 3 uses the raw good
        let e = Economy::from_triplets(1, 3, &[(1, 3, 0.5)], vec![1.0, 2.0, 3.0], vec![1.0, 1.5, 2.0]).unwrap();
        let report = total_value_added(&e, &ProductionPlan::zero(&e), None).unwrap();
        assert_eq!(report.per_company_value_added, vec![0.0, 3.0, 0.0]);
        assert_eq!(report.total, 3.0);
        let all_zero = total_value_added(&e8(), &ProductionPlan::zero(&e8()), None).unwrap();
        assert_eq!(all_zero.total, 0.0);
    }

    #[test]
    fn e8_published_plan_values() {
        let e = e8();
        let plan = e8_published_plan();
        // company 3 consumes both raws at beta 0.4
        let y3 = 4.0 * 298.4f64.powf(0.4) * 328.3f64.powf(0.4);
        assert_relative_eq!(plan.outputs()[2], y3, max_relative = 1e-12);
        let report = total_value_added(&e, &plan, Some(&[idx(3), idx(4), idx(7)])).unwrap();
        assert!((report.total - 704.65).abs() / 704.65 < 1e-3, "{}", report.total);
        let oligarch = report.oligarch_total.unwrap();
        assert!((oligarch - 640.83).abs() / 640.83 < 1e-3, "{oligarch}");
        let summed: f64 = e.companies().map(|m| value_added(&e, &plan, idx(m + 1)).unwrap()).sum();
        assert_eq!(report.total, summed);
    }

    proptest! {
        #[test]
        fn output_is_independent_of_factor_order(
            flows in proptest::collection::vec(0.01f64..1000.0, 12)
        ) {
            let e = e8();
            let mut x = DMatrix::zeros(8, 8);
            for (f, &(k, m, _)) in flows.iter().zip(&E8_OPTIMAL_FLOWS) {
                x[(k - 1, m - 1)] = *f;
            }
            for m in e.companies() {
                let forward = production_output(&e, &x, idx(m + 1)).unwrap();
                let mut reversed = e.alpha()[m];
                for k in (0..8).rev() {
                    let b = e.coefficient(k, m);
                    if b > 0.0 {
                        reversed *= x[(k, m)].powf(b);
                    }
                }
                prop_assert!((forward - reversed).abs() <= 1e-12 * forward.abs());
            }
        }

        #[test]
        fn value_is_linear_in_prices(
            flows in proptest::collection::vec(0.01f64..1000.0, 12),
            c in 0.01f64..100.0,
        ) {
            let e = e8();
            let scaled = e.with_scaled_prices(c);
            let mut x = DMatrix::zeros(8, 8);
            for (f, &(k, m, _)) in flows.iter().zip(&E8_OPTIMAL_FLOWS) {
                x[(k - 1, m - 1)] = *f;
            }
            let plan = ProductionPlan::from_flows(&e, x).unwrap();
            let members = [idx(3), idx(4), idx(7)];
            let a = total_value_added(&e, &plan, Some(&members)).unwrap();
            let b = total_value_added(&scaled, &plan, Some(&members)).unwrap();
            let tol = |v: f64| 1e-9 * (1.0 + v.abs());
            prop_assert!((b.total - c * a.total).abs() <= tol(c * a.total));
            let (ao, bo) = (a.oligarch_total.unwrap(), b.oligarch_total.unwrap());
            prop_assert!((bo - c * ao).abs() <= tol(c * ao));
            for m in e.companies() {
                let (ra, rb) = (a.per_company_value_added[m], b.per_company_value_added[m]);
                prop_assert!((rb - c * ra).abs() <= tol(c * ra));
            }
        }
    }
}
