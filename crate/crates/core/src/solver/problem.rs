//! Formulation of the three planning problems over the positive-coefficient
//! flows.
//!
//! Decision variables are flows `x[k, m]` on production edges; every other
//! flow is held at a fixed value (zero where there is no edge). Outputs are
//! never free variables: they are the production function of the inputs.
//! All problems have the shape
//!
//! ```text
//!   maximize  f(z)   subject to  g_i(z) >= 0,  z_j >= floor
//! ```
//!
//! with `f` and every `g_i` concave.

use nalgebra::{DMatrix, DVector};

use crate::economy::{member_mask, Economy, GoodIndex, ProductionPlan};
use crate::error::{ModelError, SolverError};

use super::{CaptureContext, Multipliers, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// Maximize GDP subject to balance constraints.
    GlobalOptimum,
    /// Maximize the oligarch's value added over flows into its companies.
    OligarchProfit,
    /// Maximize non-oligarch value added while guaranteeing the oligarch's profit.
    Adaptation,
}

#[derive(Debug, Clone, Copy)]
enum Source {
    Var(usize),
    Fixed(f64),
}

#[derive(Debug, Clone)]
struct Factor {
    supplier: usize,
    beta: f64,
    source: Source,
}

/// A concave constraint `g(z) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `y_company(z) - sum(z[outflows]) - fixed_outflow >= 0`
    Balance { company: usize, outflows: Vec<usize>, fixed_outflow: f64 },
    /// `cap - sum(z[outflows]) >= 0`
    Cap { supplier: usize, outflows: Vec<usize>, cap: f64 },
    /// `sum of value added over companies - floor >= 0`
    ValueFloor { companies: Vec<usize>, floor: f64 },
}

#[derive(Debug, Clone)]
pub struct Problem<'a> {
    economy: &'a Economy,
    kind: ProblemKind,
    variables: Vec<(usize, usize)>,
    fixed: DMatrix<f64>,
    factors: Vec<Vec<Factor>>,
    objective: Vec<usize>,
    /// Companies entering the objective with the small weight `secondary_weight`.
    secondary: Vec<usize>,
    secondary_weight: f64,
    constraints: Vec<Constraint>,
    floor: f64,
}

impl<'a> Problem<'a> {
    fn build(
        economy: &'a Economy,
        kind: ProblemKind,
        is_variable: impl Fn(usize, usize) -> bool,
        fixed: DMatrix<f64>,
        objective: Vec<usize>,
        floor: f64,
    ) -> Self {
        let n = economy.n_goods();
        let mut variables = Vec::new();
        let mut factors = vec![Vec::new(); n];
        for (k, m, beta) in economy.edges() {
            let source = if is_variable(k, m) {
                variables.push((k, m));
                Source::Var(variables.len() - 1)
            } else {
                Source::Fixed(fixed[(k, m)])
            };
            factors[m].push(Factor { supplier: k, beta, source });
        }
        Self { economy, kind, variables, fixed, factors, objective, secondary: Vec::new(), secondary_weight: 0.0, constraints: Vec::new(), floor }
    }

    fn var_outflows(&self, k: usize, into: impl Fn(usize) -> bool) -> Vec<usize> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, &(s, m))| s == k && into(m))
            .map(|(i, _)| i)
            .collect()
    }

    fn add_full_balance(&mut self) {
        for m in self.economy.companies() {
            let outflows = self.var_outflows(m, |_| true);
            if outflows.is_empty() {
                continue;
            }
            let fixed_outflow: f64 = self
                .economy
                .consumers(m)
                .filter(|&(c, _)| !self.variables.contains(&(m, c)))
                .map(|(c, _)| self.fixed[(m, c)])
                .sum();
            self.constraints.push(Constraint::Balance { company: m, outflows, fixed_outflow });
        }
    }

    /// GDP maximization with every edge free.
    pub fn global(economy: &'a Economy, settings: &SolverSettings) -> Self {
        let n = economy.n_goods();
        let mut p = Self::build(
            economy,
            ProblemKind::GlobalOptimum,
            |_, _| true,
            DMatrix::zeros(n, n),
            economy.companies().collect(),
            settings.epsilon,
        );
        p.add_full_balance();
        p
    }

    /// Oligarch profit maximization: only flows into member companies move;
    /// all other flows stay at the baseline plan.
    pub fn oligarch_stage(
        economy: &'a Economy,
        ctx: &CaptureContext<'_>,
        settings: &SolverSettings,
    ) -> Self {
        let n = economy.n_goods();
        let inside = ctx.oligarch.mask(n);
        let baseline = &ctx.baseline.plan;
        let mut p = Self::build(
            economy,
            ProblemKind::OligarchProfit,
            |_, m| inside[m],
            baseline.flows().clone(),
            economy.companies().filter(|&m| inside[m]).collect(),
            settings.epsilon,
        );
        for k in economy.companies() {
            let outflows = p.var_outflows(k, |m| inside[m]);
            if outflows.is_empty() {
                continue;
            }
            if inside[k] {
                p.constraints.push(Constraint::Balance { company: k, outflows, fixed_outflow: 0.0 });
            } else {
                let cap = capture_cap(ctx, &inside, k);
                p.constraints.push(Constraint::Cap { supplier: k, outflows, cap });
            }
        }
        p
    }

    /// Re-adaptation of the whole economy around a guaranteed oligarch profit.
    /// `capture` additionally keeps the capture caps on flows into members.
    pub fn adaptation(
        economy: &'a Economy,
        members: &[GoodIndex],
        profit_floor: f64,
        capture: Option<&CaptureContext<'_>>,
        settings: &SolverSettings,
    ) -> Self {
        let n = economy.n_goods();
        let inside = member_mask(members, n);
        let mut p = Self::build(
            economy,
            ProblemKind::Adaptation,
            |_, _| true,
            DMatrix::zeros(n, n),
            economy.companies().filter(|&m| !inside[m]).collect(),
            settings.epsilon,
        );
        p.add_full_balance();
        if let Some(ctx) = capture {
            for k in economy.companies().filter(|&k| !inside[k]) {
                let outflows = p.var_outflows(k, |m| inside[m]);
                if !outflows.is_empty() {
                    let cap = capture_cap(ctx, &inside, k);
                    p.constraints.push(Constraint::Cap { supplier: k, outflows, cap });
                }
            }
        }
        p.constraints.push(Constraint::ValueFloor {
            companies: economy.companies().filter(|&m| inside[m]).collect(),
            floor: profit_floor,
        });
        p
    }

    /// Same variables and balance/cap constraints, maximizing the value of
    /// the companies guarded by the value floor, with the floor removed.
    ///
    /// The former objective stays in with the small weight `weight`: on its
    /// own the guarded value ignores flows into the other companies, and the
    /// barrier would push raw inputs there without bound.
    pub(crate) fn floor_phase(&self, weight: f64) -> Option<(Self, f64)> {
        let idx = self.constraints.iter().position(|c| matches!(c, Constraint::ValueFloor { .. }))?;
        let mut p = self.clone();
        let Constraint::ValueFloor { companies, floor } = p.constraints.remove(idx) else {
            unreachable!()
        };
        p.secondary = std::mem::replace(&mut p.objective, companies);
        p.secondary_weight = weight;
        Some((p, floor))
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn economy(&self) -> &Economy {
        self.economy
    }

    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    /// Zero-based `(supplier, consumer)` of each variable.
    pub fn variables(&self) -> &[(usize, usize)] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Companies whose value added forms the objective.
    pub fn objective_companies(&self) -> &[usize] {
        &self.objective
    }

    fn flow(&self, z: &DVector<f64>, f: &Factor) -> f64 {
        match f.source {
            Source::Var(i) => z[i],
            Source::Fixed(v) => v,
        }
    }

    /// Output of company `m` at `z` (fixed inputs included).
    pub fn output(&self, z: &DVector<f64>, m: usize) -> f64 {
        self.factors[m]
            .iter()
            .fold(self.economy.alpha()[m], |y, f| y * self.flow(z, f).powf(f.beta))
    }

    fn outputs(&self, z: &DVector<f64>) -> Vec<f64> {
        let mut y = vec![0.0; self.economy.n_goods()];
        for m in self.economy.companies() {
            y[m] = self.output(z, m);
        }
        y
    }

    fn value(&self, z: &DVector<f64>, ys: &[f64], companies: &[usize]) -> f64 {
        let v = self.economy.prices();
        companies
            .iter()
            .map(|&m| {
                let cost: f64 = self.factors[m].iter().map(|f| v[f.supplier] * self.flow(z, f)).sum();
                v[m] * ys[m] - cost
            })
            .sum()
    }

    fn add_output_gradient(&self, z: &DVector<f64>, y: f64, m: usize, scale: f64, g: &mut DVector<f64>) {
        for f in &self.factors[m] {
            if let Source::Var(i) = f.source {
                g[i] += scale * f.beta * y / z[i];
            }
        }
    }

    fn add_output_hessian(&self, z: &DVector<f64>, y: f64, m: usize, scale: f64, h: &mut DMatrix<f64>) {
        for a in &self.factors[m] {
            let Source::Var(i) = a.source else { continue };
            for b in &self.factors[m] {
                let Source::Var(j) = b.source else { continue };
                let mut entry = a.beta * b.beta * y / (z[i] * z[j]);
                if i == j {
                    entry -= a.beta * y / (z[i] * z[i]);
                }
                h[(i, j)] += scale * entry;
            }
        }
    }

    fn value_gradient(&self, z: &DVector<f64>, ys: &[f64], companies: &[usize], g: &mut DVector<f64>, scale: f64) {
        let v = self.economy.prices();
        for &m in companies {
            self.add_output_gradient(z, ys[m], m, scale * v[m], g);
            for f in &self.factors[m] {
                if let Source::Var(i) = f.source {
                    g[i] -= scale * v[f.supplier];
                }
            }
        }
    }

    fn value_hessian(&self, z: &DVector<f64>, ys: &[f64], companies: &[usize], h: &mut DMatrix<f64>, scale: f64) {
        let v = self.economy.prices();
        for &m in companies {
            self.add_output_hessian(z, ys[m], m, scale * v[m], h);
        }
    }

    fn objective_with(&self, z: &DVector<f64>, ys: &[f64]) -> f64 {
        let f = self.value(z, ys, &self.objective);
        if self.secondary.is_empty() {
            f
        } else {
            f + self.secondary_weight * self.value(z, ys, &self.secondary)
        }
    }

    fn add_objective_derivatives(
        &self,
        z: &DVector<f64>,
        ys: &[f64],
        scale: f64,
        g: &mut DVector<f64>,
        h: Option<&mut DMatrix<f64>>,
    ) {
        self.value_gradient(z, ys, &self.objective, g, scale);
        self.value_gradient(z, ys, &self.secondary, g, scale * self.secondary_weight);
        if let Some(h) = h {
            self.value_hessian(z, ys, &self.objective, h, scale);
            self.value_hessian(z, ys, &self.secondary, h, scale * self.secondary_weight);
        }
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        self.objective_with(z, &self.outputs(z))
    }

    /// Value added of the primary objective companies only.
    pub(crate) fn primary_objective(&self, z: &DVector<f64>) -> f64 {
        self.value(z, &self.outputs(z), &self.objective)
    }

    pub fn objective_gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.n_variables());
        self.add_objective_derivatives(z, &self.outputs(z), 1.0, &mut g, None);
        g
    }

    pub fn objective_hessian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n_variables();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        self.add_objective_derivatives(z, &self.outputs(z), 1.0, &mut g, Some(&mut h));
        h
    }

    fn constraint_value_with(&self, c: &Constraint, z: &DVector<f64>, ys: &[f64]) -> f64 {
        match c {
            Constraint::Balance { company, outflows, fixed_outflow } => {
                ys[*company] - outflows.iter().map(|&i| z[i]).sum::<f64>() - fixed_outflow
            }
            Constraint::Cap { outflows, cap, .. } => cap - outflows.iter().map(|&i| z[i]).sum::<f64>(),
            Constraint::ValueFloor { companies, floor } => self.value(z, ys, companies) - floor,
        }
    }

    pub fn constraint_values(&self, z: &DVector<f64>) -> Vec<f64> {
        let ys = self.outputs(z);
        self.constraints.iter().map(|c| self.constraint_value_with(c, z, &ys)).collect()
    }

    fn add_constraint_gradient(&self, c: &Constraint, z: &DVector<f64>, ys: &[f64], scale: f64, g: &mut DVector<f64>) {
        match c {
            Constraint::Balance { company, outflows, .. } => {
                self.add_output_gradient(z, ys[*company], *company, scale, g);
                for &i in outflows {
                    g[i] -= scale;
                }
            }
            Constraint::Cap { outflows, .. } => {
                for &i in outflows {
                    g[i] -= scale;
                }
            }
            Constraint::ValueFloor { companies, .. } => self.value_gradient(z, ys, companies, g, scale),
        }
    }

    fn add_constraint_hessian(&self, c: &Constraint, z: &DVector<f64>, ys: &[f64], scale: f64, h: &mut DMatrix<f64>) {
        match c {
            Constraint::Balance { company, .. } => self.add_output_hessian(z, ys[*company], *company, scale, h),
            Constraint::Cap { .. } => {}
            Constraint::ValueFloor { companies, .. } => self.value_hessian(z, ys, companies, h, scale),
        }
    }

    pub fn constraint_gradient(&self, index: usize, z: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.n_variables());
        self.add_constraint_gradient(&self.constraints[index], z, &self.outputs(z), 1.0, &mut g);
        g
    }

    pub fn constraint_hessian(&self, index: usize, z: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n_variables();
        let mut h = DMatrix::zeros(n, n);
        self.add_constraint_hessian(&self.constraints[index], z, &self.outputs(z), 1.0, &mut h);
        h
    }

    /// Constraint values followed by the distances of the variables to their floor.
    pub(crate) fn slacks(&self, z: &DVector<f64>) -> Vec<f64> {
        let mut s = self.constraint_values(z);
        s.extend(z.iter().map(|x| x - self.floor));
        s
    }

    /// Whether every constraint and every bound holds strictly.
    pub fn is_strictly_feasible(&self, z: &DVector<f64>) -> bool {
        z.iter().all(|&x| x > self.floor) && self.constraint_values(z).iter().all(|&g| g > 0.0)
    }

    /// Barrier objective `t f + sum ln g_i + sum ln(z_j - floor)`, or `None`
    /// outside the strict interior.
    pub(crate) fn barrier_value(&self, z: &DVector<f64>, t: f64) -> Option<f64> {
        let mut total = 0.0;
        for &x in z.iter() {
            let s = x - self.floor;
            if !(s > 0.0) {
                return None;
            }
            total += s.ln();
        }
        let ys = self.outputs(z);
        for c in &self.constraints {
            let g = self.constraint_value_with(c, z, &ys);
            if !(g > 0.0) {
                return None;
            }
            total += g.ln();
        }
        Some(t * self.objective_with(z, &ys) + total)
    }

    /// Gradient and Hessian of the barrier objective at a strictly feasible point.
    pub(crate) fn barrier_derivatives(&self, z: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n_variables();
        let ys = self.outputs(z);
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        self.add_objective_derivatives(z, &ys, t, &mut g, Some(&mut h));
        for c in &self.constraints {
            let gi = self.constraint_value_with(c, z, &ys);
            let mut dg = DVector::zeros(n);
            self.add_constraint_gradient(c, z, &ys, 1.0, &mut dg);
            g.axpy(1.0 / gi, &dg, 1.0);
            self.add_constraint_hessian(c, z, &ys, 1.0 / gi, &mut h);
            h.ger(-1.0 / (gi * gi), &dg, &dg, 1.0);
        }
        for j in 0..n {
            let s = z[j] - self.floor;
            g[j] += 1.0 / s;
            h[(j, j)] -= 1.0 / (s * s);
        }
        (g, h)
    }

    /// Multipliers implied by the barrier optimality conditions at `z`.
    pub(crate) fn barrier_multipliers(&self, z: &DVector<f64>, t: f64) -> Multipliers {
        Multipliers {
            constraints: self.constraint_values(z).iter().map(|g| 1.0 / (t * g)).collect(),
            bounds: z.iter().map(|x| 1.0 / (t * (x - self.floor))).collect(),
        }
    }

    /// A strictly feasible point for the balance and cap constraints, built
    /// by walking goods in topological order and handing each consumer a
    /// share of what its supplier can spare. Value floors are not considered.
    pub fn interior_start(&self) -> Option<DVector<f64>> {
        let n = self.n_variables();
        let mut z = DVector::from_element(n, f64::NAN);
        let eps = self.floor;
        for k in 0..self.economy.n_goods() {
            let out: Vec<usize> = (0..n).filter(|&i| self.variables[i].0 == k).collect();
            if out.is_empty() {
                continue;
            }
            let mut upper = vec![f64::INFINITY; out.len()];
            for c in &self.constraints {
                let (slack, members) = match c {
                    Constraint::Balance { company, outflows, fixed_outflow } if *company == k => {
                        (self.output(&z, k) - fixed_outflow, outflows)
                    }
                    Constraint::Cap { supplier, outflows, cap } if *supplier == k => (*cap, outflows),
                    _ => continue,
                };
                let share = slack / members.len() as f64;
                for (slot, i) in out.iter().enumerate() {
                    if members.contains(i) {
                        upper[slot] = upper[slot].min(share);
                    }
                }
            }
            for (slot, &i) in out.iter().enumerate() {
                let ub = upper[slot];
                if !(ub > eps) {
                    return None;
                }
                let start = 1.0f64.max(2.0 * eps);
                z[i] = if ub.is_finite() { start.min(0.5 * (eps + ub)) } else { start };
            }
        }
        Some(z)
    }

    /// Maps a decision vector to the full flow matrix.
    pub fn flows(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut x = self.fixed.clone();
        for (i, &(k, m)) in self.variables.iter().enumerate() {
            x[(k, m)] = z[i];
        }
        x
    }

    pub fn plan(&self, z: &DVector<f64>) -> Result<ProductionPlan, ModelError> {
        ProductionPlan::from_flows(self.economy, self.flows(z))
    }

    /// Extracts the decision vector from a plan.
    pub fn point(&self, plan: &ProductionPlan) -> Result<DVector<f64>, SolverError> {
        if plan.n_goods() != self.economy.n_goods() {
            return Err(ModelError::Shape("plan does not match economy".into()).into());
        }
        Ok(DVector::from_iterator(
            self.n_variables(),
            self.variables.iter().map(|&(k, m)| plan.flow(k, m)),
        ))
    }

    /// Max-norm of the KKT conditions at `z` for the given multipliers:
    /// stationarity, primal feasibility, dual feasibility and complementary
    /// slackness.
    pub fn kkt_residual_at(&self, z: &DVector<f64>, multipliers: &Multipliers) -> f64 {
        let n = self.n_variables();
        assert_eq!(multipliers.constraints.len(), self.constraints.len(), "one multiplier per constraint");
        assert_eq!(multipliers.bounds.len(), n, "one multiplier per variable bound");
        let ys = self.outputs(z);
        let mut stationarity = DVector::zeros(n);
        self.add_objective_derivatives(z, &ys, 1.0, &mut stationarity, None);
        let mut worst = 0.0f64;
        for (c, &lambda) in self.constraints.iter().zip(&multipliers.constraints) {
            let g = self.constraint_value_with(c, z, &ys);
            self.add_constraint_gradient(c, z, &ys, lambda, &mut stationarity);
            worst = worst.max((-g).max(0.0)).max((-lambda).max(0.0)).max((lambda * g).abs());
        }
        for j in 0..n {
            let nu = multipliers.bounds[j];
            let s = z[j] - self.floor;
            stationarity[j] += nu;
            worst = worst.max((-s).max(0.0)).max((-nu).max(0.0)).max((nu * s).abs());
        }
        worst.max(stationarity.amax())
    }
}

fn capture_cap(ctx: &CaptureContext<'_>, inside: &[bool], supplier: usize) -> f64 {
    let baseline = &ctx.baseline.plan;
    let to_members: f64 = (0..inside.len())
        .filter(|&m| inside[m])
        .map(|m| baseline.flow(supplier, m))
        .sum();
    ctx.gamma * baseline.outputs()[supplier] + (1.0 - ctx.gamma) * to_members
}
