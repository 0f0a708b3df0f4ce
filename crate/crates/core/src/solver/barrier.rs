//! Primal log-barrier method with damped Newton centering.

use std::cell::Cell;

use log::trace;
use nalgebra::{DMatrix, DVector};

use super::problem::Problem;
use super::{Multipliers, SolveStatus, SolverSettings};

/// Newton decrement (squared, halved) below which a center is accepted.
const CENTERING_TOL: f64 = 1e-10;
/// Looser threshold accepted once rounding stops the barrier from improving.
const STAGNATION_TOL: f64 = 1e-6;
const ARMIJO: f64 = 0.01;
/// A step may shrink any slack by at most this factor. Without it a long
/// first step can pin an iterate against a curved constraint, after which
/// Newton crawls along the boundary.
const BOUNDARY_FRACTION: f64 = 0.1;
/// KKT residual of a center below which an active-set polish is attempted.
const POLISH_FROM: f64 = 1e-3;
const POLISH_STEPS: usize = 8;
/// Newton steps allowed for one centering before it counts as stalled. Later
/// centerings take under ten; the first one, from a crude start, up to ~100.
const CENTERING_STEPS: usize = 200;

pub(crate) struct Outcome {
    pub z: DVector<f64>,
    /// The last barrier center; strictly feasible even when `z` was polished
    /// onto the boundary.
    pub interior: DVector<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub multipliers: Multipliers,
    pub kkt_residual: f64,
}

/// Solves `(-h) d = g` for the ascent direction.
///
/// The system is equilibrated by its diagonal first: barrier Hessians mix
/// entries of wildly different magnitude near the boundary. A growing shift
/// regularizes the scaled matrix if the factorization fails.
fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = g.len();
    let scale = DVector::from_iterator(n, (0..n).map(|i| 1.0 / (-h[(i, i)]).max(f64::MIN_POSITIVE).sqrt()));
    let mut scaled = -h;
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] *= scale[i] * scale[j];
        }
    }
    let rhs = g.component_mul(&scale);
    let mut shift = 0.0;
    for _ in 0..12 {
        let mut m = scaled.clone();
        for i in 0..n {
            m[(i, i)] += shift;
        }
        if let Some(chol) = m.cholesky() {
            let d = chol.solve(&rhs).component_mul(&scale);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        shift = if shift == 0.0 { 1e-12 } else { shift * 100.0 };
    }
    None
}

#[derive(Debug)]
enum Centering {
    Converged,
    Stalled,
    IterationLimit,
}

fn center(
    problem: &Problem<'_>,
    z: &mut DVector<f64>,
    t: f64,
    iterations: &mut usize,
    max_iterations: usize,
    early_stop: &mut dyn FnMut(&DVector<f64>) -> bool,
) -> Centering {
    for _ in 0..CENTERING_STEPS {
        if early_stop(z) {
            return Centering::Converged;
        }
        let (g, h) = problem.barrier_derivatives(z, t);
        let Some(d) = newton_direction(&g, &h) else {
            return Centering::Stalled;
        };
        let decrement = g.dot(&d);
        if decrement.is_nan() {
            return Centering::Stalled;
        }
        if decrement / 2.0 <= CENTERING_TOL {
            return Centering::Converged;
        }
        if *iterations >= max_iterations {
            return Centering::IterationLimit;
        }
        *iterations += 1;

        let phi0 = problem.barrier_value(z, t).expect("iterate stays strictly feasible");
        let slacks0 = problem.slacks(z);
        let slack = 1e-13 * (1.0 + phi0.abs());
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-14 {
            let candidate = &*z + &d * step;
            let kept = problem.slacks(&candidate).iter().zip(&slacks0).all(|(s, s0)| *s >= BOUNDARY_FRACTION * s0);
            if let Some(phi) = problem.barrier_value(&candidate, t).filter(|_| kept) {
                if phi >= phi0 + ARMIJO * step * decrement - slack {
                    *z = candidate;
                    accepted = true;
                    if phi - phi0 <= slack && decrement / 2.0 <= STAGNATION_TOL {
                        return Centering::Converged;
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return Centering::Stalled;
        }
    }
    Centering::Stalled
}

/// Maximizes the problem from a strictly feasible `z0`.
///
/// With `polish` set, a center close enough to optimal is finished by
/// [`polish`]; the returned point may then lie on the boundary.
///
/// `early_stop` is consulted before every Newton step; returning true ends the
/// run with the current iterate and status `Optimal` (used by feasibility
/// phases that only need to cross a threshold).
pub(crate) fn maximize(
    problem: &Problem<'_>,
    z0: DVector<f64>,
    settings: &SolverSettings,
    polish_enabled: bool,
    mut early_stop: impl FnMut(&DVector<f64>) -> bool,
) -> Outcome {
    let mut z = z0;
    debug_assert!(problem.is_strictly_feasible(&z));
    let n_terms = (problem.n_variables() + problem.constraints().len()).max(1) as f64;
    // a small start keeps the first center well inside; a greedy one lets a
    // long first step pin the iterate to the boundary
    let mut t = 0.1 * n_terms / problem.objective(&z).abs().max(1.0);
    // Complementarity of the barrier multipliers equals 1/t exactly, so the
    // residual cannot meet the tolerance before 1/t does.
    let t_max = 1e3 / settings.kkt_tolerance;
    let growth = 1.0 / settings.barrier_decrease;
    let mut iterations = 0;
    let stopped_early = Cell::new(false);
    let mut stop = |z: &DVector<f64>| {
        let hit = early_stop(z);
        if hit {
            stopped_early.set(true);
        }
        hit
    };
    // past a certain t rounding dominates; keep the best center seen
    let mut best: Option<(f64, f64, DVector<f64>)> = None;
    let mut polished: Option<(DVector<f64>, Multipliers, f64)> = None;

    let status = loop {
        let outcome = center(problem, &mut z, t, &mut iterations, settings.max_iterations, &mut stop);
        if stopped_early.get() {
            best = None;
            break SolveStatus::Optimal;
        }
        let (multipliers, residual) = multipliers_at(problem, &z, t, settings.kkt_tolerance);
        trace!("barrier t={t:.3e} iterations={iterations} kkt={residual:.3e}");
        if best.as_ref().is_none_or(|b| residual < b.0) {
            best = Some((residual, t, z.clone()));
        }
        // the polished point removes the O(1/t) gap of the center, so it is
        // preferred even when the center already meets the tolerance
        if polish_enabled && residual <= POLISH_FROM {
            if let Some(p) = polish(problem, &z, &multipliers, settings.kkt_tolerance) {
                trace!("polished at t={t:.3e}, kkt={:.3e}", p.2);
                polished = Some(p);
                break SolveStatus::Optimal;
            }
        }
        if residual <= settings.kkt_tolerance {
            break SolveStatus::Optimal;
        }
        if !matches!(outcome, Centering::Converged) || t >= t_max {
            break SolveStatus::IterationLimit;
        }
        // land just past the tolerance instead of overshooting into rounding
        let t_enough = 2.0 / settings.kkt_tolerance;
        t = if t < t_enough { (t * growth).min(t_enough) } else { t * growth };
    };
    if let Some((polished, multipliers, kkt_residual)) = polished {
        return Outcome { z: polished, interior: z, iterations, status, multipliers, kkt_residual };
    }
    if let Some((_, best_t, best_z)) = best {
        t = best_t;
        z = best_z;
    }
    let (multipliers, kkt_residual) = multipliers_at(problem, &z, t, settings.kkt_tolerance);
    Outcome { interior: z.clone(), z, iterations, status, multipliers, kkt_residual }
}

/// Multipliers at a center together with their KKT residual.
///
/// The barrier estimates `1/(t g)` inherit the rounding error of `g`, which
/// dominates when a constraint is nearly active and its multiplier is large.
/// The multipliers of the nearly active terms are then re-fitted to
/// stationarity by least squares, and the better of the two sets is kept.
fn multipliers_at(problem: &Problem<'_>, z: &DVector<f64>, t: f64, tolerance: f64) -> (Multipliers, f64) {
    let barrier = problem.barrier_multipliers(z, t);
    let residual = problem.kkt_residual_at(z, &barrier);
    if residual <= tolerance {
        return (barrier, residual);
    }
    let n = problem.n_variables();
    let mut columns: Vec<DVector<f64>> = Vec::new();
    let mut active = Vec::new();
    // stationarity of the terms kept at their barrier values
    let mut rhs = -problem.objective_gradient(z);
    for (i, &lambda) in barrier.constraints.iter().enumerate() {
        let grad = problem.constraint_gradient(i, z);
        if lambda > tolerance {
            columns.push(grad);
            active.push(i);
        } else {
            rhs.axpy(-lambda, &grad, 1.0);
        }
    }
    let n_cons = barrier.constraints.len();
    for (j, &nu) in barrier.bounds.iter().enumerate() {
        if nu > tolerance {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            columns.push(e);
            active.push(n_cons + j);
        } else {
            rhs[j] -= nu;
        }
    }
    if columns.is_empty() {
        return (barrier, residual);
    }
    let jac = DMatrix::from_columns(&columns);
    let Ok(fit) = jac.svd(true, true).solve(&rhs, 1e-12) else {
        return (barrier, residual);
    };
    let mut refined = barrier.clone();
    for (slot, &a) in active.iter().enumerate() {
        if a < n_cons {
            refined.constraints[a] = fit[slot];
        } else {
            refined.bounds[a - n_cons] = fit[slot];
        }
    }
    let refined_residual = problem.kkt_residual_at(z, &refined);
    if refined_residual < residual {
        (refined, refined_residual)
    } else {
        (barrier, residual)
    }
}

/// Newton's method on the KKT system with the nearly active terms held as
/// equalities, started from a barrier center.
///
/// Near the boundary the barrier subproblems lose precision long before the
/// residual reaches the tolerance; the equality-constrained system does not.
/// The result is accepted only if its full KKT residual, including the sign
/// of the multipliers and the slack of the dropped terms, meets `tolerance`.
fn polish(
    problem: &Problem<'_>,
    z0: &DVector<f64>,
    multipliers: &Multipliers,
    tolerance: f64,
) -> Option<(DVector<f64>, Multipliers, f64)> {
    let n = problem.n_variables();
    let n_cons = problem.constraints().len();
    let values = problem.constraint_values(z0);
    // active when the multiplier outweighs the slack
    let active: Vec<usize> = (0..n_cons).filter(|&i| multipliers.constraints[i] > values[i]).collect();
    let floor = problem.floor();
    let fixed: Vec<usize> = (0..n).filter(|&j| multipliers.bounds[j] > z0[j] - floor).collect();

    let mut z = z0.clone();
    for &j in &fixed {
        z[j] = floor;
    }
    let free: Vec<usize> = (0..n).filter(|j| !fixed.contains(j)).collect();
    let (nf, na) = (free.len(), active.len());
    let mut lambda = DVector::from_iterator(na, active.iter().map(|&i| multipliers.constraints[i]));

    let assemble = |z: &DVector<f64>, lambda: &DVector<f64>| {
        let mut stationarity = problem.objective_gradient(z);
        let mut jac = DMatrix::zeros(na, n);
        for (a, &i) in active.iter().enumerate() {
            let g = problem.constraint_gradient(i, z);
            stationarity.axpy(lambda[a], &g, 1.0);
            jac.row_mut(a).copy_from(&g.transpose());
        }
        (stationarity, jac)
    };
    let full = |z: &DVector<f64>, lambda: &DVector<f64>| {
        let (stationarity, _) = assemble(z, lambda);
        let mut m = Multipliers { constraints: vec![0.0; n_cons], bounds: vec![0.0; n] };
        for (a, &i) in active.iter().enumerate() {
            m.constraints[i] = lambda[a];
        }
        for &j in &fixed {
            // the bound multiplier absorbs the remaining stationarity
            m.bounds[j] = -stationarity[j];
        }
        m
    };

    for _ in 0..POLISH_STEPS {
        let (stationarity, jac) = assemble(&z, &lambda);
        let mut hess = problem.objective_hessian(&z);
        for (a, &i) in active.iter().enumerate() {
            hess += problem.constraint_hessian(i, &z) * lambda[a];
        }
        let g = problem.constraint_values(&z);
        let mut kkt = DMatrix::zeros(nf + na, nf + na);
        let mut rhs = DVector::zeros(nf + na);
        for (r, &j) in free.iter().enumerate() {
            for (c, &k) in free.iter().enumerate() {
                kkt[(r, c)] = hess[(j, k)];
            }
            for a in 0..na {
                kkt[(r, nf + a)] = jac[(a, j)];
                kkt[(nf + a, r)] = jac[(a, j)];
            }
            rhs[r] = -stationarity[j];
        }
        for (a, &i) in active.iter().enumerate() {
            rhs[nf + a] = -g[i];
        }
        let svd = kkt.svd(true, true);
        let cutoff = 1e-13 * svd.singular_values.max();
        let Ok(step) = svd.solve(&rhs, cutoff) else {
            return None;
        };
        if !step.iter().all(|v| v.is_finite()) {
            return None;
        }
        for (r, &j) in free.iter().enumerate() {
            z[j] += step[r];
        }
        for a in 0..na {
            lambda[a] += step[nf + a];
        }
        if free.iter().any(|&j| !(z[j] > floor)) {
            return None;
        }
        let m = full(&z, &lambda);
        let residual = problem.kkt_residual_at(&z, &m);
        if residual <= tolerance {
            return Some((z, m, residual));
        }
    }
    None
}

