//! Public solve entry point: presolve, scale, simplex, postsolve.

use std::time::{Duration, Instant};

use crate::error::LpError;
use crate::presolve::Presolved;
use crate::problem::{LinearProgram, RowSense, Sense};
use crate::scale::Scaling;
use crate::simplex::{self, CompForm, EngineOptions, Outcome, VarStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// An externally supplied point that satisfies all constraints.
    Feasible,
    /// An externally supplied point that violates some constraint.
    NotFeasible,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub presolve: bool,
    pub scale: bool,
    pub refactor_interval: usize,
    pub stall_threshold: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            max_iters: 2_000_000,
            presolve: true,
            scale: true,
            refactor_interval: 100,
            stall_threshold: 50,
        }
    }
}

/// A basis from a previous solve of a problem with the same structure.
#[derive(Clone, Debug)]
pub struct WarmStart {
    cols: usize,
    rows: usize,
    status: Vec<VarStatus>,
    /// primal point of the solve that produced the basis
    x: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective in the problem's own sense.
    pub objective: f64,
    pub x: Vec<f64>,
    pub row_activity: Vec<f64>,
    /// Row duals in the problem's own sense: the rate of change of the objective per unit of rhs.
    pub duals: Vec<f64>,
    pub iterations: usize,
    pub solve_time: Duration,
    pub max_violation: f64,
    /// Relative gap between the primal objective and the Lagrangian bound of the duals.
    pub duality_gap: f64,
    /// Rows participating in the infeasibility certificate.
    pub infeasible_rows: Vec<usize>,
    /// Improving direction when unbounded.
    pub ray: Vec<f64>,
    pub warm_start: Option<WarmStart>,
}

fn comp_form(lp: &LinearProgram) -> CompForm {
    let (n, m) = (lp.num_cols(), lp.num_rows());
    let mut lower = lp.col_lower.clone();
    let mut upper = lp.col_upper.clone();
    for i in 0..m {
        let b = lp.rhs[i];
        let (lo, hi) = match lp.row_senses[i] {
            RowSense::Le => (f64::NEG_INFINITY, b),
            RowSense::Ge => (b, f64::INFINITY),
            RowSense::Eq => (b, b),
        };
        lower.push(lo);
        upper.push(hi);
    }
    debug_assert_eq!(lower.len(), n + m);
    CompForm {
        n,
        m,
        col_ptr: lp.col_ptr.clone(),
        row_idx: lp.row_idx.clone(),
        values: lp.values.clone(),
        cost: lp.objective.clone(),
        lower,
        upper,
    }
}

/// Lagrangian lower bound of a minimization problem at multipliers `y`.
fn lagrangian_bound(lp: &LinearProgram, cost_sign: f64, y: &[f64], tol: f64) -> f64 {
    let mut bound = 0.0;
    for j in 0..lp.num_cols() {
        let c = cost_sign * lp.objective[j];
        let d = c - lp.column(j).map(|(i, a)| y[i] * a).sum::<f64>();
        let (l, u) = (lp.col_lower[j], lp.col_upper[j]);
        let small = d.abs() <= tol * (1.0 + c.abs());
        bound += if small {
            0.0
        } else if d > 0.0 {
            d * l
        } else {
            d * u
        };
    }
    for (i, &yi) in y.iter().enumerate() {
        let b = lp.rhs[i];
        let (lo, hi) = match lp.row_senses[i] {
            RowSense::Le => (f64::NEG_INFINITY, b),
            RowSense::Ge => (b, f64::INFINITY),
            RowSense::Eq => (b, b),
        };
        if yi.abs() <= tol {
            continue;
        }
        bound += if yi > 0.0 { yi * lo } else { yi * hi };
    }
    bound
}

/// Solves `lp`, optionally reusing the basis of an earlier solve of a structurally identical problem.
pub fn solve(lp: &LinearProgram, options: &SolveOptions, warm: Option<&WarmStart>) -> Result<LpSolution, LpError> {
    lp.validate()?;
    if lp.num_cols() == 0 {
        return Err(LpError::NoVariables);
    }
    let start = Instant::now();
    let pre = if options.presolve { Presolved::new(lp) } else { Presolved::identity(lp) };
    let cf = comp_form(&pre.reduced);
    let scaling = if options.scale { Scaling::geometric(&cf, 4) } else { Scaling::identity(&cf) };
    let scaled = scaling.apply(&cf);
    let eopts = EngineOptions {
        feas_tol: options.tol,
        opt_tol: options.tol,
        max_iters: options.max_iters,
        refactor_interval: options.refactor_interval,
        stall_threshold: options.stall_threshold,
        ..EngineOptions::default()
    };
    let warm_status = warm.filter(|w| w.cols == cf.n && w.rows == cf.m).map(|w| {
        let mut st = w.status.clone();
        pre.reseat_pieces(&mut st, &w.x);
        st
    });
    let mut res = simplex::solve(&scaled, &eopts, warm_status.as_deref());
    scaling.unscale_primal(&mut res.x);
    scaling.unscale_duals(&mut res.y);
    let mut reduced_ray = res.ray.clone();
    for (j, r) in reduced_ray.iter_mut().enumerate() {
        *r *= scaling.col[j];
    }

    let status = match res.outcome {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Infeasible => LpStatus::Infeasible,
        Outcome::Unbounded => LpStatus::Unbounded,
        Outcome::IterationLimit => LpStatus::IterationLimit,
    };
    let x = pre.primal(&res.x[..cf.n]);
    let y_min = pre.duals(&res.y, &x);
    let sign = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let objective = lp.objective_value(&x);
    let duality_gap = if status == LpStatus::Optimal {
        let primal_min = sign * objective;
        let dual_min = lagrangian_bound(lp, sign, &y_min, 1e-7);
        (primal_min - dual_min).abs() / (1.0 + primal_min.abs())
    } else {
        f64::NAN
    };
    let mut infeasible_rows: Vec<usize> =
        res.infeasible_rows.iter().flat_map(|&r| pre.original_rows(r)).collect();
    infeasible_rows.sort_unstable();
    let ray = if status == LpStatus::Unbounded { pre.ray(&reduced_ray) } else { Vec::new() };
    let warm_start = WarmStart { cols: cf.n, rows: cf.m, status: res.status, x: x.clone() };
    Ok(LpSolution {
        status,
        objective,
        row_activity: lp.activities(&x),
        max_violation: lp.max_violation(&x),
        duals: y_min.iter().map(|v| sign * v).collect(),
        x,
        iterations: res.iterations,
        solve_time: start.elapsed(),
        duality_gap,
        infeasible_rows,
        ray,
        warm_start: Some(warm_start),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::LpBuilder;

    #[test]
    fn small_max_problem() {
        // max 3x + 2y, x + y <= 4, x + 3y <= 7, x <= 3
        let mut b = LpBuilder::new("t", Sense::Maximize);
        let x = b.add_column("x", 3.0, 0.0, 3.0);
        let y = b.add_column("y", 2.0, 0.0, f64::INFINITY);
        b.add_row("r1", RowSense::Le, 4.0, &[(x, 1.0), (y, 1.0)]);
        b.add_row("r2", RowSense::Le, 7.0, &[(x, 1.0), (y, 3.0)]);
        let sol = solve(&b.build(), &SolveOptions::default(), None).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 11.0).abs() < 1e-9);
        assert!((sol.duals[0] - 2.0).abs() < 1e-9);
        assert!(sol.duality_gap < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        let mut b = LpBuilder::new("t", Sense::Minimize);
        let x = b.add_column("x", 1.0, 0.0, f64::INFINITY);
        let y = b.add_column("y", 1.0, 0.0, f64::INFINITY);
        b.add_row("a", RowSense::Ge, 5.0, &[(x, 1.0), (y, 1.0)]);
        b.add_row("b", RowSense::Le, 2.0, &[(x, 1.0)]);
        b.add_row("c", RowSense::Le, 2.0, &[(y, 1.0)]);
        b.add_row("free", RowSense::Le, 100.0, &[(x, 1.0), (y, -1.0)]);
        let sol = solve(&b.build(), &SolveOptions::default(), None).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        assert!(!sol.infeasible_rows.is_empty());
        assert!(!sol.infeasible_rows.contains(&3));
    }

    #[test]
    fn detects_unbounded() {
        let mut b = LpBuilder::new("t", Sense::Maximize);
        let x = b.add_column("x", 1.0, 0.0, f64::INFINITY);
        let y = b.add_column("y", 0.0, 0.0, f64::INFINITY);
        b.add_row("a", RowSense::Le, 1.0, &[(x, 1.0), (y, -1.0)]);
        let sol = solve(&b.build(), &SolveOptions::default(), None).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
        assert!(sol.ray[0] > 0.0);
    }

    #[test]
    fn empty_problem_is_an_error() {
        let lp = LpBuilder::new("t", Sense::Minimize).build();
        assert!(matches!(solve(&lp, &SolveOptions::default(), None), Err(LpError::NoVariables)));
    }
}
