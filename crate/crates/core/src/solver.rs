//! Solving a deterministic equivalent, in-repo or from an external solution file.

use std::collections::HashMap;
use std::io::BufReader;
use std::path::Path;
use std::time::Duration;

use coldchain_lp::mps::{column_code, read_solution};
use coldchain_lp::{LpError, LpSolution, LpStatus, SolveOptions, WarmStart};

use crate::def::DefProblem;
use crate::error::Result;

/// Residual above which an imported point is reported as not feasible.
pub const IMPORT_TOLERANCE: f64 = 1e-7;

pub fn solve(def: &DefProblem, options: &SolveOptions) -> Result<LpSolution> {
    solve_warm(def, options, None)
}

/// Solves, reusing a basis from an earlier solve of the same structure.
pub fn solve_warm(def: &DefProblem, options: &SolveOptions, warm: Option<&WarmStart>) -> Result<LpSolution> {
    Ok(coldchain_lp::solve(&def.lp, options, warm)?)
}

/// Cold solve through the collapsed copy of `def`: every coordinate first sees
/// a single demand value, then the real sample is solved from that basis.
pub fn solve_seeded(def: &DefProblem, options: &SolveOptions) -> Result<LpSolution> {
    let flat = solve(&def.collapsed(def.config.service_level), options)?;
    if flat.status != LpStatus::Optimal {
        return solve(def, options);
    }
    let mut sol = solve_warm(def, options, flat.warm_start.as_ref())?;
    sol.iterations += flat.iterations;
    sol.solve_time += flat.solve_time;
    Ok(sol)
}

/// Reads `name value` pairs from an external solver. Names may be the descriptive
/// column names or the `C0000001` codes of the exported MPS file; absent columns are 0.
pub fn import_solution(def: &DefProblem, path: &Path) -> Result<LpSolution> {
    let pairs = read_solution(BufReader::new(std::fs::File::open(path)?))?;
    let mut by_name: HashMap<&str, usize> = HashMap::new();
    for (j, n) in def.lp.col_names.iter().enumerate() {
        by_name.insert(n.as_str(), j);
    }
    let codes: Vec<String> = (0..def.lp.num_cols()).map(column_code).collect();
    for (j, c) in codes.iter().enumerate() {
        by_name.insert(c.as_str(), j);
    }
    let mut x = vec![0.0; def.lp.num_cols()];
    let mut unknown = Vec::new();
    for (name, value) in pairs {
        match by_name.get(name.as_str()) {
            Some(&j) => x[j] = value,
            None => unknown.push(name),
        }
    }
    if !unknown.is_empty() {
        return Err(LpError::UnknownVariables(unknown).into());
    }
    let max_violation = def.lp.max_violation(&x);
    Ok(LpSolution {
        status: if max_violation <= IMPORT_TOLERANCE { LpStatus::Feasible } else { LpStatus::NotFeasible },
        objective: def.lp.objective_value(&x),
        row_activity: def.lp.activities(&x),
        duals: Vec::new(),
        iterations: 0,
        solve_time: Duration::ZERO,
        max_violation,
        duality_gap: f64::NAN,
        infeasible_rows: Vec::new(),
        ray: Vec::new(),
        warm_start: None,
        x,
    })
}
