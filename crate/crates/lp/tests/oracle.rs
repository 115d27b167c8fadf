//! Simplex results checked against brute-force vertex enumeration on small boxed LPs.

use coldchain_lp::{solve, LinearProgram, LpBuilder, LpStatus, RowSense, Sense, SolveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves the dense square system `a x = b`; `None` when (near) singular.
fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                if f != 0.0 {
                    for k in c..n {
                        a[r][k] -= f * a[c][k];
                    }
                    b[r] -= f * b[c];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}

/// Best objective over all vertices of a boxed LP, or `None` when infeasible.
fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_cols();
    let rows = lp.rows();
    // every constraint as `g'x <= h`
    let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut g = vec![0.0; n];
        for &(j, v) in row {
            g[j] = v;
        }
        let b = lp.rhs[i];
        match lp.row_senses[i] {
            RowSense::Le => cons.push((g, b)),
            RowSense::Ge => cons.push((g.iter().map(|v| -v).collect(), -b)),
            RowSense::Eq => {
                cons.push((g.clone(), b));
                cons.push((g.iter().map(|v| -v).collect(), -b));
            }
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cons.push((e.clone(), lp.col_upper[j]));
        cons.push((e.iter().map(|v| -v).collect(), -lp.col_lower[j]));
    }
    let sign = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut best: Option<f64> = None;
    for subset in combinations(cons.len(), n) {
        let a: Vec<Vec<f64>> = subset.iter().map(|&k| cons[k].0.clone()).collect();
        let b: Vec<f64> = subset.iter().map(|&k| cons[k].1).collect();
        let Some(x) = gauss(a, b) else { continue };
        let feasible = cons
            .iter()
            .all(|(g, h)| g.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= h + 1e-7 * (1.0 + h.abs()));
        if feasible {
            let obj = sign * lp.objective_value(&x);
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    best.map(|b| sign * b)
}

fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.random_range(2..=4);
    let m = rng.random_range(1..=4);
    let sense = if rng.random_bool(0.5) { Sense::Maximize } else { Sense::Minimize };
    let mut b = LpBuilder::new("rand", sense);
    for j in 0..n {
        let lo = if rng.random_bool(0.3) { -(rng.random_range(1..5) as f64) } else { 0.0 };
        let hi = lo + rng.random_range(1..8) as f64;
        b.add_column(format!("x{j}"), rng.random_range(-5..=5) as f64, lo, hi);
    }
    for i in 0..m {
        let mut entries = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.7) {
                entries.push((j, rng.random_range(-4..=4) as f64));
            }
        }
        let sense = match rng.random_range(0..5) {
            0 => RowSense::Eq,
            1 | 2 => RowSense::Ge,
            _ => RowSense::Le,
        };
        b.add_row(format!("r{i}"), sense, rng.random_range(-6..=10) as f64, &entries);
    }
    b.build()
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut optimal, mut infeasible) = (0, 0);
    for trial in 0..300 {
        let lp = random_lp(&mut rng);
        let expected = vertex_oracle(&lp);
        for presolve in [true, false] {
            let opts = SolveOptions { presolve, ..SolveOptions::default() };
            let sol = solve(&lp, &opts, None).unwrap();
            match expected {
                Some(obj) => {
                    assert_eq!(sol.status, LpStatus::Optimal, "trial {trial} presolve {presolve}: {lp:?}");
                    assert!((sol.objective - obj).abs() <= 1e-6 * (1.0 + obj.abs()), "trial {trial}: {} vs {obj}", sol.objective);
                    assert!(sol.max_violation <= 1e-7, "trial {trial}");
                    assert!(sol.duality_gap <= 1e-6, "trial {trial}: gap {}", sol.duality_gap);
                }
                None => assert_eq!(sol.status, LpStatus::Infeasible, "trial {trial}"),
            }
        }
        if expected.is_some() {
            optimal += 1;
        } else {
            infeasible += 1;
        }
    }
    assert!(optimal > 100 && infeasible > 10, "{optimal} optimal, {infeasible} infeasible");
}

/// Many parallel scenario rows with private slack pairs, plus coupling rows.
fn scenario_lp(rng: &mut ChaCha8Rng, groups: usize, scenarios: usize) -> LinearProgram {
    let mut b = LpBuilder::new("scen", Sense::Maximize);
    let xs: Vec<usize> = (0..groups * 2)
        .map(|j| b.add_column(format!("x{j}"), rng.random_range(0.0..0.05), 0.0, f64::INFINITY))
        .collect();
    let cap: Vec<(usize, f64)> = xs.iter().map(|&j| (j, rng.random_range(0.5..2.0))).collect();
    b.add_row("cap", RowSense::Le, 10.0 * groups as f64, &cap);
    for g in 0..groups {
        let penalty = rng.random_range(0.0..2.0);
        for s in 0..scenarios {
            let v = b.add_column(format!("v{g}_{s}"), -penalty, 0.0, f64::INFINITY);
            let z = b.add_column(format!("z{g}_{s}"), 0.0, 0.0, f64::INFINITY);
            let delta = rng.random_range(0..12) as f64;
            b.add_row(
                format!("s{g}_{s}"),
                RowSense::Eq,
                delta,
                &[(xs[2 * g], 1.0), (xs[2 * g + 1], 0.5), (v, 1.0), (z, -1.0)],
            );
        }
    }
    b.build()
}

#[test]
fn presolve_preserves_optimum_and_duals() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let lp = scenario_lp(&mut rng, 4, 15);
        let with = solve(&lp, &SolveOptions::default(), None).unwrap();
        let without = solve(&lp, &SolveOptions { presolve: false, ..SolveOptions::default() }, None).unwrap();
        assert_eq!(with.status, LpStatus::Optimal);
        assert_eq!(without.status, LpStatus::Optimal);
        assert!((with.objective - without.objective).abs() <= 1e-8 * (1.0 + without.objective.abs()));
        assert!(with.max_violation <= 1e-9);
        assert!(with.duality_gap <= 1e-8, "gap {}", with.duality_gap);
        assert!(without.duality_gap <= 1e-8, "gap {}", without.duality_gap);
    }
}

#[test]
fn warm_start_reaches_same_optimum_faster() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut lp = scenario_lp(&mut rng, 6, 20);
    let first = solve(&lp, &SolveOptions::default(), None).unwrap();
    for (j, name) in lp.col_names.iter().enumerate() {
        if name.starts_with('v') {
            lp.objective[j] *= 1.5;
        }
    }
    let cold = solve(&lp, &SolveOptions::default(), None).unwrap();
    let warm = solve(&lp, &SolveOptions::default(), first.warm_start.as_ref()).unwrap();
    assert!((cold.objective - warm.objective).abs() <= 1e-8 * (1.0 + cold.objective.abs()));
    assert!(warm.iterations <= cold.iterations);
}

#[test]
fn unbounded_ray_improves_objective() {
    let mut b = LpBuilder::new("u", Sense::Minimize);
    let x = b.add_column("x", -1.0, 0.0, f64::INFINITY);
    let y = b.add_column("y", 1.0, 0.0, f64::INFINITY);
    let z = b.add_column("z", 0.0, 0.0, 5.0);
    b.add_row("a", RowSense::Le, 3.0, &[(x, 1.0), (y, -2.0), (z, 1.0)]);
    b.add_row("b", RowSense::Ge, -1.0, &[(x, -1.0), (y, 3.0)]);
    let lp = b.build();
    let sol = solve(&lp, &SolveOptions::default(), None).unwrap();
    assert_eq!(sol.status, LpStatus::Unbounded);
    assert!(lp.objective_value(&sol.ray) < 0.0);
    let act = lp.activities(&sol.ray);
    assert!(act[0] <= 1e-9 && act[1] >= -1e-9);
    assert!(sol.ray.iter().all(|&r| r >= -1e-12));
}
