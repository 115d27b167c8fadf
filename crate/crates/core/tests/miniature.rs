//! Expected counts and optima of the miniature instance, enumerated by hand in the comments below.

mod common;

use coldchain::def::VarKind;
use coldchain::solver::solve;
use coldchain_lp::LpStatus;
use common::def;

// columns: served 1 clinic x 2 periods x 2 stores = 4; covered 1; inventory 2 nodes x 3 (t = 0..2)
// x 2 stores = 12; shipments 2 periods x 4 routes = 8; central supply 2 periods x 2 stores = 4;
// shortage and excess 2 coordinates x 1 scenario x 2 = 4. Total 33.
// rows: balance 2 x 2 x 2 = 8; capacity 2 x 2 x 2 = 8; initial 2 x 2 = 4; terminal no-freezer 2;
// transport 2; coverage 1; scenario 2. Total 27.
#[test]
fn counts_match_enumeration() {
    let d = def(0, 0.0);
    assert_eq!(d.lp.num_cols(), 33);
    assert_eq!(d.lp.num_rows(), 27);
    let s = d.summary();
    assert_eq!(s.cols_by_family["shipment"], 8);
    assert_eq!(s.rows_by_family["capacity"], 8);
}

// lag 0: the clinic can receive and use at most 10 doses per period (capacity 10 cc, 1 cc/dose,
// no freezer), so served = 20, covered = 20, objective 20 + 0.01 * 20 = 20.2.
#[test]
fn optimum_without_lag() {
    for penalty in [0.0, 1.0] {
        let d = def(0, penalty);
        let sol = solve(&d, &Default::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 20.2).abs() < 1e-9, "{}", sol.objective);
    }
}

// lag 1: nothing arrives in period 1, so period-1 demand 5 is short; at most 10 doses arrive
// in period 2 and cover its demand 8. Objective 10 + 0.01 * 10 - 1 * 5 = 5.1.
#[test]
fn optimum_with_lag_and_penalty() {
    let d = def(1, 1.0);
    let sol = solve(&d, &Default::default()).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - 5.1).abs() < 1e-9, "{}", sol.objective);
    assert_eq!(d.violation_counts(&sol.x, 1e-6), vec![1, 0]);
}

// With no wastage every dose supplied is served, held at the end or still in transit.
#[test]
fn flows_telescope() {
    for lag in [0, 1] {
        let d = def(lag, 1.0);
        let sol = solve(&d, &Default::default()).unwrap();
        let (mut supply, mut served, mut terminal, mut in_transit) = (0.0, 0.0, 0.0, 0.0);
        for (j, kind) in d.index.kinds().iter().enumerate() {
            let v = sol.x[j];
            match *kind {
                VarKind::Supply { .. } => supply += v,
                VarKind::Served { .. } => served += v,
                VarKind::Inventory { period: 2, .. } => terminal += v,
                VarKind::Shipment { period, .. } if period + lag > 2 => in_transit += v,
                _ => {}
            }
        }
        assert!((supply - served - terminal - in_transit).abs() < 1e-9, "lag {lag}: {supply} {served} {terminal} {in_transit}");
    }
}
