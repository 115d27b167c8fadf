use coldchain_lp::mps::{read_mps, write_mps};
use coldchain_lp::{solve, LinearProgram, LpBuilder, LpStatus, RowSense, Sense, SolveOptions};
use proptest::prelude::*;

fn arb_lp() -> impl Strategy<Value = LinearProgram> {
    (1usize..6, 1usize..6, any::<bool>()).prop_flat_map(|(n, m, max)| {
        let cols = prop::collection::vec((-10.0f64..10.0, -5.0f64..0.0, 0.0f64..20.0, any::<bool>()), n);
        let rows = prop::collection::vec(
            (prop::collection::vec(prop::option::of(-3.0f64..3.0), n), 0u8..3, -5.0f64..30.0),
            m,
        );
        (cols, rows).prop_map(move |(cols, rows)| {
            let mut b = LpBuilder::new("prop", if max { Sense::Maximize } else { Sense::Minimize });
            for (j, (c, lo, hi, free_lo)) in cols.iter().enumerate() {
                b.add_column(format!("x{j}"), *c, if *free_lo { 0.0 } else { *lo }, *hi);
            }
            for (i, (coefs, s, rhs)) in rows.iter().enumerate() {
                let entries: Vec<(usize, f64)> =
                    coefs.iter().enumerate().filter_map(|(j, c)| c.map(|c| (j, c))).collect();
                let sense = [RowSense::Le, RowSense::Ge, RowSense::Eq][*s as usize];
                b.add_row(format!("r{i}"), sense, *rhs, &entries);
            }
            b.build()
        })
    })
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-11 * a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mps_round_trip(lp in arb_lp()) {
        let mut buf = Vec::new();
        write_mps(&lp, &mut buf).unwrap();
        let back = read_mps(buf.as_slice()).unwrap();
        prop_assert_eq!(back.sense, lp.sense);
        prop_assert_eq!(back.num_cols(), lp.num_cols());
        prop_assert_eq!(back.num_rows(), lp.num_rows());
        prop_assert_eq!(&back.row_senses, &lp.row_senses);
        prop_assert_eq!(&back.col_ptr, &lp.col_ptr);
        prop_assert_eq!(&back.row_idx, &lp.row_idx);
        for (a, b) in back.values.iter().zip(&lp.values) { prop_assert!(close(*a, *b)); }
        for (a, b) in back.objective.iter().zip(&lp.objective) { prop_assert!(close(*a, *b)); }
        for (a, b) in back.rhs.iter().zip(&lp.rhs) { prop_assert!(close(*a, *b)); }
        for (a, b) in back.col_lower.iter().zip(&lp.col_lower) { prop_assert!(close(*a, *b)); }
        for (a, b) in back.col_upper.iter().zip(&lp.col_upper) { prop_assert!(close(*a, *b)); }
    }

    #[test]
    fn row_order_does_not_change_optimum(lp in arb_lp(), seed in any::<u64>()) {
        let m = lp.num_rows();
        let mut perm: Vec<usize> = (0..m).collect();
        let mut s = seed;
        for k in (1..m).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(k, (s >> 33) as usize % (k + 1));
        }
        let a = solve(&lp, &SolveOptions::default(), None).unwrap();
        let b = solve(&lp.permute_rows(&perm), &SolveOptions::default(), None).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.status == LpStatus::Optimal {
            prop_assert!((a.objective - b.objective).abs() <= 1e-7 * (1.0 + a.objective.abs()));
            prop_assert!(a.max_violation <= 1e-7);
            prop_assert!(a.duality_gap <= 1e-6);
        }
    }

    #[test]
    fn scaling_does_not_change_optimum(lp in arb_lp()) {
        let a = solve(&lp, &SolveOptions::default(), None).unwrap();
        let b = solve(&lp, &SolveOptions { scale: false, ..SolveOptions::default() }, None).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.status == LpStatus::Optimal {
            prop_assert!((a.objective - b.objective).abs() <= 1e-7 * (1.0 + a.objective.abs()));
        }
    }
}
