//! Aggregation of parallel equality rows carrying private slack pairs.
//!
//! A family of rows
//!
//! ```text
//! a'x + v_s - z_s = delta_s,   v_s, z_s >= 0,   s = 1..S
//! ```
//!
//! where `v_s` and `z_s` appear in no other row, is equivalent to a single row
//! over `y = a'x` with a convex piecewise-linear cost
//! `sum_s cv_s max(0, delta_s - y) + cz_s max(0, y - delta_s)`. That cost is
//! represented exactly by one bounded column per breakpoint interval, which
//! replaces `S` rows and `2S` columns by one row and exactly `S + 1` columns.
//! The reduction applies when `cv_s + cz_s >= 0` (minimization form), which
//! is what makes the pieces convex.

use std::collections::HashMap;

use crate::problem::{LinearProgram, LpBuilder, RowSense, Sense};
use crate::simplex::VarStatus;

#[derive(Clone, Debug)]
struct Member {
    row: usize,
    v_col: usize,
    z_col: usize,
    delta: f64,
    cv: f64,
    cz: f64,
}

#[derive(Clone, Debug)]
struct SlackGroup {
    reduced_row: usize,
    structural: Vec<(usize, f64)>,
    members: Vec<Member>,
    /// reduced columns: the below-all piece, then one per breakpoint interval
    pieces: Vec<usize>,
}

/// A reduced minimization problem plus what is needed to map solutions back.
#[derive(Clone, Debug)]
pub struct Presolved {
    pub reduced: LinearProgram,
    col_map: Vec<Option<usize>>,
    row_map: Vec<Option<usize>>,
    groups: Vec<SlackGroup>,
    orig_cols: usize,
    orig_rows: usize,
}

impl Presolved {
    pub fn aggregated_rows(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).sum()
    }

    /// Wraps a problem without reducing it (only converting to minimization).
    pub fn identity(lp: &LinearProgram) -> Presolved {
        let mut reduced = lp.clone();
        if lp.sense == Sense::Maximize {
            reduced.objective.iter_mut().for_each(|c| *c = -*c);
            reduced.sense = Sense::Minimize;
        }
        Presolved {
            reduced,
            col_map: (0..lp.num_cols()).map(Some).collect(),
            row_map: (0..lp.num_rows()).map(Some).collect(),
            groups: Vec::new(),
            orig_cols: lp.num_cols(),
            orig_rows: lp.num_rows(),
        }
    }

    pub fn new(lp: &LinearProgram) -> Presolved {
        let sign = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
        let (n, m) = (lp.num_cols(), lp.num_rows());
        let col_len: Vec<usize> = (0..n).map(|j| lp.col_ptr[j + 1] - lp.col_ptr[j]).collect();
        let rows = lp.rows();

        let is_slack = |j: usize| col_len[j] == 1 && lp.col_lower[j] == 0.0 && lp.col_upper[j] == f64::INFINITY;
        let mut keyed: HashMap<Vec<(usize, u64)>, usize> = HashMap::new();
        let mut candidates: Vec<(Vec<(usize, f64)>, Vec<Member>)> = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if lp.row_senses[i] != RowSense::Eq {
                continue;
            }
            let pos: Vec<usize> = row.iter().filter(|&&(j, a)| a == 1.0 && is_slack(j)).map(|e| e.0).collect();
            let neg: Vec<usize> = row.iter().filter(|&&(j, a)| a == -1.0 && is_slack(j)).map(|e| e.0).collect();
            if pos.len() != 1 || neg.len() != 1 {
                continue;
            }
            let (v_col, z_col) = (pos[0], neg[0]);
            let (cv, cz) = (sign * lp.objective[v_col], sign * lp.objective[z_col]);
            if cv + cz < 0.0 {
                continue;
            }
            let structural: Vec<(usize, f64)> =
                row.iter().copied().filter(|&(j, _)| j != v_col && j != z_col).collect();
            let key: Vec<(usize, u64)> = structural.iter().map(|&(j, a)| (j, a.to_bits())).collect();
            let member = Member { row: i, v_col, z_col, delta: lp.rhs[i], cv, cz };
            match keyed.get(&key) {
                Some(&g) => candidates[g].1.push(member),
                None => {
                    keyed.insert(key, candidates.len());
                    candidates.push((structural, vec![member]));
                }
            }
        }
        candidates.retain(|(_, members)| members.len() >= 2);
        if candidates.is_empty() {
            return Presolved::identity(lp);
        }

        let mut drop_row = vec![false; m];
        let mut drop_col = vec![false; n];
        for (_, members) in &candidates {
            for mem in members {
                drop_row[mem.row] = true;
                drop_col[mem.v_col] = true;
                drop_col[mem.z_col] = true;
            }
        }

        let mut b = LpBuilder::new(lp.name.clone(), Sense::Minimize);
        let mut col_map = vec![None; n];
        for j in 0..n {
            if !drop_col[j] {
                col_map[j] = Some(b.add_column(lp.col_names[j].clone(), sign * lp.objective[j], lp.col_lower[j], lp.col_upper[j]));
            }
        }
        let mut row_map = vec![None; m];
        for i in 0..m {
            if drop_row[i] {
                continue;
            }
            let entries: Vec<(usize, f64)> = rows[i].iter().map(|&(j, a)| (col_map[j].unwrap(), a)).collect();
            row_map[i] = Some(b.add_row(lp.row_names[i].clone(), lp.row_senses[i], lp.rhs[i], &entries));
        }
        let mut groups = Vec::with_capacity(candidates.len());
        for (g, (structural, mut members)) in candidates.into_iter().enumerate() {
            members.sort_by(|a, b| a.delta.total_cmp(&b.delta).then(a.row.cmp(&b.row)));
            let s = members.len();
            let total_cv: f64 = members.iter().map(|mm| mm.cv).sum();
            let mut entries: Vec<(usize, f64)> =
                structural.iter().map(|&(j, a)| (col_map[j].unwrap(), a)).collect();
            // below the smallest breakpoint every member is short
            let u0 = b.add_column(format!("seg{g}_0"), total_cv, 0.0, f64::INFINITY);
            entries.push((u0, 1.0));
            let mut pieces = vec![u0];
            let mut slope = -total_cv;
            for k in 0..s {
                slope += members[k].cv + members[k].cz;
                // zero-width pieces are kept as fixed columns so the reduced shape
                // depends only on the group sizes, which keeps bases reusable
                let width = if k + 1 < s { members[k + 1].delta - members[k].delta } else { f64::INFINITY };
                let col = b.add_column(format!("seg{g}_{}", k + 1), slope, 0.0, width);
                entries.push((col, -1.0));
                pieces.push(col);
            }
            let reduced_row = b.add_row(format!("agg{g}"), RowSense::Eq, members[0].delta, &entries);
            groups.push(SlackGroup { reduced_row, structural, members, pieces });
        }
        Presolved { reduced: b.build(), col_map, row_map, groups, orig_cols: n, orig_rows: m }
    }

    /// Re-seats the piece statuses of a reused basis around the activity `a'x` of
    /// an earlier point `x` (original columns), so that a basis found for other
    /// breakpoints starts close to feasible. The number of basic pieces per group
    /// is preserved.
    pub fn reseat_pieces(&self, status: &mut [VarStatus], x: &[f64]) {
        for g in &self.groups {
            if x.len() != self.orig_cols {
                return;
            }
            let y: f64 = g.structural.iter().map(|&(j, a)| a * x[j]).sum();
            let basic = g.pieces.iter().filter(|&&c| status[c] == VarStatus::Basic).count();
            let s = g.members.len();
            // interval holding y: 0 below the first breakpoint, k in [delta_k, delta_k+1)
            let k = g.members.partition_point(|mm| mm.delta <= y);
            let u0 = g.pieces[0];
            status[u0] = VarStatus::AtLower;
            for (p, &c) in g.pieces.iter().enumerate().skip(1) {
                status[c] = if p < k { VarStatus::AtUpper } else { VarStatus::AtLower };
            }
            // basic pieces go to the intervals nearest to y
            let mut order: Vec<usize> = (0..=s).collect();
            order.sort_by_key(|&p| (p as i64 - k as i64).unsigned_abs());
            for &p in order.iter().take(basic) {
                status[g.pieces[p]] = VarStatus::Basic;
            }
        }
    }

    /// Maps a reduced primal point back to the original columns.
    pub fn primal(&self, reduced_x: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.orig_cols];
        for (j, mapped) in self.col_map.iter().enumerate() {
            if let Some(r) = mapped {
                x[j] = reduced_x[*r];
            }
        }
        for g in &self.groups {
            let y: f64 = g.structural.iter().map(|&(j, a)| a * x[j]).sum();
            for mem in &g.members {
                x[mem.v_col] = (mem.delta - y).max(0.0);
                x[mem.z_col] = (y - mem.delta).max(0.0);
            }
        }
        x
    }

    /// Original rows represented by a reduced row.
    pub fn original_rows(&self, reduced_row: usize) -> Vec<usize> {
        if let Some(g) = self.groups.iter().find(|g| g.reduced_row == reduced_row) {
            return g.members.iter().map(|mm| mm.row).collect();
        }
        self.row_map
            .iter()
            .position(|r| *r == Some(reduced_row))
            .into_iter()
            .collect()
    }

    /// Maps a reduced direction of unboundedness to the original columns.
    pub fn ray(&self, reduced_ray: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.orig_cols];
        for (j, mapped) in self.col_map.iter().enumerate() {
            if let Some(k) = mapped {
                r[j] = reduced_ray[*k];
            }
        }
        for g in &self.groups {
            let dy: f64 = g.structural.iter().map(|&(j, a)| a * r[j]).sum();
            for mem in &g.members {
                r[mem.v_col] = (-dy).max(0.0);
                r[mem.z_col] = dy.max(0.0);
            }
        }
        r
    }

    /// Maps reduced row multipliers (minimization form) to the original rows.
    pub fn duals(&self, reduced_y: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.orig_rows];
        for (i, mapped) in self.row_map.iter().enumerate() {
            if let Some(r) = mapped {
                y[i] = reduced_y[*r];
            }
        }
        for g in &self.groups {
            let lambda = reduced_y[g.reduced_row];
            let act: f64 = g.structural.iter().map(|&(j, a)| a * x[j]).sum();
            let scale = 1e-9 * (1.0 + act.abs());
            let mut remaining = lambda;
            let mut ties = Vec::new();
            for mem in &g.members {
                if mem.delta > act + scale {
                    y[mem.row] = mem.cv;
                    remaining -= mem.cv;
                } else if mem.delta < act - scale {
                    y[mem.row] = -mem.cz;
                    remaining += mem.cz;
                } else {
                    ties.push(mem);
                }
            }
            for mem in ties {
                let v = remaining.clamp(-mem.cz, mem.cv);
                y[mem.row] = v;
                remaining -= v;
            }
        }
        y
    }
}
