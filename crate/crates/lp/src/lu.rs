//! Sparse LU factorization of a square basis matrix.
//!
//! Right-looking elimination that first peels off column and row singletons and
//! then picks pivots in the remaining nucleus by a Markowitz count with
//! threshold partial pivoting.

const PIVOT_THRESHOLD: f64 = 0.1;
const TINY: f64 = 1e-11;
const MARKOWITZ_SEARCH_COLS: usize = 4;

/// Unpivoted rows and basis positions left over when the matrix is singular.
#[derive(Debug, Clone, PartialEq)]
pub struct Singular {
    pub rows: Vec<usize>,
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct LuFactors {
    m: usize,
    pivot_rows: Vec<usize>,
    pivot_cols: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
}

impl LuFactors {
    /// Factorizes the `m x m` matrix whose column `k` is `columns[k]` (row, value pairs).
    pub fn factorize(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<LuFactors, Singular> {
        assert_eq!(columns.len(), m);
        let mut cols: Vec<Vec<(usize, f64)>> = columns
            .iter()
            .map(|c| c.iter().copied().filter(|e| e.1 != 0.0).collect())
            .collect();
        let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, col) in cols.iter().enumerate() {
            for &(i, _) in col {
                row_cols[i].push(j);
            }
        }
        let mut row_count: Vec<usize> = row_cols.iter().map(|r| r.len()).collect();
        let mut col_count: Vec<usize> = cols.iter().map(|c| c.len()).collect();
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];

        let mut col_singletons: Vec<usize> = (0..m).filter(|&j| col_count[j] == 1).collect();
        let mut row_singletons: Vec<usize> = (0..m).filter(|&i| row_count[i] == 1).collect();

        let mut f = LuFactors {
            m,
            pivot_rows: Vec::with_capacity(m),
            pivot_cols: Vec::with_capacity(m),
            l_start: vec![0],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_diag: Vec::with_capacity(m),
            u_start: vec![0],
            u_idx: Vec::new(),
            u_val: Vec::new(),
        };
        let mut pos = vec![usize::MAX; m];

        while f.pivot_rows.len() < m {
            let mut choice: Option<(usize, usize)> = None;
            while let Some(j) = col_singletons.pop() {
                if col_done[j] || col_count[j] != 1 {
                    continue;
                }
                let (i, v) = cols[j][0];
                if v.abs() > TINY {
                    choice = Some((i, j));
                    break;
                }
            }
            if choice.is_none() {
                while let Some(i) = row_singletons.pop() {
                    if row_done[i] || row_count[i] != 1 {
                        continue;
                    }
                    let Some(j) = row_cols[i]
                        .iter()
                        .copied()
                        .find(|&j| !col_done[j] && cols[j].iter().any(|e| e.0 == i))
                    else {
                        continue;
                    };
                    let cmax = cols[j].iter().fold(0.0f64, |a, e| a.max(e.1.abs()));
                    let v = cols[j].iter().find(|e| e.0 == i).unwrap().1;
                    if v.abs() > TINY && v.abs() >= PIVOT_THRESHOLD * cmax {
                        choice = Some((i, j));
                        break;
                    }
                }
            }
            if choice.is_none() {
                choice = markowitz_pivot(&cols, &col_done, &row_count, &col_count);
            }
            let Some((r, c)) = choice else {
                break;
            };

            // Eliminate with pivot (r, c).
            let pivot = cols[c].iter().find(|e| e.0 == r).unwrap().1;
            let lbeg = f.l_idx.len();
            for &(i, v) in &cols[c] {
                if i != r {
                    f.l_idx.push(i);
                    f.l_val.push(v / pivot);
                    row_count[i] -= 1;
                    if row_count[i] == 1 {
                        row_singletons.push(i);
                    }
                }
            }
            f.l_start.push(f.l_idx.len());
            col_done[c] = true;
            row_done[r] = true;

            let mut row_js = std::mem::take(&mut row_cols[r]);
            row_js.sort_unstable();
            row_js.dedup();
            for &j in &row_js {
                if col_done[j] {
                    continue;
                }
                let Some(k) = cols[j].iter().position(|e| e.0 == r) else {
                    continue;
                };
                let urj = cols[j].swap_remove(k).1;
                col_count[j] -= 1;
                f.u_idx.push(j);
                f.u_val.push(urj);
                if f.l_idx.len() > lbeg {
                    for (k, &(i, _)) in cols[j].iter().enumerate() {
                        pos[i] = k;
                    }
                    for t in lbeg..f.l_idx.len() {
                        let i = f.l_idx[t];
                        let delta = -f.l_val[t] * urj;
                        if pos[i] != usize::MAX {
                            cols[j][pos[i]].1 += delta;
                        } else {
                            pos[i] = cols[j].len();
                            cols[j].push((i, delta));
                            row_cols[i].push(j);
                            row_count[i] += 1;
                            col_count[j] += 1;
                        }
                    }
                    for &(i, _) in &cols[j] {
                        pos[i] = usize::MAX;
                    }
                }
                if col_count[j] == 1 {
                    col_singletons.push(j);
                }
            }
            f.u_start.push(f.u_idx.len());
            f.u_diag.push(pivot);
            f.pivot_rows.push(r);
            f.pivot_cols.push(c);
            cols[c].clear();
        }

        if f.pivot_rows.len() < m {
            return Err(Singular {
                rows: (0..m).filter(|&i| !row_done[i]).collect(),
                positions: (0..m).filter(|&j| !col_done[j]).collect(),
            });
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// Solves `B x = b` in place: on entry `b` is indexed by rows, on exit by basis positions.
    pub fn ftran(&self, b: &mut [f64], work: &mut [f64]) {
        for k in 0..self.m {
            let v = b[self.pivot_rows[k]];
            if v != 0.0 {
                for t in self.l_start[k]..self.l_start[k + 1] {
                    b[self.l_idx[t]] -= self.l_val[t] * v;
                }
            }
        }
        for k in (0..self.m).rev() {
            let mut v = b[self.pivot_rows[k]];
            for t in self.u_start[k]..self.u_start[k + 1] {
                v -= self.u_val[t] * work[self.u_idx[t]];
            }
            work[self.pivot_cols[k]] = v / self.u_diag[k];
        }
        b.copy_from_slice(work);
    }

    /// Solves `y' B = g'` in place: on entry `g` is indexed by basis positions, on exit by rows.
    pub fn btran(&self, g: &mut [f64], work: &mut [f64]) {
        for k in 0..self.m {
            let w = g[self.pivot_cols[k]] / self.u_diag[k];
            work[self.pivot_rows[k]] = w;
            if w != 0.0 {
                for t in self.u_start[k]..self.u_start[k + 1] {
                    g[self.u_idx[t]] -= self.u_val[t] * w;
                }
            }
        }
        for k in (0..self.m).rev() {
            let r = self.pivot_rows[k];
            let mut v = work[r];
            for t in self.l_start[k]..self.l_start[k + 1] {
                v -= self.l_val[t] * work[self.l_idx[t]];
            }
            work[r] = v;
        }
        g.copy_from_slice(work);
    }

    pub fn nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m
    }
}

fn markowitz_pivot(
    cols: &[Vec<(usize, f64)>],
    col_done: &[bool],
    row_count: &[usize],
    col_count: &[usize],
) -> Option<(usize, usize)> {
    // Pick the few active columns with the smallest counts.
    let mut best_cols: Vec<usize> = Vec::with_capacity(MARKOWITZ_SEARCH_COLS + 1);
    for j in 0..cols.len() {
        if col_done[j] || col_count[j] == 0 {
            continue;
        }
        let at = best_cols.partition_point(|&b| col_count[b] <= col_count[j]);
        if at < MARKOWITZ_SEARCH_COLS {
            best_cols.insert(at, j);
            best_cols.truncate(MARKOWITZ_SEARCH_COLS);
        }
    }
    let mut best: Option<(usize, usize, usize, f64)> = None;
    for &j in &best_cols {
        let cmax = cols[j].iter().fold(0.0f64, |a, e| a.max(e.1.abs()));
        if cmax <= TINY {
            continue;
        }
        for &(i, v) in &cols[j] {
            if v.abs() < PIVOT_THRESHOLD * cmax || v.abs() <= TINY {
                continue;
            }
            let cost = (row_count[i] - 1) * (col_count[j] - 1);
            let better = match best {
                None => true,
                Some((_, _, bc, bv)) => cost < bc || (cost == bc && v.abs() > bv),
            };
            if better {
                best = Some((i, j, cost, v.abs()));
            }
        }
    }
    best.map(|(i, j, _, _)| (i, j))
}
