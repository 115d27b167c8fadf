//! In-memory representation of a linear program.

use crate::error::LpError;

/// Optimization direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Row sense of a linear constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

impl RowSense {
    /// The MPS row-type letter.
    pub fn mps_code(self) -> char {
        match self {
            RowSense::Le => 'L',
            RowSense::Eq => 'E',
            RowSense::Ge => 'G',
        }
    }
}

/// A linear program in column-compressed form:
///
/// ```text
/// opt  c'x
/// s.t. a_i'x  (<=|=|>=)  b_i
///      l <= x <= u
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub name: String,
    pub sense: Sense,
    pub col_names: Vec<String>,
    pub objective: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub row_names: Vec<String>,
    pub row_senses: Vec<RowSense>,
    pub rhs: Vec<f64>,
    /// Column pointers into `row_idx`/`values` (length `num_cols + 1`).
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl LinearProgram {
    pub fn num_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries `(row, value)` of column `j`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Row-major copy of the constraint matrix: for each row, `(col, value)` pairs in column order.
    pub fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); self.num_rows()];
        for j in 0..self.num_cols() {
            for (i, v) in self.column(j) {
                rows[i].push((j, v));
            }
        }
        rows
    }

    /// Row activities `A x`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.num_rows()];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (i, v) in self.column(j) {
                    act[i] += v * xj;
                }
            }
        }
        act
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`, each scaled by `1 + |bound|`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.num_cols() {
            let (l, u) = (self.col_lower[j], self.col_upper[j]);
            if x[j] < l {
                worst = worst.max((l - x[j]) / (1.0 + l.abs()));
            }
            if x[j] > u {
                worst = worst.max((x[j] - u) / (1.0 + u.abs()));
            }
        }
        for (i, a) in self.activities(x).into_iter().enumerate() {
            let b = self.rhs[i];
            let viol = match self.row_senses[i] {
                RowSense::Le => (a - b).max(0.0),
                RowSense::Ge => (b - a).max(0.0),
                RowSense::Eq => (a - b).abs(),
            };
            worst = worst.max(viol / (1.0 + b.abs()));
        }
        worst
    }

    /// A copy with rows reordered so that new row `k` is old row `perm[k]`.
    pub fn permute_rows(&self, perm: &[usize]) -> LinearProgram {
        assert_eq!(perm.len(), self.num_rows());
        let mut inverse = vec![0; perm.len()];
        for (k, &old) in perm.iter().enumerate() {
            inverse[old] = k;
        }
        let mut out = self.clone();
        out.row_names = perm.iter().map(|&i| self.row_names[i].clone()).collect();
        out.row_senses = perm.iter().map(|&i| self.row_senses[i]).collect();
        out.rhs = perm.iter().map(|&i| self.rhs[i]).collect();
        for j in 0..self.num_cols() {
            let range = self.col_ptr[j]..self.col_ptr[j + 1];
            let mut entries: Vec<(usize, f64)> =
                self.column(j).map(|(i, v)| (inverse[i], v)).collect();
            entries.sort_by_key(|e| e.0);
            for (k, (i, v)) in range.zip(entries) {
                out.row_idx[k] = i;
                out.values[k] = v;
            }
        }
        out
    }

    /// Sanity checks on shapes, bounds and coefficient finiteness.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_cols();
        let m = self.num_rows();
        if self.col_lower.len() != n
            || self.col_upper.len() != n
            || self.col_names.len() != n
            || self.col_ptr.len() != n + 1
        {
            return Err(LpError::Malformed("column arrays have inconsistent lengths".into()));
        }
        if self.row_names.len() != m || self.row_senses.len() != m {
            return Err(LpError::Malformed("row arrays have inconsistent lengths".into()));
        }
        if self.row_idx.len() != self.values.len() || *self.col_ptr.last().unwrap() != self.values.len()
        {
            return Err(LpError::Malformed("matrix arrays have inconsistent lengths".into()));
        }
        for j in 0..n {
            if self.col_lower[j] > self.col_upper[j] || self.col_lower[j].is_nan() || self.col_upper[j].is_nan() {
                return Err(LpError::Malformed(format!(
                    "column {} has bounds [{}, {}]",
                    self.col_names[j], self.col_lower[j], self.col_upper[j]
                )));
            }
            if !self.objective[j].is_finite() {
                return Err(LpError::Malformed(format!("column {} has non-finite cost", self.col_names[j])));
            }
        }
        if let Some(i) = self.row_idx.iter().find(|&&i| i >= m) {
            return Err(LpError::Malformed(format!("row index {i} out of range")));
        }
        if self.values.iter().any(|v| !v.is_finite()) || self.rhs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Malformed("non-finite coefficient".into()));
        }
        Ok(())
    }
}

/// Incremental builder: add columns, then rows referencing them.
#[derive(Clone, Debug)]
pub struct LpBuilder {
    name: String,
    sense: Sense,
    col_names: Vec<String>,
    objective: Vec<f64>,
    col_lower: Vec<f64>,
    col_upper: Vec<f64>,
    row_names: Vec<String>,
    row_senses: Vec<RowSense>,
    rhs: Vec<f64>,
    triplets: Vec<(usize, usize, f64)>,
}

impl LpBuilder {
    pub fn new(name: impl Into<String>, sense: Sense) -> Self {
        LpBuilder {
            name: name.into(),
            sense,
            col_names: Vec::new(),
            objective: Vec::new(),
            col_lower: Vec::new(),
            col_upper: Vec::new(),
            row_names: Vec::new(),
            row_senses: Vec::new(),
            rhs: Vec::new(),
            triplets: Vec::new(),
        }
    }

    pub fn add_column(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        self.col_names.push(name.into());
        self.objective.push(cost);
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.objective.len() - 1
    }

    /// Adds a row; duplicate column entries are summed and zeros dropped.
    pub fn add_row(&mut self, name: impl Into<String>, sense: RowSense, rhs: f64, entries: &[(usize, f64)]) -> usize {
        let row = self.rhs.len();
        self.row_names.push(name.into());
        self.row_senses.push(sense);
        self.rhs.push(rhs);
        let mut sorted: Vec<(usize, f64)> = entries.to_vec();
        sorted.sort_by_key(|e| e.0);
        let mut k = 0;
        while k < sorted.len() {
            let col = sorted[k].0;
            let mut v = 0.0;
            while k < sorted.len() && sorted[k].0 == col {
                v += sorted[k].1;
                k += 1;
            }
            if v != 0.0 {
                assert!(col < self.objective.len(), "row references unknown column {col}");
                self.triplets.push((row, col, v));
            }
        }
        row
    }

    pub fn num_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn set_cost(&mut self, col: usize, cost: f64) {
        self.objective[col] = cost;
    }

    pub fn build(self) -> LinearProgram {
        let n = self.objective.len();
        let mut counts = vec![0usize; n + 1];
        for &(_, c, _) in &self.triplets {
            counts[c + 1] += 1;
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0; self.triplets.len()];
        let mut values = vec![0.0; self.triplets.len()];
        // triplets are generated row by row, so each column stays sorted by row
        for &(r, c, v) in &self.triplets {
            let k = next[c];
            row_idx[k] = r;
            values[k] = v;
            next[c] += 1;
        }
        LinearProgram {
            name: self.name,
            sense: self.sense,
            col_names: self.col_names,
            objective: self.objective,
            col_lower: self.col_lower,
            col_upper: self.col_upper,
            row_names: self.row_names,
            row_senses: self.row_senses,
            rhs: self.rhs,
            col_ptr,
            row_idx,
            values,
        }
    }
}
