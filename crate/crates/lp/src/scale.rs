//! Geometric row/column equilibration with power-of-two factors.

use crate::simplex::CompForm;

#[derive(Clone, Debug)]
pub struct Scaling {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

fn pow2(s: f64) -> f64 {
    if !s.is_finite() || s <= 0.0 {
        1.0
    } else {
        2f64.powi(s.log2().round().clamp(-60.0, 60.0) as i32)
    }
}

impl Scaling {
    pub fn identity(p: &CompForm) -> Scaling {
        Scaling { row: vec![1.0; p.m], col: vec![1.0; p.n] }
    }

    /// Alternating geometric-mean passes over rows and columns.
    pub fn geometric(p: &CompForm, passes: usize) -> Scaling {
        let mut sc = Scaling::identity(p);
        for _ in 0..passes {
            let mut rmin = vec![f64::INFINITY; p.m];
            let mut rmax = vec![0.0f64; p.m];
            for j in 0..p.n {
                for k in p.col_ptr[j]..p.col_ptr[j + 1] {
                    let i = p.row_idx[k];
                    let a = (p.values[k] * sc.row[i] * sc.col[j]).abs();
                    rmin[i] = rmin[i].min(a);
                    rmax[i] = rmax[i].max(a);
                }
            }
            for i in 0..p.m {
                if rmax[i] > 0.0 {
                    sc.row[i] *= pow2(1.0 / (rmin[i] * rmax[i]).sqrt());
                }
            }
            for j in 0..p.n {
                let (mut cmin, mut cmax) = (f64::INFINITY, 0.0f64);
                for k in p.col_ptr[j]..p.col_ptr[j + 1] {
                    let a = (p.values[k] * sc.row[p.row_idx[k]] * sc.col[j]).abs();
                    cmin = cmin.min(a);
                    cmax = cmax.max(a);
                }
                if cmax > 0.0 {
                    sc.col[j] *= pow2(1.0 / (cmin * cmax).sqrt());
                }
            }
        }
        sc
    }

    pub fn apply(&self, p: &CompForm) -> CompForm {
        let mut q = p.clone();
        for j in 0..p.n {
            for k in p.col_ptr[j]..p.col_ptr[j + 1] {
                q.values[k] = p.values[k] * self.row[p.row_idx[k]] * self.col[j];
            }
            q.cost[j] = p.cost[j] * self.col[j];
            q.lower[j] = p.lower[j] / self.col[j];
            q.upper[j] = p.upper[j] / self.col[j];
        }
        for i in 0..p.m {
            q.lower[p.n + i] = p.lower[p.n + i] * self.row[i];
            q.upper[p.n + i] = p.upper[p.n + i] * self.row[i];
        }
        q
    }

    /// Unscales primal values of all `n + m` variables in place.
    pub fn unscale_primal(&self, x: &mut [f64]) {
        let n = self.col.len();
        for (j, c) in self.col.iter().enumerate() {
            x[j] *= c;
        }
        for (i, r) in self.row.iter().enumerate() {
            x[n + i] /= r;
        }
    }

    pub fn unscale_duals(&self, y: &mut [f64]) {
        for (i, r) in self.row.iter().enumerate() {
            y[i] *= r;
        }
    }
}
