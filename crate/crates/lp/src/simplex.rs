//! Bounded-variable primal revised simplex on the computational form
//!
//! ```text
//! min c'x   s.t.  A x - r = 0,   l <= (x, r) <= u
//! ```
//!
//! where `r` holds one logical variable per row. The basis is kept as an LU
//! factorization plus a product-form eta file that is rebuilt every
//! `refactor_interval` pivots.

use crate::lu::LuFactors;

/// Status of one variable in a basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct EngineOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub max_iters: usize,
    pub refactor_interval: usize,
    pub stall_threshold: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iters: 2_000_000,
            refactor_interval: 100,
            stall_threshold: 50,
        }
    }
}

/// Minimization problem in computational form (structural part only; logicals are implicit).
#[derive(Clone, Debug)]
pub struct CompForm {
    pub n: usize,
    pub m: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
    /// Costs of the `n` structural columns.
    pub cost: Vec<f64>,
    /// Bounds of all `n + m` variables (structurals, then logicals).
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CompForm {
    fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }
}

pub struct EngineResult {
    pub outcome: Outcome,
    /// Values of all `n + m` variables.
    pub x: Vec<f64>,
    /// Simplex multipliers (one per row).
    pub y: Vec<f64>,
    /// Reduced costs of all `n + m` variables.
    pub d: Vec<f64>,
    pub status: Vec<VarStatus>,
    pub iterations: usize,
    /// Rows with nonzero phase-one multipliers when infeasible.
    pub infeasible_rows: Vec<usize>,
    /// Direction of unboundedness over the `n` structural variables.
    pub ray: Vec<f64>,
}

struct Eta {
    pos: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

struct Engine<'a> {
    p: &'a CompForm,
    opts: &'a EngineOptions,
    n: usize,
    m: usize,
    row_ptr: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    x: Vec<f64>,
    d: Vec<f64>,
    lu: Option<LuFactors>,
    etas: Vec<Eta>,
    work: Vec<f64>,
    iterations: usize,
    degenerate_run: usize,
    bland: bool,
    last_y: Vec<f64>,
    ray: Option<(usize, f64, Vec<f64>)>,
}

enum PhaseEnd {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    LostFeasibility,
}

/// Lower/upper bound used by the ratio test for a basic variable.
#[derive(Clone, Copy)]
struct RatioBounds {
    lo: f64,
    hi: f64,
}

impl<'a> Engine<'a> {
    fn new(p: &'a CompForm, opts: &'a EngineOptions) -> Self {
        let (n, m) = (p.n, p.m);
        let mut counts = vec![0usize; m + 1];
        for &i in &p.row_idx {
            counts[i + 1] += 1;
        }
        for i in 0..m {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut row_col = vec![0; p.row_idx.len()];
        let mut row_val = vec![0.0; p.row_idx.len()];
        for j in 0..n {
            let (idx, val) = p.column(j);
            for (&i, &v) in idx.iter().zip(val) {
                row_col[next[i]] = j;
                row_val[next[i]] = v;
                next[i] += 1;
            }
        }
        Engine {
            p,
            opts,
            n,
            m,
            row_ptr,
            row_col,
            row_val,
            status: vec![VarStatus::AtLower; n + m],
            head: Vec::with_capacity(m),
            x: vec![0.0; n + m],
            d: vec![0.0; n + m],
            lu: None,
            etas: Vec::new(),
            work: vec![0.0; m],
            iterations: 0,
            degenerate_run: 0,
            bland: false,
            last_y: vec![0.0; m],
            ray: None,
        }
    }

    fn cost(&self, j: usize) -> f64 {
        if j < self.n {
            self.p.cost[j]
        } else {
            0.0
        }
    }

    /// Column of variable `j` in the full matrix `[A | -I]`.
    fn full_column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            let (idx, val) = self.p.column(j);
            idx.iter().copied().zip(val.iter().copied()).collect()
        } else {
            vec![(j - self.n, -1.0)]
        }
    }

    fn nonbasic_status(&self, j: usize) -> VarStatus {
        let (l, u) = (self.p.lower[j], self.p.upper[j]);
        if l.is_finite() {
            VarStatus::AtLower
        } else if u.is_finite() {
            VarStatus::AtUpper
        } else {
            VarStatus::Zero
        }
    }

    fn nonbasic_value(&self, j: usize, s: VarStatus) -> f64 {
        match s {
            VarStatus::AtLower => self.p.lower[j],
            VarStatus::AtUpper => self.p.upper[j],
            VarStatus::Zero | VarStatus::Basic => 0.0,
        }
    }

    /// Slack basis with a singleton crash for rows whose logical would start infeasible.
    fn crash_basis(&mut self) {
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            self.status[j] = self.nonbasic_status(j);
            self.x[j] = self.nonbasic_value(j, self.status[j]);
        }
        let mut activity = vec![0.0; m];
        for j in 0..n {
            if self.x[j] != 0.0 {
                let (idx, val) = self.p.column(j);
                for (&i, &v) in idx.iter().zip(val) {
                    activity[i] += v * self.x[j];
                }
            }
        }
        let mut col_len = vec![0usize; n];
        for (j, len) in col_len.iter_mut().enumerate() {
            *len = self.p.col_ptr[j + 1] - self.p.col_ptr[j];
        }
        self.head.clear();
        for i in 0..m {
            let r = n + i;
            let (lo, hi) = (self.p.lower[r], self.p.upper[r]);
            let a = activity[i];
            let tol = self.opts.feas_tol * (1.0 + a.abs());
            if a >= lo - tol && a <= hi + tol {
                self.status[r] = VarStatus::Basic;
                self.x[r] = a;
                self.head.push(r);
                continue;
            }
            let target = if a < lo { lo } else { hi };
            let mut chosen = None;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.row_col[k];
                if col_len[j] != 1 || self.status[j] == VarStatus::Basic {
                    continue;
                }
                let v = self.row_val[k];
                let xj = self.x[j] + (target - a) / v;
                if xj >= self.p.lower[j] - tol && xj <= self.p.upper[j] + tol {
                    chosen = Some((j, xj));
                    break;
                }
            }
            match chosen {
                Some((j, xj)) => {
                    self.status[j] = VarStatus::Basic;
                    self.x[j] = xj;
                    self.head.push(j);
                    self.status[r] = if target == lo { VarStatus::AtLower } else { VarStatus::AtUpper };
                    self.x[r] = target;
                }
                None => {
                    self.status[r] = VarStatus::Basic;
                    self.x[r] = a;
                    self.head.push(r);
                }
            }
        }
    }

    /// Installs a warm-start status vector; falls back to the crash basis when it is unusable.
    fn install_basis(&mut self, statuses: &[VarStatus]) -> bool {
        let (n, m) = (self.n, self.m);
        if statuses.len() != n + m || statuses.iter().filter(|&&s| s == VarStatus::Basic).count() != m {
            return false;
        }
        self.head.clear();
        for j in 0..n + m {
            let s = statuses[j];
            let (l, u) = (self.p.lower[j], self.p.upper[j]);
            let s = match s {
                VarStatus::AtLower if !l.is_finite() => self.nonbasic_status(j),
                VarStatus::AtUpper if !u.is_finite() => self.nonbasic_status(j),
                VarStatus::Zero if l.is_finite() || u.is_finite() => self.nonbasic_status(j),
                other => other,
            };
            self.status[j] = s;
            if s == VarStatus::Basic {
                self.head.push(j);
            } else {
                self.x[j] = self.nonbasic_value(j, s);
            }
        }
        true
    }

    /// Factorizes the current basis, repairing singular positions with logicals.
    fn refactor(&mut self) {
        loop {
            let cols: Vec<Vec<(usize, f64)>> = self.head.iter().map(|&j| self.full_column(j)).collect();
            match LuFactors::factorize(self.m, &cols) {
                Ok(f) => {
                    self.lu = Some(f);
                    self.etas.clear();
                    return;
                }
                Err(sing) => {
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.head[pos];
                        let s = self.nonbasic_status(out);
                        self.status[out] = s;
                        self.x[out] = self.nonbasic_value(out, s);
                        let logical = self.n + row;
                        self.status[logical] = VarStatus::Basic;
                        self.head[pos] = logical;
                    }
                }
            }
        }
    }

    fn ftran(&mut self, b: &mut [f64]) {
        let lu = self.lu.as_ref().expect("factorized");
        lu.ftran(b, &mut self.work);
        for e in &self.etas {
            let xp = b[e.pos] / e.pivot;
            if xp != 0.0 {
                for (&i, &v) in e.idx.iter().zip(&e.val) {
                    b[i] -= v * xp;
                }
            }
            b[e.pos] = xp;
        }
    }

    fn btran(&mut self, g: &mut [f64]) {
        for e in self.etas.iter().rev() {
            let mut s = g[e.pos];
            for (&i, &v) in e.idx.iter().zip(&e.val) {
                s -= v * g[i];
            }
            g[e.pos] = s / e.pivot;
        }
        let lu = self.lu.as_ref().expect("factorized");
        lu.btran(g, &mut self.work);
    }

    /// Recomputes basic values from the nonbasic ones.
    fn compute_basics(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic || self.x[j] == 0.0 {
                continue;
            }
            if j < self.n {
                let (idx, val) = self.p.column(j);
                for (&i, &v) in idx.iter().zip(val) {
                    rhs[i] -= v * self.x[j];
                }
            } else {
                rhs[j - self.n] += self.x[j];
            }
        }
        self.ftran(&mut rhs);
        for (k, &j) in self.head.iter().enumerate() {
            self.x[j] = rhs[k];
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        let (l, u) = (self.p.lower[j], self.p.upper[j]);
        if v < l {
            l - v
        } else if v > u {
            v - u
        } else {
            0.0
        }
    }

    fn tol_for(&self, j: usize) -> f64 {
        let b = if self.x[j] < self.p.lower[j] { self.p.lower[j] } else { self.p.upper[j] };
        self.opts.feas_tol * (1.0 + if b.is_finite() { b.abs() } else { 0.0 })
    }

    fn primal_infeasible(&self) -> bool {
        self.head.iter().any(|&j| self.infeasibility(j) > self.tol_for(j))
    }

    /// Multipliers for the given basic cost vector (indexed by position).
    fn multipliers(&mut self, cb: Vec<f64>) -> Vec<f64> {
        let mut y = cb;
        self.btran(&mut y);
        y
    }

    /// Reduced costs `c_j - y'a_j` for every nonbasic variable (basics get 0).
    fn price_all(&mut self, y: &[f64], phase_one: bool) {
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic {
                self.d[j] = 0.0;
                continue;
            }
            let c = if phase_one { 0.0 } else { self.cost(j) };
            self.d[j] = if j < self.n {
                let (idx, val) = self.p.column(j);
                c - idx.iter().zip(val).map(|(&i, &v)| y[i] * v).sum::<f64>()
            } else {
                c + y[j - self.n]
            };
        }
    }

    /// Direction (+1 increase, -1 decrease) in which nonbasic `j` improves the objective.
    fn improving_direction(&self, j: usize) -> Option<f64> {
        let dj = self.d[j];
        let tol = self.opts.opt_tol;
        match self.status[j] {
            VarStatus::Basic => None,
            _ if self.p.lower[j] == self.p.upper[j] => None,
            VarStatus::AtLower if dj < -tol => Some(1.0),
            VarStatus::AtUpper if dj > tol => Some(-1.0),
            VarStatus::Zero if dj.abs() > tol => Some(if dj < 0.0 { 1.0 } else { -1.0 }),
            _ => None,
        }
    }

    fn choose_entering(&self) -> Option<(usize, f64)> {
        if self.bland {
            return (0..self.n + self.m).find_map(|j| self.improving_direction(j).map(|dir| (j, dir)));
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n + self.m {
            if let Some(dir) = self.improving_direction(j) {
                let score = self.d[j].abs();
                if best.is_none_or(|b| score > b.2) {
                    best = Some((j, dir, score));
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ratio_bounds(&self, j: usize, phase_one: bool) -> RatioBounds {
        let (l, u) = (self.p.lower[j], self.p.upper[j]);
        if phase_one {
            let v = self.x[j];
            let tol = self.tol_for(j);
            if v < l - tol {
                return RatioBounds { lo: f64::NEG_INFINITY, hi: l };
            }
            if v > u + tol {
                return RatioBounds { lo: u, hi: f64::INFINITY };
            }
        }
        RatioBounds { lo: l, hi: u }
    }

    /// Harris two-pass ratio test (plain minimum ratio with index tie-break under Bland).
    /// Returns `(position, step, leaves_at_upper)` or `None` when no basic variable blocks.
    fn ratio_test(&self, alpha: &[f64], dir: f64, phase_one: bool) -> Option<(usize, f64, bool)> {
        let ptol = self.opts.pivot_tol;
        let mut theta_max = f64::INFINITY;
        let relax = |j: usize| self.opts.feas_tol * (1.0 + self.x[j].abs());
        if !self.bland {
            for (k, &j) in self.head.iter().enumerate() {
                let rate = -dir * alpha[k];
                if rate.abs() <= ptol {
                    continue;
                }
                let b = self.ratio_bounds(j, phase_one);
                let lim = if rate > 0.0 {
                    (b.hi + relax(j) - self.x[j]) / rate
                } else {
                    (b.lo - relax(j) - self.x[j]) / rate
                };
                if lim < theta_max {
                    theta_max = lim;
                }
            }
            if !theta_max.is_finite() {
                return None;
            }
        }
        let mut best: Option<(usize, f64, bool, f64)> = None;
        for (k, &j) in self.head.iter().enumerate() {
            let rate = -dir * alpha[k];
            if rate.abs() <= ptol {
                continue;
            }
            let b = self.ratio_bounds(j, phase_one);
            let (lim, upper) = if rate > 0.0 {
                ((b.hi - self.x[j]) / rate, true)
            } else {
                ((b.lo - self.x[j]) / rate, false)
            };
            if !lim.is_finite() {
                continue;
            }
            let lim = lim.max(0.0);
            if self.bland {
                let better = match best {
                    None => true,
                    Some((bk, bl, _, _)) => {
                        lim < bl - 1e-12 || (lim <= bl + 1e-12 && j < self.head[bk])
                    }
                };
                if better {
                    best = Some((k, lim, upper, rate.abs()));
                }
            } else if lim <= theta_max {
                let better = match best {
                    None => true,
                    Some((_, _, _, br)) => rate.abs() > br,
                };
                if better {
                    best = Some((k, lim, upper, rate.abs()));
                }
            }
        }
        best.map(|(k, lim, upper, _)| (k, lim, upper))
    }

    /// Row `r` of `B^-1 [A | -I]` restricted to nonbasic variables, as a sparse list.
    fn pivot_row(&mut self, r: usize) -> Vec<(usize, f64)> {
        let mut rho = vec![0.0; self.m];
        rho[r] = 1.0;
        self.btran(&mut rho);
        let mut acc = vec![0.0; self.n];
        let mut touched = Vec::new();
        let mut out = Vec::new();
        for (i, &ri) in rho.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            let logical = self.n + i;
            if self.status[logical] != VarStatus::Basic {
                out.push((logical, -ri));
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.row_col[k];
                if acc[j] == 0.0 {
                    touched.push(j);
                }
                acc[j] += ri * self.row_val[k];
                if acc[j] == 0.0 {
                    acc[j] = f64::MIN_POSITIVE;
                }
            }
        }
        for j in touched {
            if self.status[j] != VarStatus::Basic {
                out.push((j, acc[j]));
            }
        }
        out
    }

    /// Runs simplex iterations for one phase.
    fn run_phase(&mut self, phase_one: bool) -> PhaseEnd {
        let mut since_refactor = 0usize;
        let mut y;
        if !phase_one {
            let cb: Vec<f64> = self.head.iter().map(|&j| self.cost(j)).collect();
            y = self.multipliers(cb);
            self.price_all(&y, false);
        }
        loop {
            if self.iterations >= self.opts.max_iters {
                return PhaseEnd::IterationLimit;
            }
            if since_refactor >= self.opts.refactor_interval {
                self.refactor();
                self.compute_basics();
                since_refactor = 0;
                if !phase_one {
                    if self.primal_infeasible() {
                        return PhaseEnd::LostFeasibility;
                    }
                    let cb: Vec<f64> = self.head.iter().map(|&j| self.cost(j)).collect();
                    y = self.multipliers(cb);
                    self.price_all(&y, false);
                }
            }
            if phase_one {
                if !self.primal_infeasible() {
                    return PhaseEnd::Optimal;
                }
                let cb: Vec<f64> = self
                    .head
                    .iter()
                    .map(|&j| {
                        let tol = self.tol_for(j);
                        if self.x[j] < self.p.lower[j] - tol {
                            -1.0
                        } else if self.x[j] > self.p.upper[j] + tol {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                y = self.multipliers(cb);
                self.price_all(&y, true);
                self.last_y.clone_from(&y);
            }
            let Some((q, dir)) = self.choose_entering() else {
                return if phase_one { PhaseEnd::Infeasible } else { PhaseEnd::Optimal };
            };
            let mut alpha = self.full_column(q).into_iter().fold(vec![0.0; self.m], |mut a, (i, v)| {
                a[i] = v;
                a
            });
            self.ftran(&mut alpha);
            let range = self.p.upper[q] - self.p.lower[q];
            let leave = self.ratio_test(&alpha, dir, phase_one);
            let flip = range.is_finite() && leave.is_none_or(|(_, t, _)| range <= t);
            if leave.is_none() && !flip {
                if phase_one {
                    // cannot happen for a bounded phase-one objective; treat as stall
                    self.refactor();
                    self.compute_basics();
                    since_refactor = 0;
                    continue;
                }
                self.ray = Some((q, dir, alpha));
                return PhaseEnd::Unbounded;
            }
            self.iterations += 1;
            if flip {
                for (k, &j) in self.head.iter().enumerate() {
                    self.x[j] -= dir * range * alpha[k];
                }
                self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.x[q] = self.nonbasic_value(q, self.status[q]);
                self.degenerate_run = 0;
                self.bland = false;
                continue;
            }
            let (r, theta, upper) = leave.unwrap();
            let step = dir * theta;
            if theta <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run >= self.opts.stall_threshold {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }
            let leaving = self.head[r];
            let alpha_r = alpha[r];
            if !phase_one {
                let row = self.pivot_row(r);
                let dq = self.d[q];
                let ratio = dq / alpha_r;
                for &(j, arj) in &row {
                    self.d[j] -= ratio * arj;
                }
                self.d[leaving] = -ratio;
                self.d[q] = 0.0;
            }
            // bounds of the leaving variable as seen by the ratio test, before it moves
            let lb = self.ratio_bounds(leaving, phase_one);
            for (k, &j) in self.head.iter().enumerate() {
                self.x[j] -= step * alpha[k];
            }
            self.x[q] += step;
            self.status[leaving] = if upper { VarStatus::AtUpper } else { VarStatus::AtLower };
            self.x[leaving] = if upper { lb.hi } else { lb.lo };
            if self.p.lower[leaving] == f64::NEG_INFINITY && self.p.upper[leaving] == f64::INFINITY {
                self.status[leaving] = VarStatus::Zero;
            } else if self.x[leaving] == self.p.lower[leaving] {
                self.status[leaving] = VarStatus::AtLower;
            } else if self.x[leaving] == self.p.upper[leaving] {
                self.status[leaving] = VarStatus::AtUpper;
            }
            self.status[q] = VarStatus::Basic;
            self.head[r] = q;
            let (idx, val): (Vec<usize>, Vec<f64>) = alpha
                .iter()
                .enumerate()
                .filter(|&(k, &v)| k != r && v != 0.0)
                .map(|(k, &v)| (k, v))
                .unzip();
            self.etas.push(Eta { pos: r, pivot: alpha_r, idx, val });
            since_refactor += 1;
        }
    }
}

/// Solves the computational form, optionally starting from a previous basis.
pub fn solve(p: &CompForm, opts: &EngineOptions, warm: Option<&[VarStatus]>) -> EngineResult {
    let mut e = Engine::new(p, opts);
    if !warm.is_some_and(|w| e.install_basis(w)) {
        e.crash_basis();
    }
    e.refactor();
    e.compute_basics();
    let mut outcome = Outcome::IterationLimit;
    let mut restarts = 0;
    while restarts < 20 {
        restarts += 1;
        if e.primal_infeasible() {
            match e.run_phase(true) {
                PhaseEnd::Optimal => {}
                PhaseEnd::IterationLimit => {
                    outcome = Outcome::IterationLimit;
                    break;
                }
                _ => {
                    // re-check from a fresh factorization before declaring infeasibility
                    e.refactor();
                    e.compute_basics();
                    if e.primal_infeasible() {
                        outcome = Outcome::Infeasible;
                        break;
                    }
                }
            }
        }
        match e.run_phase(false) {
            PhaseEnd::Optimal => {
                e.refactor();
                e.compute_basics();
                if e.primal_infeasible() {
                    continue;
                }
                let cb: Vec<f64> = e.head.iter().map(|&j| e.cost(j)).collect();
                let y = e.multipliers(cb);
                e.price_all(&y, false);
                if e.choose_entering().is_some() {
                    continue;
                }
                outcome = Outcome::Optimal;
                break;
            }
            PhaseEnd::Unbounded => {
                outcome = Outcome::Unbounded;
                break;
            }
            PhaseEnd::IterationLimit => {
                outcome = Outcome::IterationLimit;
                break;
            }
            PhaseEnd::LostFeasibility | PhaseEnd::Infeasible => continue,
        }
    }

    let cb: Vec<f64> = e.head.iter().map(|&j| e.cost(j)).collect();
    let y = if outcome == Outcome::Infeasible { e.last_y.clone() } else { e.multipliers(cb) };
    if outcome != Outcome::Infeasible {
        e.price_all(&y, false);
    }
    let infeasible_rows = if outcome == Outcome::Infeasible {
        let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut rows: Vec<usize> = (0..e.m).filter(|&i| y[i].abs() > 1e-9 * scale.max(1.0)).collect();
        if rows.is_empty() {
            rows = e
                .head
                .iter()
                .filter(|&&j| j >= e.n && e.infeasibility(j) > e.tol_for(j))
                .map(|&j| j - e.n)
                .collect();
        }
        rows
    } else {
        Vec::new()
    };
    let mut ray = vec![0.0; e.n];
    if let Some((q, dir, alpha)) = e.ray.take() {
        if q < e.n {
            ray[q] = dir;
        }
        for (k, &j) in e.head.iter().enumerate() {
            if j < e.n {
                ray[j] = -dir * alpha[k];
            }
        }
    }
    EngineResult {
        outcome,
        x: e.x,
        y,
        d: e.d,
        status: e.status,
        iterations: e.iterations,
        infeasible_rows,
        ray,
    }
}
