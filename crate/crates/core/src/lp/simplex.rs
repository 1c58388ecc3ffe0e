//! Bounded-variable revised simplex with a composite phase 1, a dual simplex
//! for warm restarts after bound changes, sparse LU basis factors with
//! product-form updates, and power-of-two equilibration.

use super::lu::LuFactors;
use super::{LpError, LpProblem, LpSolution, LpStatus, Sense, VarId, FEAS_TOL, OPT_TOL};

const PIVOT_TOL: f64 = 1.0e-9;
const DROP_TOL: f64 = 1.0e-12;
const DEGEN_STREAK_LIMIT: usize = 40;
const ETA_LIMIT: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VStat {
    Basic,
    AtLb,
    AtUb,
    Free,
}

#[derive(Clone)]
struct Eta {
    q: usize,
    wq: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Clone, Copy)]
enum StepEvent {
    Unblocked,
    Flip,
    Pivot { pos: usize, to_lb: bool },
}

/// Incremental simplex over a fixed constraint matrix; bounds may change
/// between solves, and the basis is reused when it remains dual feasible.
#[derive(Clone)]
pub struct SimplexSolver {
    m: usize,
    n: usize,
    /// Scaled structural columns.
    cols: Vec<Vec<(usize, f64)>>,
    /// Scaled minimize-form costs over structural then logical variables.
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    xval: Vec<f64>,
    stat: Vec<VStat>,
    basis: Vec<usize>,
    pos_of: Vec<usize>,
    rhs: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    obj_scale: f64,
    maximize: bool,
    orig_obj: Vec<f64>,
    factors: LuFactors,
    etas: Vec<Eta>,
    iterations: usize,
    status: Option<LpStatus>,
    warm: bool,
}

fn pow2_near(x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return 1.0;
    }
    let e = x.log2().round();
    (e.clamp(-120.0, 120.0)).exp2()
}

impl SimplexSolver {
    pub fn new(p: &LpProblem) -> Self {
        let m = p.num_rows();
        let n = p.num_vars();
        let n_tot = n + m;

        // Geometric-mean equilibration with power-of-two factors so that
        // scaling is exactly invertible. Integer columns are scaled like any
        // other: integrality is enforced on the unscaled values outside the
        // solver, and leaving these columns unscaled lets rows dominated by
        // bit-rate coefficients crush them below the pricing tolerances.
        let mut row_scale = vec![1.0f64; m];
        let mut col_scale = vec![1.0f64; n];
        for _ in 0..2 {
            let mut rmin = vec![f64::INFINITY; m];
            let mut rmax = vec![0.0f64; m];
            for (i, row) in p.rows().iter().enumerate() {
                for &(v, a) in &row.terms {
                    let s = (a * row_scale[i] * col_scale[v.0]).abs();
                    if s > 0.0 {
                        rmin[i] = rmin[i].min(s);
                        rmax[i] = rmax[i].max(s);
                    }
                }
            }
            for i in 0..m {
                if rmax[i] > 0.0 {
                    row_scale[i] /= pow2_near((rmin[i] * rmax[i]).sqrt());
                }
            }
            let mut cmin = vec![f64::INFINITY; n];
            let mut cmax = vec![0.0f64; n];
            for (i, row) in p.rows().iter().enumerate() {
                for &(v, a) in &row.terms {
                    let s = (a * row_scale[i] * col_scale[v.0]).abs();
                    if s > 0.0 {
                        cmin[v.0] = cmin[v.0].min(s);
                        cmax[v.0] = cmax[v.0].max(s);
                    }
                }
            }
            for j in 0..n {
                if cmax[j] > 0.0 {
                    col_scale[j] /= pow2_near((cmin[j] * cmax[j]).sqrt());
                }
            }
        }

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in p.rows().iter().enumerate() {
            for &(v, a) in &row.terms {
                if a != 0.0 {
                    cols[v.0].push((i, a * row_scale[i] * col_scale[v.0]));
                }
            }
        }

        let sign = if p.maximize { -1.0 } else { 1.0 };
        let mut cost = vec![0.0f64; n_tot];
        let mut cmax = 0.0f64;
        for j in 0..n {
            cost[j] = sign * p.var(VarId(j)).obj * col_scale[j];
            cmax = cmax.max(cost[j].abs());
        }
        let obj_scale = pow2_near(cmax);
        for c in cost.iter_mut() {
            *c /= obj_scale;
        }

        let mut lb = vec![0.0f64; n_tot];
        let mut ub = vec![0.0f64; n_tot];
        for j in 0..n {
            let v = p.var(VarId(j));
            lb[j] = v.lb / col_scale[j];
            ub[j] = v.ub / col_scale[j];
        }
        let mut rhs = vec![0.0f64; m];
        for (i, row) in p.rows().iter().enumerate() {
            rhs[i] = row.rhs * row_scale[i];
            let (l, u) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lb[n + i] = l;
            ub[n + i] = u;
        }

        let mut stat = vec![VStat::AtLb; n_tot];
        let mut xval = vec![0.0f64; n_tot];
        for j in 0..n {
            if lb[j].is_finite() && (lb[j].abs() <= ub[j].abs() || !ub[j].is_finite()) {
                stat[j] = VStat::AtLb;
                xval[j] = lb[j];
            } else if ub[j].is_finite() {
                stat[j] = VStat::AtUb;
                xval[j] = ub[j];
            } else {
                stat[j] = VStat::Free;
                xval[j] = 0.0;
            }
        }
        let mut basis = Vec::with_capacity(m);
        let mut pos_of = vec![usize::MAX; n_tot];
        for i in 0..m {
            basis.push(n + i);
            stat[n + i] = VStat::Basic;
            pos_of[n + i] = i;
        }

        let orig_obj = p.vars().iter().map(|v| v.obj).collect();

        let mut solver = SimplexSolver {
            m,
            n,
            cols,
            cost,
            lb,
            ub,
            xval,
            stat,
            basis,
            pos_of,
            rhs,
            row_scale,
            col_scale,
            obj_scale,
            maximize: p.maximize,
            orig_obj,
            factors: LuFactors::identity(m),
            etas: Vec::new(),
            iterations: 0,
            status: None,
            warm: false,
        };
        solver.recompute_basics();
        solver
    }

    pub fn num_structural(&self) -> usize {
        self.n
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn status(&self) -> Option<LpStatus> {
        self.status
    }

    /// Unscaled value of a structural variable at the current point.
    pub fn value(&self, v: VarId) -> f64 {
        self.xval[v.0] * self.col_scale[v.0]
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.xval[j] * self.col_scale[j]).collect()
    }

    /// Objective of the current point in the problem's own sense.
    pub fn objective(&self) -> f64 {
        (0..self.n)
            .map(|j| self.orig_obj[j] * self.xval[j] * self.col_scale[j])
            .sum()
    }

    /// Changes one variable's bounds (original units). The basis is kept;
    /// nonbasic values snap to the nearest bound.
    pub fn set_var_bounds(&mut self, v: VarId, lb: f64, ub: f64) {
        let j = v.0;
        assert!(j < self.n && lb <= ub);
        self.lb[j] = lb / self.col_scale[j];
        self.ub[j] = ub / self.col_scale[j];
        match self.stat[j] {
            VStat::Basic => {}
            VStat::AtLb => {
                if self.lb[j].is_finite() {
                    self.xval[j] = self.lb[j];
                } else {
                    self.stat[j] = if self.ub[j].is_finite() { VStat::AtUb } else { VStat::Free };
                    self.xval[j] = if self.ub[j].is_finite() { self.ub[j] } else { 0.0 };
                }
            }
            VStat::AtUb => {
                if self.ub[j].is_finite() {
                    self.xval[j] = self.ub[j];
                } else {
                    self.stat[j] = if self.lb[j].is_finite() { VStat::AtLb } else { VStat::Free };
                    self.xval[j] = if self.lb[j].is_finite() { self.lb[j] } else { 0.0 };
                }
            }
            VStat::Free => {
                if self.lb[j].is_finite() || self.ub[j].is_finite() {
                    let to_lb = self.lb[j].is_finite();
                    self.stat[j] = if to_lb { VStat::AtLb } else { VStat::AtUb };
                    self.xval[j] = if to_lb { self.lb[j] } else { self.ub[j] };
                }
            }
        }
        self.status = None;
    }

    fn col_entries(&self, j: usize) -> ColIter<'_> {
        if j < self.n {
            ColIter::Structural(self.cols[j].iter())
        } else {
            ColIter::Logical(Some(j - self.n))
        }
    }

    fn dense_col(&self, j: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.m, 0.0);
        for (i, a) in self.col_entries(j) {
            out[i] = a;
        }
    }

    fn ftran(&self, v: &mut Vec<f64>) {
        self.factors.ftran(v);
        for eta in &self.etas {
            let vq = v[eta.q] / eta.wq;
            if vq != 0.0 {
                for &(i, wi) in &eta.entries {
                    v[i] -= wi * vq;
                }
            }
            v[eta.q] = vq;
        }
    }

    fn btran(&self, v: &mut Vec<f64>) {
        for eta in self.etas.iter().rev() {
            let mut dot = 0.0;
            for &(i, wi) in &eta.entries {
                dot += wi * v[i];
            }
            v[eta.q] = (v[eta.q] - dot) / eta.wq;
        }
        self.factors.btran(v);
    }

    /// Rebuilds the LU factors of the current basis. When the eta updates
    /// have let a dependent column slip in, the basis is repaired in place:
    /// each dependent column is evicted to its nearest bound and the slack
    /// of a row the factorization could not cover takes its position.
    /// Returns whether such a repair happened, since it moves the iterate.
    fn refactor(&mut self) -> Result<bool, LpError> {
        let mut repaired = false;
        for _ in 0..=self.m {
            let basis_cols: Vec<Vec<(usize, f64)>> = self
                .basis
                .iter()
                .map(|&j| self.col_entries(j).collect())
                .collect();
            match LuFactors::factor(self.m, &basis_cols) {
                Ok(f) => {
                    self.factors = f;
                    self.etas.clear();
                    if repaired {
                        self.recompute_basics();
                    }
                    return Ok(repaired);
                }
                Err(d) => {
                    repaired = true;
                    for (&pos, &row) in d.bad_cols.iter().zip(d.free_rows.iter()) {
                        let out = self.basis[pos];
                        let slack = self.n + row;
                        debug_assert_eq!(self.pos_of[slack], usize::MAX);
                        self.basis[pos] = slack;
                        self.pos_of[slack] = pos;
                        self.stat[slack] = VStat::Basic;
                        self.pos_of[out] = usize::MAX;
                        let (lo, hi, x) = (self.lb[out], self.ub[out], self.xval[out]);
                        if lo.is_finite() && (!hi.is_finite() || x - lo <= hi - x) {
                            self.stat[out] = VStat::AtLb;
                            self.xval[out] = lo;
                        } else if hi.is_finite() {
                            self.stat[out] = VStat::AtUb;
                            self.xval[out] = hi;
                        } else {
                            self.stat[out] = VStat::Free;
                        }
                    }
                }
            }
        }
        Err(LpError::Numerical("basis repair did not converge".into()))
    }

    fn maybe_refactor(&mut self) -> Result<bool, LpError> {
        let eta_nnz: usize = self.etas.iter().map(|e| e.entries.len() + 1).sum();
        if self.etas.len() >= ETA_LIMIT || eta_nnz > 2 * self.m.max(16) {
            return self.refactor();
        }
        Ok(false)
    }

    fn push_eta(&mut self, q: usize, w: &[f64]) {
        let mut entries = Vec::new();
        for (i, &wi) in w.iter().enumerate() {
            if i != q && wi.abs() > DROP_TOL {
                entries.push((i, wi));
            }
        }
        self.etas.push(Eta { q, wq: w[q], entries });
    }

    /// Recomputes basic variable values from the nonbasic point.
    fn recompute_basics(&mut self) {
        let mut r = self.rhs.clone();
        for j in 0..self.n + self.m {
            if self.stat[j] != VStat::Basic && self.xval[j] != 0.0 {
                let xj = self.xval[j];
                for (i, a) in self.col_entries(j) {
                    r[i] -= a * xj;
                }
            }
        }
        self.ftran(&mut r);
        for pos in 0..self.m {
            self.xval[self.basis[pos]] = r[pos];
        }
    }

    fn basic_cost_vec(&self) -> Vec<f64> {
        self.basis.iter().map(|&j| self.cost[j]).collect()
    }

    fn primal_feasible_now(&self) -> bool {
        self.basis.iter().all(|&j| {
            self.xval[j] >= self.lb[j] - FEAS_TOL && self.xval[j] <= self.ub[j] + FEAS_TOL
        })
    }

    fn dual_feasible_now(&self) -> bool {
        let mut y = self.basic_cost_vec();
        self.btran(&mut y);
        let tol = 10.0 * OPT_TOL;
        for j in 0..self.n + self.m {
            let d = match self.stat[j] {
                VStat::Basic => continue,
                _ => self.reduced_cost(j, &y),
            };
            let ok = match self.stat[j] {
                VStat::AtLb => d >= -tol,
                VStat::AtUb => d <= tol,
                VStat::Free => d.abs() <= tol,
                VStat::Basic => true,
            };
            if !ok {
                return false;
            }
        }
        true
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = self.cost[j];
        for (i, a) in self.col_entries(j) {
            d -= a * y[i];
        }
        d
    }

    /// Solves from the current state: warm bases go through the dual simplex
    /// when they remain dual feasible, everything else through the primal.
    /// A numerically wrecked basis is thrown away and the solve restarts
    /// cold from the all-slack basis before giving up. An infeasibility
    /// verdict reached from a warm basis is never trusted on its own: a
    /// stale basis can sit in a corner whose escape directions fall below
    /// the pricing tolerances, so the claim must be reproduced from the
    /// logical basis before it is returned.
    pub fn solve(&mut self) -> Result<LpStatus, LpError> {
        let was_warm = self.warm;
        match self.solve_inner() {
            Ok(LpStatus::Infeasible) if was_warm => self.solve_cold(),
            Err(LpError::Numerical(_)) => self.solve_cold(),
            other => other,
        }
    }

    fn solve_cold(&mut self) -> Result<LpStatus, LpError> {
        self.reset_to_logical_basis();
        let cap = 50 * (self.m + self.n).max(64);
        self.iterations = 0;
        let status = self.primal_simplex(cap)?;
        self.warm = true;
        self.status = Some(status);
        Ok(status)
    }

    fn solve_inner(&mut self) -> Result<LpStatus, LpError> {
        let cap = 50 * (self.m + self.n).max(64);
        self.iterations = 0;
        let status = if !self.warm {
            self.primal_simplex(cap)?
        } else {
            self.recompute_basics();
            let pf = self.primal_feasible_now();
            let df = self.dual_feasible_now();
            if pf && df {
                LpStatus::Optimal
            } else if df {
                // The dual pass does the bulk of the reoptimization, but its
                // verdict is not taken alone: the primal confirms a claimed
                // infeasibility independently and grinds out any reduced-cost
                // slack the dual's tolerances left behind.
                self.dual_simplex(cap)?;
                self.primal_simplex(cap)?
            } else {
                self.primal_simplex(cap)?
            }
        };
        self.warm = true;
        self.status = Some(status);
        Ok(status)
    }

    fn reset_to_logical_basis(&mut self) {
        self.etas.clear();
        self.factors = LuFactors::identity(self.m);
        for p in self.pos_of.iter_mut() {
            *p = usize::MAX;
        }
        for j in 0..self.n {
            if self.lb[j].is_finite()
                && (self.lb[j].abs() <= self.ub[j].abs() || !self.ub[j].is_finite())
            {
                self.stat[j] = VStat::AtLb;
                self.xval[j] = self.lb[j];
            } else if self.ub[j].is_finite() {
                self.stat[j] = VStat::AtUb;
                self.xval[j] = self.ub[j];
            } else {
                self.stat[j] = VStat::Free;
                self.xval[j] = 0.0;
            }
        }
        for i in 0..self.m {
            self.basis[i] = self.n + i;
            self.stat[self.n + i] = VStat::Basic;
            self.pos_of[self.n + i] = i;
        }
        self.recompute_basics();
    }

    fn primal_simplex(&mut self, cap: usize) -> Result<LpStatus, LpError> {
        self.refactor()?;
        self.recompute_basics();
        let mut bland = false;
        let mut streak = 0usize;

        'phases: loop {
            // Phase 1: drive bound violations of the basics to zero by
            // minimizing the total violation with piecewise-linear costs.
            loop {
                if self.iterations > cap {
                    return Err(LpError::IterationLimit { cap, iterations: self.iterations });
                }
                self.maybe_refactor()?;
                let mut c1 = vec![0.0f64; self.m];
                let mut infeas = 0.0f64;
                for pos in 0..self.m {
                    let j = self.basis[pos];
                    if self.xval[j] < self.lb[j] - FEAS_TOL {
                        c1[pos] = -1.0;
                        infeas += self.lb[j] - self.xval[j];
                    } else if self.xval[j] > self.ub[j] + FEAS_TOL {
                        c1[pos] = 1.0;
                        infeas += self.xval[j] - self.ub[j];
                    }
                }
                if infeas == 0.0 {
                    break;
                }
                let mut y = c1;
                self.btran(&mut y);
                let entering = self.price(&y, true, bland);
                let (q, sigma) = match entering {
                    Some(e) => e,
                    None => return Ok(LpStatus::Infeasible),
                };
                let mut w = Vec::new();
                self.dense_col(q, &mut w);
                self.ftran(&mut w);
                let (theta, event) = self.ratio_test(q, &w, sigma, true, bland);
                let event = match event {
                    StepEvent::Unblocked => {
                        return Err(LpError::Numerical(
                            "phase-1 direction unblocked; inconsistent state".into(),
                        ))
                    }
                    e => e,
                };
                self.apply_step(q, sigma, theta, event, &w)?;
                if theta <= 1.0e-10 {
                    streak += 1;
                    if streak > DEGEN_STREAK_LIMIT {
                        bland = true;
                    }
                } else {
                    streak = 0;
                    bland = false;
                }
            }

            // Phase 2: optimize the true objective from the feasible basis.
            loop {
                if self.iterations > cap {
                    return Err(LpError::IterationLimit { cap, iterations: self.iterations });
                }
                if self.maybe_refactor()? {
                    // The repair moved the iterate; feasibility must be rebuilt.
                    continue 'phases;
                }
                let mut y = self.basic_cost_vec();
                self.btran(&mut y);
                let entering = self.price(&y, false, bland);
                let (q, sigma) = match entering {
                    Some(e) => e,
                    None => return Ok(LpStatus::Optimal),
                };
                let mut w = Vec::new();
                self.dense_col(q, &mut w);
                self.ftran(&mut w);
                let (theta, event) = self.ratio_test(q, &w, sigma, false, bland);
                if matches!(event, StepEvent::Unblocked) {
                    return Ok(LpStatus::Unbounded);
                }
                self.apply_step(q, sigma, theta, event, &w)?;
                if theta <= 1.0e-10 {
                    streak += 1;
                    if streak > DEGEN_STREAK_LIMIT {
                        bland = true;
                    }
                } else {
                    streak = 0;
                    bland = false;
                }
            }
        }
    }

    /// Picks an entering variable and its direction. In phase 1 the scores
    /// come from the violation gradient, otherwise from the true costs.
    fn price(&self, y: &[f64], phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = OPT_TOL;
        for j in 0..self.n + self.m {
            if self.stat[j] == VStat::Basic {
                continue;
            }
            if self.lb[j] == self.ub[j] && self.stat[j] != VStat::Free {
                continue;
            }
            let d = if phase1 {
                -self.reduced_cost_phase1(j, y)
            } else {
                self.reduced_cost(j, y)
            };
            let (eligible, sigma) = match self.stat[j] {
                VStat::AtLb => (d < -OPT_TOL, 1.0),
                VStat::AtUb => (d > OPT_TOL, -1.0),
                VStat::Free => (d.abs() > OPT_TOL, if d < 0.0 { 1.0 } else { -1.0 }),
                VStat::Basic => (false, 0.0),
            };
            if !eligible {
                continue;
            }
            if bland {
                return Some((j, sigma));
            }
            let score = d.abs();
            if score > best_score {
                best_score = score;
                best = Some((j, sigma));
            }
        }
        best
    }

    fn reduced_cost_phase1(&self, j: usize, y: &[f64]) -> f64 {
        // Phase-1 costs live on the basics, so the nonbasic gradient is
        // -y^T a_j; the true cost vector plays no role.
        let mut d = 0.0;
        for (i, a) in self.col_entries(j) {
            d += a * y[i];
        }
        d
    }

    fn ratio_test(
        &self,
        q: usize,
        w: &[f64],
        sigma: f64,
        phase1: bool,
        bland: bool,
    ) -> (f64, StepEvent) {
        let mut theta = f64::INFINITY;
        let mut event = StepEvent::Unblocked;
        let mut best_key = (0.0f64, usize::MAX);

        let range = self.ub[q] - self.lb[q];
        if range.is_finite() {
            theta = range;
            event = StepEvent::Flip;
            best_key = (f64::INFINITY, q);
        }

        for pos in 0..self.m {
            let wp = w[pos];
            if wp.abs() <= PIVOT_TOL {
                continue;
            }
            let j = self.basis[pos];
            let x = self.xval[j];
            let rate = sigma * wp;
            // x_j moves by -rate per unit step of the entering variable.
            let (cand, to_lb): (f64, bool) = if rate > 0.0 {
                if phase1 && x > self.ub[j] + FEAS_TOL {
                    ((x - self.ub[j]) / rate, false)
                } else if phase1 && x < self.lb[j] - FEAS_TOL {
                    continue;
                } else if self.lb[j].is_finite() {
                    ((x - self.lb[j]) / rate, true)
                } else {
                    continue;
                }
            } else {
                if phase1 && x < self.lb[j] - FEAS_TOL {
                    ((self.lb[j] - x) / -rate, true)
                } else if phase1 && x > self.ub[j] + FEAS_TOL {
                    continue;
                } else if self.ub[j].is_finite() {
                    ((self.ub[j] - x) / -rate, false)
                } else {
                    continue;
                }
            };
            let cand = cand.max(0.0);
            if cand < theta - 1.0e-12 {
                theta = cand;
                event = StepEvent::Pivot { pos, to_lb };
                best_key = (wp.abs(), j);
            } else if cand <= theta + 1.0e-12 {
                if matches!(event, StepEvent::Flip) {
                    continue;
                }
                let better = if bland {
                    j < best_key.1
                } else {
                    wp.abs() > best_key.0 || (wp.abs() == best_key.0 && j < best_key.1)
                };
                if better {
                    theta = theta.min(cand);
                    event = StepEvent::Pivot { pos, to_lb };
                    best_key = (wp.abs(), j);
                }
            }
        }
        (theta, event)
    }

    fn apply_step(
        &mut self,
        q: usize,
        sigma: f64,
        theta: f64,
        event: StepEvent,
        w: &[f64],
    ) -> Result<(), LpError> {
        let step = sigma * theta;
        if step != 0.0 {
            for pos in 0..self.m {
                if w[pos].abs() > DROP_TOL {
                    let j = self.basis[pos];
                    self.xval[j] -= step * w[pos];
                }
            }
        }
        match event {
            StepEvent::Unblocked => unreachable!(),
            StepEvent::Flip => {
                self.xval[q] = if sigma > 0.0 { self.ub[q] } else { self.lb[q] };
                self.stat[q] = if sigma > 0.0 { VStat::AtUb } else { VStat::AtLb };
            }
            StepEvent::Pivot { pos, to_lb } => {
                if w[pos].abs() < PIVOT_TOL {
                    return Err(LpError::Numerical("vanishing pivot element".into()));
                }
                let leaving = self.basis[pos];
                self.xval[q] += step;
                self.xval[leaving] = if to_lb { self.lb[leaving] } else { self.ub[leaving] };
                self.stat[leaving] = if to_lb { VStat::AtLb } else { VStat::AtUb };
                self.stat[q] = VStat::Basic;
                self.pos_of[leaving] = usize::MAX;
                self.pos_of[q] = pos;
                self.basis[pos] = q;
                self.push_eta(pos, w);
            }
        }
        self.iterations += 1;
        Ok(())
    }

    fn dual_simplex(&mut self, cap: usize) -> Result<LpStatus, LpError> {
        if self.refactor()? {
            // A repaired basis has no dual-feasibility promise left.
            return self.primal_simplex(cap);
        }
        self.recompute_basics();
        let mut streak = 0usize;
        let mut bland = false;
        loop {
            if self.iterations > cap {
                return Err(LpError::IterationLimit { cap, iterations: self.iterations });
            }
            if self.maybe_refactor()? {
                return self.primal_simplex(cap);
            }

            let mut leave_pos = usize::MAX;
            let mut worst = FEAS_TOL;
            for pos in 0..self.m {
                let j = self.basis[pos];
                let viol = (self.lb[j] - self.xval[j]).max(self.xval[j] - self.ub[j]);
                if viol > worst {
                    worst = viol;
                    leave_pos = pos;
                }
            }
            if leave_pos == usize::MAX {
                return Ok(LpStatus::Optimal);
            }
            let leaving = self.basis[leave_pos];
            let below = self.xval[leaving] < self.lb[leaving];
            let bound = if below { self.lb[leaving] } else { self.ub[leaving] };
            let delta = self.xval[leaving] - bound;

            let mut rho = vec![0.0f64; self.m];
            rho[leave_pos] = 1.0;
            self.btran(&mut rho);
            let mut y = self.basic_cost_vec();
            self.btran(&mut y);

            let mut enter = usize::MAX;
            let mut enter_alpha = 0.0f64;
            let mut best_ratio = f64::INFINITY;
            let mut best_amag = 0.0f64;
            for j in 0..self.n + self.m {
                if self.stat[j] == VStat::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let mut alpha = 0.0f64;
                let mut d = self.cost[j];
                for (i, a) in self.col_entries(j) {
                    alpha += a * rho[i];
                    d -= a * y[i];
                }
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let eligible = match self.stat[j] {
                    VStat::AtLb => {
                        if below {
                            alpha < 0.0
                        } else {
                            alpha > 0.0
                        }
                    }
                    VStat::AtUb => {
                        if below {
                            alpha > 0.0
                        } else {
                            alpha < 0.0
                        }
                    }
                    VStat::Free => true,
                    VStat::Basic => false,
                };
                if !eligible {
                    continue;
                }
                let ratio = d.abs() / alpha.abs();
                let better = if ratio < best_ratio - 1.0e-12 {
                    true
                } else if ratio <= best_ratio + 1.0e-12 {
                    if bland {
                        enter == usize::MAX || j < enter
                    } else {
                        alpha.abs() > best_amag
                            || (alpha.abs() == best_amag && (enter == usize::MAX || j < enter))
                    }
                } else {
                    false
                };
                if better {
                    best_ratio = best_ratio.min(ratio);
                    best_amag = alpha.abs();
                    enter = j;
                    enter_alpha = alpha;
                }
            }
            if enter == usize::MAX {
                return Ok(LpStatus::Infeasible);
            }

            let mut w = Vec::new();
            self.dense_col(enter, &mut w);
            self.ftran(&mut w);
            if w[leave_pos].abs() < PIVOT_TOL {
                if !self.etas.is_empty() {
                    if self.refactor()? {
                        return self.primal_simplex(cap);
                    }
                    self.recompute_basics();
                    continue;
                }
                return Err(LpError::Numerical("vanishing dual pivot".into()));
            }
            let dx = delta / enter_alpha;
            for pos in 0..self.m {
                if w[pos].abs() > DROP_TOL {
                    let j = self.basis[pos];
                    self.xval[j] -= w[pos] * dx;
                }
            }
            self.xval[enter] += dx;
            self.xval[leaving] = bound;
            self.stat[leaving] = if below { VStat::AtLb } else { VStat::AtUb };
            self.stat[enter] = VStat::Basic;
            self.pos_of[leaving] = usize::MAX;
            self.pos_of[enter] = leave_pos;
            self.basis[leave_pos] = enter;
            self.push_eta(leave_pos, &w);
            self.iterations += 1;

            if worst <= 10.0 * FEAS_TOL {
                streak += 1;
                if streak > DEGEN_STREAK_LIMIT {
                    bland = true;
                }
            } else {
                streak = 0;
            }
        }
    }

    pub fn extract_solution(&self) -> LpSolution {
        let status = self.status.expect("solve before extracting a solution");
        let values = self.values();
        let objective = match status {
            LpStatus::Optimal => self.objective(),
            _ => 0.0,
        };
        let sign = if self.maximize { -1.0 } else { 1.0 };
        let (duals, reduced) = if status == LpStatus::Optimal {
            let mut y = self.basic_cost_vec();
            self.btran(&mut y);
            let duals: Vec<f64> = (0..self.m)
                .map(|i| sign * self.obj_scale * self.row_scale[i] * y[i])
                .collect();
            let reduced: Vec<f64> = (0..self.n)
                .map(|j| {
                    let d = self.reduced_cost(j, &y);
                    sign * self.obj_scale * d / self.col_scale[j]
                })
                .collect();
            (duals, reduced)
        } else {
            (vec![0.0; self.m], vec![0.0; self.n])
        };
        LpSolution {
            status,
            objective,
            values,
            duals,
            reduced_costs: reduced,
            iterations: self.iterations,
        }
    }

}

enum ColIter<'a> {
    Structural(std::slice::Iter<'a, (usize, f64)>),
    Logical(Option<usize>),
}

impl<'a> Iterator for ColIter<'a> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColIter::Structural(it) => it.next().map(|&(i, a)| (i, a)),
            ColIter::Logical(slot) => slot.take().map(|i| (i, 1.0)),
        }
    }
}
