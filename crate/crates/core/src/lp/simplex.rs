//! Bounded primal revised simplex.
//!
//! Every row gets a logical column (`a_i x + s_i = b_i`) whose bounds encode
//! the relation: `[0, inf)` for `<=`, `[0, 0]` for `=`, `(-inf, 0]` for `>=`.
//! Rows the starting point violates get an artificial column; phase one
//! drives those to zero, after which they are fixed at zero. Pricing is
//! Dantzig's rule with a switch to Bland's rule after a run of degenerate
//! pivots, and the ratio test uses Harris' two passes.

use log::{debug, trace};

use super::lu::LuFactor;
use super::model::{LinearProgram, LpOptions, LpSolution, LpStats, LpStatus, Relation, Sense};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const MAX_RESTARTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
    /// The basis was repaired into an infeasible point; start over.
    Restart,
}

struct Simplex<'a> {
    opts: &'a LpOptions,
    m: usize,
    n: usize,
    /// Structural columns.
    a_cols: Vec<Vec<(usize, f64)>>,
    /// Artificial columns: (row, sign).
    arts: Vec<(usize, f64)>,
    b: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    lu: LuFactor,
    iterations: usize,
    max_iterations: usize,
    stats: LpStats,
}

/// Solves `lp` with default options.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_with(lp, &LpOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &LpOptions) -> Result<LpSolution> {
    lp.validate()?;
    let m = lp.num_constraints();
    let n = lp.num_variables();
    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut a_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, c) in lp.constraints().iter().enumerate() {
        for &(j, v) in &c.coefficients {
            a_cols[j].push((i, v));
        }
    }
    let max_iterations = if opts.max_iterations == 0 {
        20 * (m + n) + 10_000
    } else {
        opts.max_iterations
    };

    let mut start: Vec<f64> = lp
        .variables()
        .iter()
        .map(|v| {
            if v.lower.is_finite() {
                v.lower
            } else if v.upper.is_finite() {
                v.upper
            } else {
                0.0
            }
        })
        .collect();
    let mut stats = LpStats::default();
    let mut iterations = 0;
    for attempt in 0..=MAX_RESTARTS {
        let mut s = Simplex::new(lp, opts, &a_cols, &start);
        s.iterations = iterations;
        s.max_iterations = max_iterations;
        s.stats = stats.clone();
        let outcome = s.run(lp, sign)?;
        iterations = s.iterations;
        stats = s.stats.clone();
        match outcome {
            Some(sol) => return Ok(sol),
            None => {
                debug!(
                    "simplex restart {} after singular basis repair",
                    attempt + 1
                );
                start = (0..n)
                    .map(|j| {
                        let v = s.x[j].clamp(s.lb[j], s.ub[j]);
                        if s.lb[j].is_finite() && (v - s.lb[j]).abs() <= (s.ub[j] - v).abs() {
                            s.lb[j]
                        } else if s.ub[j].is_finite() {
                            s.ub[j]
                        } else if s.lb[j].is_finite() {
                            s.lb[j]
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
    }
    Err(Error::Internal(
        "simplex could not recover from repeated singular bases".into(),
    ))
}

impl<'a> Simplex<'a> {
    fn new(
        lp: &LinearProgram,
        opts: &'a LpOptions,
        a_cols: &[Vec<(usize, f64)>],
        start: &[f64],
    ) -> Self {
        let m = lp.num_constraints();
        let n = lp.num_variables();
        let tol = opts.feasibility_tol;
        let mut lb = Vec::with_capacity(n + 2 * m);
        let mut ub = Vec::with_capacity(n + 2 * m);
        let mut x = Vec::with_capacity(n + 2 * m);
        let mut state = Vec::with_capacity(n + 2 * m);
        for (v, &x0) in lp.variables().iter().zip(start) {
            lb.push(v.lower);
            ub.push(v.upper);
            x.push(x0);
            state.push(if x0 == v.lower {
                State::AtLower
            } else if x0 == v.upper {
                State::AtUpper
            } else {
                State::Free
            });
        }
        let b: Vec<f64> = lp.constraints().iter().map(|c| c.rhs).collect();
        let mut residual = b.clone();
        for (j, col) in a_cols.iter().enumerate() {
            if x[j] != 0.0 {
                for &(i, v) in col {
                    residual[i] -= v * x[j];
                }
            }
        }
        let mut basis = vec![0; m];
        let mut arts = Vec::new();
        let mut art_vals = Vec::new();
        for (i, c) in lp.constraints().iter().enumerate() {
            let (lo, hi) = match c.relation {
                Relation::LessEq => (0.0, f64::INFINITY),
                Relation::Equal => (0.0, 0.0),
                Relation::GreaterEq => (f64::NEG_INFINITY, 0.0),
            };
            lb.push(lo);
            ub.push(hi);
            let r = residual[i];
            if r >= lo - tol && r <= hi + tol {
                x.push(r);
                state.push(State::Basic);
                basis[i] = n + i;
            } else {
                let at = r.clamp(lo, hi);
                x.push(at);
                state.push(if at == lo {
                    State::AtLower
                } else {
                    State::AtUpper
                });
                let diff = r - at;
                arts.push((i, diff.signum()));
                art_vals.push(diff.abs());
            }
        }
        for (k, &(i, _)) in arts.iter().enumerate() {
            lb.push(0.0);
            ub.push(f64::INFINITY);
            x.push(art_vals[k]);
            state.push(State::Basic);
            basis[i] = n + m + k;
        }
        let total = n + m + arts.len();
        let mut s = Simplex {
            opts,
            m,
            n,
            a_cols: a_cols.to_vec(),
            arts,
            b,
            lb,
            ub,
            cost: vec![0.0; total],
            x,
            state,
            basis,
            lu: LuFactor::default(),
            iterations: 0,
            max_iterations: 0,
            stats: LpStats::default(),
        };
        s.factor_only();
        s
    }

    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for &(i, v) in &self.a_cols[j] {
                f(i, v);
            }
        } else if j < self.n + self.m {
            f(j - self.n, 1.0);
        } else {
            let (i, s) = self.arts[j - self.n - self.m];
            f(i, s);
        }
    }

    fn column_sparse(&self, j: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_column(j, |i, v| out.push((i, v)));
        out
    }

    fn factor_only(&mut self) -> bool {
        let cols: Vec<Vec<(usize, f64)>> =
            self.basis.iter().map(|&j| self.column_sparse(j)).collect();
        let (lu, singular) = LuFactor::factor(self.m, &cols);
        self.lu = lu;
        match singular {
            None => true,
            Some(sing) => {
                self.stats.singular_repairs += 1;
                debug!(
                    "singular basis: replacing {} column(s) by logicals",
                    sing.positions.len()
                );
                for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                    let old = self.basis[pos];
                    self.make_nonbasic_nearest(old);
                    let logical = self.n + row;
                    self.basis[pos] = logical;
                    self.state[logical] = State::Basic;
                }
                let cols: Vec<Vec<(usize, f64)>> =
                    self.basis.iter().map(|&j| self.column_sparse(j)).collect();
                let (lu, again) = LuFactor::factor(self.m, &cols);
                self.lu = lu;
                debug_assert!(again.is_none());
                false
            }
        }
    }

    fn make_nonbasic_nearest(&mut self, j: usize) {
        let (lo, hi, v) = (self.lb[j], self.ub[j], self.x[j]);
        let (val, st) = if lo.is_finite() && (!hi.is_finite() || (v - lo).abs() <= (hi - v).abs()) {
            (lo, State::AtLower)
        } else if hi.is_finite() {
            (hi, State::AtUpper)
        } else {
            (0.0, State::Free)
        };
        self.x[j] = val;
        self.state[j] = st;
    }

    /// Refactors and recomputes basic values. Returns false when the basis
    /// had to be repaired and is no longer primal feasible.
    fn refactor(&mut self) -> bool {
        self.stats.refactorizations += 1;
        let clean = self.factor_only();
        let mut r = self.b.clone();
        let total = self.x.len();
        for j in 0..total {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                self.for_column(j, |i, v| r[i] -= v * xj);
            }
        }
        self.lu.ftran(&mut r);
        for (pos, &j) in self.basis.iter().enumerate() {
            self.x[j] = r[pos];
        }
        if clean {
            return true;
        }
        let tol = self.opts.feasibility_tol;
        self.basis
            .iter()
            .all(|&j| self.x[j] >= self.lb[j] - tol && self.x[j] <= self.ub[j] + tol)
    }

    fn duals(&self) -> Vec<f64> {
        let mut y: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.lu.btran(&mut y);
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = self.cost[j];
        self.for_column(j, |i, v| d -= v * y[i]);
        d
    }

    /// Entering column and direction (+1 increase, -1 decrease).
    fn price(&self, y: &[f64], bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.x.len() {
            let st = self.state[j];
            if st == State::Basic || self.lb[j] == self.ub[j] {
                continue;
            }
            let d = self.reduced_cost(j, y);
            let dir = match st {
                State::AtLower if d < -tol => 1.0,
                State::AtUpper if d > tol => -1.0,
                State::Free if d.abs() > tol => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    /// Runs one phase to optimality for the current cost vector.
    fn iterate(&mut self) -> Result<Outcome> {
        let mut degenerate_run = 0;
        let mut verified = false;
        loop {
            if self.iterations >= self.max_iterations {
                return Ok(Outcome::IterationLimit);
            }
            let eta_heavy = self.lu.eta_nonzeros() > 4 * self.m + 1000;
            if (self.lu.num_etas() >= self.opts.refactor_interval || eta_heavy) && !self.refactor()
            {
                return Ok(Outcome::Restart);
            }
            let bland = degenerate_run >= self.opts.bland_after;
            let y = self.duals();
            let Some((q, dir)) = self.price(&y, bland) else {
                if self.lu.num_etas() > 0 && !verified {
                    // confirm optimality on a fresh factorization
                    if !self.refactor() {
                        return Ok(Outcome::Restart);
                    }
                    verified = true;
                    continue;
                }
                return Ok(Outcome::Optimal);
            };
            verified = false;
            self.iterations += 1;
            if bland {
                self.stats.bland_pivots += 1;
            }

            let mut alpha = vec![0.0; self.m];
            self.for_column(q, |i, v| alpha[i] = v);
            self.lu.ftran(&mut alpha);

            let (theta, leave) = self.ratio_test(&alpha, dir, q, bland);
            if theta.is_infinite() {
                return Ok(Outcome::Unbounded);
            }
            if theta <= 1e-12 {
                degenerate_run += 1;
                self.stats.degenerate_pivots += 1;
            } else {
                degenerate_run = 0;
            }

            self.x[q] += dir * theta;
            for (pos, &j) in self.basis.iter().enumerate() {
                if alpha[pos] != 0.0 {
                    self.x[j] -= dir * theta * alpha[pos];
                }
            }
            match leave {
                None => {
                    self.stats.bound_flips += 1;
                    self.state[q] = if dir > 0.0 {
                        State::AtUpper
                    } else {
                        State::AtLower
                    };
                    self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                }
                Some((r, to_upper)) => {
                    let out = self.basis[r];
                    if to_upper {
                        self.x[out] = self.ub[out];
                        self.state[out] = State::AtUpper;
                    } else {
                        self.x[out] = self.lb[out];
                        self.state[out] = State::AtLower;
                    }
                    if self.lb[out] == self.ub[out] {
                        self.state[out] = State::AtLower;
                    }
                    self.basis[r] = q;
                    self.state[q] = State::Basic;
                    self.lu.update(r, &alpha);
                    trace!("pivot: in {q} out {out} theta {theta}");
                }
            }
        }
    }

    /// Returns the step length and the leaving position with the bound it
    /// reaches, or `None` for a bound flip of the entering column.
    fn ratio_test(
        &self,
        alpha: &[f64],
        dir: f64,
        q: usize,
        bland: bool,
    ) -> (f64, Option<(usize, bool)>) {
        let tol = self.opts.feasibility_tol;
        let range = self.ub[q] - self.lb[q];
        // basic i moves by theta * delta_i
        let limit = |pos: usize, relaxed: f64| -> Option<(f64, bool)> {
            let delta = -dir * alpha[pos];
            if delta.abs() <= PIVOT_TOL {
                return None;
            }
            let j = self.basis[pos];
            if delta < 0.0 {
                self.lb[j]
                    .is_finite()
                    .then(|| (((self.x[j] - self.lb[j]) + relaxed) / -delta, false))
            } else {
                self.ub[j]
                    .is_finite()
                    .then(|| (((self.ub[j] - self.x[j]) + relaxed) / delta, true))
            }
        };

        if bland {
            let mut best: Option<(f64, usize, bool)> = None;
            for pos in 0..self.m {
                if let Some((t, up)) = limit(pos, 0.0) {
                    let t = t.max(0.0);
                    let better = match best {
                        None => true,
                        Some((bt, bp, _)) => {
                            t < bt - 1e-12 || (t <= bt + 1e-12 && self.basis[pos] < self.basis[bp])
                        }
                    };
                    if better {
                        best = Some((t, pos, up));
                    }
                }
            }
            return match best {
                Some((t, _, _)) if range <= t => (range, None),
                Some((t, pos, up)) => (t, Some((pos, up))),
                None => (range, None),
            };
        }

        let mut bound = f64::INFINITY;
        for pos in 0..self.m {
            if let Some((t, _)) = limit(pos, tol) {
                bound = bound.min(t);
            }
        }
        if range <= bound {
            return (range, None);
        }
        let mut best: Option<(usize, bool, f64, f64)> = None;
        for pos in 0..self.m {
            if let Some((t, up)) = limit(pos, 0.0) {
                if t <= bound {
                    let size = alpha[pos].abs();
                    if best.is_none_or(|(_, _, _, s)| size > s) {
                        best = Some((pos, up, t.max(0.0), size));
                    }
                }
            }
        }
        match best {
            Some((pos, up, t, _)) => (t, Some((pos, up))),
            None => (range, None),
        }
    }

    /// Full solve; `None` asks the caller to restart from scratch.
    fn run(&mut self, lp: &LinearProgram, sign: f64) -> Result<Option<LpSolution>> {
        let n = self.n;
        let m = self.m;
        let tol = self.opts.feasibility_tol;
        if !self.arts.is_empty() {
            for k in 0..self.arts.len() {
                self.cost[n + m + k] = 1.0;
            }
            let before = self.iterations;
            let outcome = self.iterate()?;
            self.stats.phase1_iterations += self.iterations - before;
            match outcome {
                Outcome::Restart => return Ok(None),
                Outcome::IterationLimit => {
                    return Ok(Some(self.finish(lp, sign, LpStatus::IterationLimit, None)))
                }
                Outcome::Unbounded => {
                    return Err(Error::Internal(
                        "phase one reported an unbounded direction".into(),
                    ))
                }
                Outcome::Optimal => {}
            }
            let worst = (n + m..self.x.len()).map(|j| self.x[j]).fold(0.0, f64::max);
            if worst > tol {
                debug!("phase one ended with artificial value {worst}");
                return Ok(Some(self.finish(lp, sign, LpStatus::Infeasible, None)));
            }
            for j in n + m..self.x.len() {
                self.cost[j] = 0.0;
                self.ub[j] = 0.0;
                if self.state[j] != State::Basic {
                    self.x[j] = 0.0;
                    self.state[j] = State::AtLower;
                }
            }
        }
        for (j, v) in lp.variables().iter().enumerate() {
            self.cost[j] = sign * v.objective;
        }
        let before = self.iterations;
        let outcome = self.iterate()?;
        self.stats.phase2_iterations += self.iterations - before;
        let status = match outcome {
            Outcome::Restart => return Ok(None),
            Outcome::Optimal => LpStatus::Optimal,
            Outcome::Unbounded => LpStatus::Unbounded,
            Outcome::IterationLimit => LpStatus::IterationLimit,
        };
        let y = (status == LpStatus::Optimal).then(|| self.duals());
        Ok(Some(self.finish(lp, sign, status, y)))
    }

    fn finish(
        &self,
        lp: &LinearProgram,
        sign: f64,
        status: LpStatus,
        y: Option<Vec<f64>>,
    ) -> LpSolution {
        let x: Vec<f64> = (0..self.n)
            .map(|j| self.x[j].clamp(self.lb[j], self.ub[j]))
            .collect();
        let duals = y
            .map(|y| y.into_iter().map(|v| sign * v).collect())
            .unwrap_or_else(|| vec![0.0; self.m]);
        LpSolution {
            status,
            objective_value: lp.objective_value(&x),
            x,
            duals,
            stats: self.stats.clone(),
        }
    }
}
