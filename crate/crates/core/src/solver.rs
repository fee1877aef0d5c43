//! Exact offline solver for packing LPs with box-constrained variables.
//!
//! The solver is a dense revised primal simplex in which every structural
//! variable lives in `[0, 1]` and may sit nonbasic at either bound, and every
//! row has a nonnegative slack. The all-slack basis is feasible because the
//! budget is nonnegative, so there is no phase one. Pricing is Dantzig's rule
//! until a run of degenerate pivots trips the anti-cycling threshold, after
//! which Bland's smallest-index rule is used for the rest of the solve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::PackingInstance;

/// Reduced-cost tolerance for optimality.
const PRICE_TOL: f64 = 1e-9;
/// Smallest pivot element accepted in the ratio test.
const PIVOT_TOL: f64 = 1e-11;
/// Ratio differences below this are treated as ties.
const RATIO_TIE: f64 = 1e-12;
const REFACTOR_EVERY: usize = 32;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_AFTER_DEGENERATE: usize = 50;

/// Primal/dual feasibility tolerance on unit-scaled data.
pub const FEAS_TOL: f64 = 1e-9;
/// Tolerance used when certifying duality and complementary slackness.
pub const CERT_TOL: f64 = 1e-7;

/// Optimal primal/dual pair for a packing LP.
///
/// `x` and `alpha` are indexed like the columns of the solved program: for
/// [`solve`] that is the instance order, for [`solve_sample_dual`] it is the
/// order of the sample indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineSolution {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
    pub value: f64,
    /// Right-hand side the program was solved with.
    pub budget: f64,
    pub pivots: usize,
}

impl OfflineSolution {
    /// Dual objective `B·Σ p_i + Σ α_t`.
    pub fn dual_value(&self) -> f64 {
        self.budget * self.p.iter().sum::<f64>() + self.alpha.iter().sum::<f64>()
    }

    /// Checks primal feasibility, dual feasibility, strong duality and
    /// complementary slackness against the program given by `rewards`,
    /// `columns` and the stored budget.
    pub fn certify<'c>(
        &self,
        rewards: &[f64],
        columns: impl IntoIterator<Item = &'c [f64]>,
    ) -> std::result::Result<(), String> {
        let columns: Vec<&[f64]> = columns.into_iter().collect();
        let m = self.p.len();
        let scale = self.budget.max(1.0);
        let mut load = vec![0.0; m];
        for (t, col) in columns.iter().enumerate() {
            let x = self.x[t];
            if !(-FEAS_TOL..=1.0 + FEAS_TOL).contains(&x) {
                return Err(format!("x[{t}] = {x} outside [0,1]"));
            }
            for (l, a) in load.iter_mut().zip(col.iter()) {
                *l += a * x;
            }
        }
        for (i, &l) in load.iter().enumerate() {
            if l > self.budget + FEAS_TOL * scale {
                return Err(format!("row {i} load {l} exceeds budget {}", self.budget));
            }
            if self.p[i] < 0.0 {
                return Err(format!("price p[{i}] = {} is negative", self.p[i]));
            }
            if self.p[i] > FEAS_TOL && l < self.budget - CERT_TOL * scale {
                return Err(format!("row {i} has price {} but slack {}", self.p[i], self.budget - l));
            }
        }
        for (t, col) in columns.iter().enumerate() {
            let priced = dot(&self.p, col);
            if self.alpha[t] < 0.0 || priced + self.alpha[t] < rewards[t] - FEAS_TOL {
                return Err(format!("dual constraint {t} violated"));
            }
            if self.x[t] > FEAS_TOL && priced + self.alpha[t] > rewards[t] + CERT_TOL {
                return Err(format!("column {t} is used but its dual constraint is loose"));
            }
            if self.alpha[t] > CERT_TOL && self.x[t] < 1.0 - CERT_TOL {
                return Err(format!("alpha[{t}] > 0 but x[{t}] = {} < 1", self.x[t]));
            }
        }
        let dual = self.dual_value();
        if (self.value - dual).abs() > CERT_TOL * self.value.abs().max(1.0) {
            return Err(format!("primal {} and dual {} differ", self.value, dual));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the instance exactly, optionally with a different right-hand side.
pub fn solve(instance: &PackingInstance, budget_override: Option<f64>) -> Result<OfflineSolution> {
    instance.validate()?;
    let budget = match budget_override {
        Some(b) if !(b.is_finite() && b > 0.0) => {
            return Err(Error::param(format!("budget override {b} must be positive")))
        }
        Some(b) => b,
        None => instance.budget,
    };
    let columns: Vec<&[f64]> = instance.columns.iter().map(Vec::as_slice).collect();
    solve_program(&instance.rewards, &columns, instance.m, budget)
}

/// Solves the program restricted to `sample` with right-hand side
/// `(s/n)·delta_scale·B`, where `s = |sample|`.
pub fn solve_sample_dual(
    instance: &PackingInstance,
    sample: &[usize],
    delta_scale: f64,
) -> Result<OfflineSolution> {
    if !(delta_scale > 0.0 && delta_scale <= 1.0) {
        return Err(Error::param(format!("delta scale {delta_scale} must lie in (0,1]")));
    }
    if sample.len() > instance.n {
        return Err(Error::param("sample is larger than the instance"));
    }
    let mut seen = vec![false; instance.n];
    for &t in sample {
        if t >= instance.n || std::mem::replace(&mut seen[t], true) {
            return Err(Error::param(format!("sample index {t} is out of range or repeated")));
        }
    }
    let budget = sample.len() as f64 / instance.n as f64 * delta_scale * instance.budget;
    let rewards: Vec<f64> = sample.iter().map(|&t| instance.rewards[t]).collect();
    let columns: Vec<&[f64]> = sample.iter().map(|&t| instance.columns[t].as_slice()).collect();
    solve_program(&rewards, &columns, instance.m, budget)
}

/// Solves `max π·x  s.t.  Σ a^t x_t ≤ budget, 0 ≤ x ≤ 1` for the given columns.
pub fn solve_program(rewards: &[f64], columns: &[&[f64]], m: usize, budget: f64) -> Result<OfflineSolution> {
    let mut simplex = Simplex::new(rewards, columns, m, budget);
    simplex.run()?;
    let sol = simplex.solution();
    sol.certify(rewards, columns.iter().copied())
        .map_err(|reason| Error::SolverFailure { pivots: sol.pivots, reason })?;
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Basic(usize),
    Lower,
    Upper,
}

struct Simplex<'a> {
    rewards: &'a [f64],
    columns: &'a [&'a [f64]],
    n: usize,
    m: usize,
    budget: f64,
    status: Vec<Status>,
    basis: Vec<usize>,
    /// Row-major inverse of the basis matrix.
    binv: Vec<f64>,
    xb: Vec<f64>,
    pivots: usize,
    degenerate_run: usize,
    bland: bool,
}

impl<'a> Simplex<'a> {
    fn new(rewards: &'a [f64], columns: &'a [&'a [f64]], m: usize, budget: f64) -> Self {
        let n = rewards.len();
        let mut status = vec![Status::Lower; n + m];
        for (i, s) in status[n..].iter_mut().enumerate() {
            *s = Status::Basic(i);
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Simplex {
            rewards,
            columns,
            n,
            m,
            budget,
            status,
            basis: (n..n + m).collect(),
            binv,
            xb: vec![budget; m],
            pivots: 0,
            degenerate_run: 0,
            bland: false,
        }
    }

    fn cost(&self, j: usize) -> f64 {
        if j < self.n {
            self.rewards[j]
        } else {
            0.0
        }
    }

    fn upper(&self, j: usize) -> f64 {
        if j < self.n {
            1.0
        } else {
            f64::INFINITY
        }
    }

    /// `y·A_j` for the column of variable `j`.
    fn price(&self, y: &[f64], j: usize) -> f64 {
        if j < self.n {
            dot(y, self.columns[j])
        } else {
            y[j - self.n]
        }
    }

    /// `B⁻¹ A_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        if j < self.n {
            let col = self.columns[j];
            (0..m).map(|k| dot(&self.binv[k * m..(k + 1) * m], col)).collect()
        } else {
            let i = j - self.n;
            (0..m).map(|k| self.binv[k * m + i]).collect()
        }
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = self.cost(j);
            if c != 0.0 {
                for (yi, b) in y.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                    *yi += c * b;
                }
            }
        }
        y
    }

    fn max_pivots(&self) -> usize {
        50 * (self.n + self.m) + 1000
    }

    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::SolverFailure { pivots: self.pivots, reason: reason.into() }
    }

    fn run(&mut self) -> Result<()> {
        loop {
            let y = self.duals();
            let Some((entering, increasing)) = self.choose_entering(&y) else {
                return self.refactor();
            };
            if self.pivots >= self.max_pivots() {
                return Err(self.fail("iteration limit exceeded"));
            }
            self.step(entering, increasing)?;
            self.pivots += 1;
            if self.pivots.is_multiple_of(REFACTOR_EVERY) {
                self.refactor()?;
            }
        }
    }

    fn choose_entering(&self, y: &[f64]) -> Option<(usize, bool)> {
        let mut best: Option<(usize, bool, f64)> = None;
        for j in 0..self.n + self.m {
            let increasing = match self.status[j] {
                Status::Basic(_) => continue,
                Status::Lower => true,
                Status::Upper => false,
            };
            let d = self.cost(j) - self.price(y, j);
            let gain = if increasing { d } else { -d };
            if gain <= PRICE_TOL {
                continue;
            }
            if self.bland {
                return Some((j, increasing));
            }
            if best.is_none_or(|(_, _, g)| gain > g) {
                best = Some((j, increasing, gain));
            }
        }
        best.map(|(j, inc, _)| (j, inc))
    }

    fn step(&mut self, entering: usize, increasing: bool) -> Result<()> {
        let w = self.ftran(entering);
        let dir = if increasing { 1.0 } else { -1.0 };
        // basic variable k moves by theta * delta[k]
        let delta: Vec<f64> = w.iter().map(|wk| -dir * wk).collect();

        let mut theta = self.upper(entering);
        let mut leaving: Option<(usize, bool)> = None; // (basis row, leaves at upper)
        for (k, &dk) in delta.iter().enumerate() {
            let var = self.basis[k];
            let (ratio, at_upper) = if dk < -PIVOT_TOL {
                (self.xb[k].max(0.0) / -dk, false)
            } else if dk > PIVOT_TOL && self.upper(var).is_finite() {
                ((self.upper(var) - self.xb[k]).max(0.0) / dk, true)
            } else {
                continue;
            };
            let take = match leaving {
                _ if ratio < theta - RATIO_TIE => true,
                Some((r, _)) if ratio <= theta + RATIO_TIE => {
                    if self.bland {
                        var < self.basis[r]
                    } else {
                        dk.abs() > delta[r].abs()
                    }
                }
                _ => false,
            };
            if take {
                theta = ratio;
                leaving = Some((k, at_upper));
            }
        }
        if !theta.is_finite() {
            return Err(self.fail("unbounded ray in a bounded program"));
        }

        for (x, dk) in self.xb.iter_mut().zip(&delta) {
            *x += theta * dk;
        }
        match leaving {
            None => {
                self.status[entering] = if increasing { Status::Upper } else { Status::Lower };
            }
            Some((r, at_upper)) => {
                let out = self.basis[r];
                self.status[out] = if at_upper { Status::Upper } else { Status::Lower };
                self.xb[r] = if increasing { theta } else { self.upper(entering) - theta };
                self.basis[r] = entering;
                self.status[entering] = Status::Basic(r);
                self.pivot_inverse(r, &w);
            }
        }

        if theta <= RATIO_TIE {
            self.degenerate_run += 1;
            if self.degenerate_run >= BLAND_AFTER_DEGENERATE {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
        }
        Ok(())
    }

    fn pivot_inverse(&mut self, r: usize, w: &[f64]) {
        let m = self.m;
        let piv = w[r];
        for v in &mut self.binv[r * m..(r + 1) * m] {
            *v /= piv;
        }
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for (k, &wk) in w.iter().enumerate() {
            if k == r || wk == 0.0 {
                continue;
            }
            for (v, p) in self.binv[k * m..(k + 1) * m].iter_mut().zip(&pivot_row) {
                *v -= wk * p;
            }
        }
    }

    /// Recomputes the basis inverse and basic values from scratch.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        if m == 0 {
            return Ok(());
        }
        // Gauss-Jordan on [B | I]
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                for (i, &v) in self.columns[j].iter().enumerate() {
                    a[i * m + k] = v;
                }
            } else {
                a[(j - self.n) * m + k] = 1.0;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let piv_row = (c..m)
                .max_by(|&r1, &r2| a[r1 * m + c].abs().total_cmp(&a[r2 * m + c].abs()))
                .unwrap_or(c);
            if a[piv_row * m + c].abs() < 1e-13 {
                return Err(self.fail("singular basis during refactorization"));
            }
            if piv_row != c {
                for col in 0..m {
                    a.swap(c * m + col, piv_row * m + col);
                    inv.swap(c * m + col, piv_row * m + col);
                }
            }
            let piv = a[c * m + c];
            for col in 0..m {
                a[c * m + col] /= piv;
                inv[c * m + col] /= piv;
            }
            for r in 0..m {
                let f = a[r * m + c];
                if r == c || f == 0.0 {
                    continue;
                }
                for col in 0..m {
                    a[r * m + col] -= f * a[c * m + col];
                    inv[r * m + col] -= f * inv[c * m + col];
                }
            }
        }
        self.binv = inv;

        let mut rhs = vec![self.budget; m];
        for j in 0..self.n {
            if self.status[j] == Status::Upper {
                for (r, a) in rhs.iter_mut().zip(self.columns[j]) {
                    *r -= a;
                }
            }
        }
        self.xb = (0..m).map(|k| dot(&self.binv[k * m..(k + 1) * m], &rhs)).collect();
        Ok(())
    }

    fn solution(&self) -> OfflineSolution {
        let mut x = vec![0.0; self.n];
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = match self.status[j] {
                Status::Basic(k) => self.xb[k].clamp(0.0, 1.0),
                Status::Lower => 0.0,
                Status::Upper => 1.0,
            };
        }
        let p: Vec<f64> = self.duals().into_iter().map(|v| v.max(0.0)).collect();
        let alpha = (0..self.n)
            .map(|t| (self.rewards[t] - dot(&p, self.columns[t])).max(0.0))
            .collect();
        let value = dot(self.rewards, &x);
        OfflineSolution { x, p, alpha, value, budget: self.budget, pivots: self.pivots }
    }
}

/// Largest `n` accepted by [`brute_force_opt`].
pub const BRUTE_FORCE_MAX_N: usize = 8;
/// Largest `m` accepted by [`brute_force_opt`].
pub const BRUTE_FORCE_MAX_M: usize = 3;

/// Exact optimum by enumerating basic feasible solutions.
///
/// For every set `R` of rows assumed tight and every choice of `|R|` basic
/// variables, the remaining variables are fixed at 0 or 1 in all possible
/// ways, the square system on `R` is solved and the point is kept if it is
/// feasible. Shares no code with the simplex. Exponential; tiny inputs only.
pub fn brute_force_opt(instance: &PackingInstance) -> Result<f64> {
    instance.validate()?;
    let (n, m) = (instance.n, instance.m);
    if n > BRUTE_FORCE_MAX_N || m > BRUTE_FORCE_MAX_M {
        return Err(Error::param(format!(
            "brute force is limited to n <= {BRUTE_FORCE_MAX_N}, m <= {BRUTE_FORCE_MAX_M}"
        )));
    }
    let b = instance.budget;
    let a = |i: usize, t: usize| instance.columns[t][i];
    let mut best = 0.0_f64;

    for k in 0..=m.min(n) {
        for rows in subsets(m, k) {
            for basic in subsets(n, k) {
                let fixed: Vec<usize> = (0..n).filter(|t| !basic.contains(t)).collect();
                for mask in 0u32..(1 << fixed.len()) {
                    let mut x = vec![0.0; n];
                    for (bit, &t) in fixed.iter().enumerate() {
                        if mask & (1 << bit) != 0 {
                            x[t] = 1.0;
                        }
                    }
                    if k > 0 {
                        let mat: Vec<Vec<f64>> =
                            rows.iter().map(|&i| basic.iter().map(|&t| a(i, t)).collect()).collect();
                        let rhs: Vec<f64> = rows
                            .iter()
                            .map(|&i| b - fixed.iter().map(|&t| a(i, t) * x[t]).sum::<f64>())
                            .collect();
                        let Some(sol) = solve_square(mat, rhs) else { continue };
                        if sol.iter().any(|&v| !(-1e-9..=1.0 + 1e-9).contains(&v)) {
                            continue;
                        }
                        for (&t, v) in basic.iter().zip(sol) {
                            x[t] = v.clamp(0.0, 1.0);
                        }
                    }
                    let feasible = (0..m).all(|i| (0..n).map(|t| a(i, t) * x[t]).sum::<f64>() <= b + 1e-9);
                    if feasible {
                        let value: f64 = (0..n).map(|t| instance.rewards[t] * x[t]).sum();
                        best = best.max(value);
                    }
                }
            }
        }
    }
    Ok(best)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..k {
            let f = a[r][c] / a[c][c];
            let (top, bottom) = a.split_at_mut(r);
            for (x, y) in bottom[0][c..k].iter_mut().zip(&top[c][c..k]) {
                *x -= f * y;
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}
