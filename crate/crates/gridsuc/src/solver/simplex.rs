//! Bounded-variable two-phase revised simplex.
//!
//! The basis inverse is kept as an LU factorization of a snapshot basis
//! plus a product-form eta file; the file is folded into a fresh
//! factorization periodically and whenever numerics degrade. Dantzig
//! pricing by default, Bland's rule after a pivot-count threshold so
//! degenerate instances cannot cycle.

use super::{LpInstance, LpSolution, LpStatus, Sense, SolverError};
use crate::linalg::{LuFactors, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable parked at zero.
    FreeAtZero,
}

struct Eta {
    row: usize,
    col: Vec<f64>,
}

const PIVOT_TOL: f64 = 1e-9;
const RC_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 200;
/// Window within which ratio-test ties prefer the numerically largest
/// pivot element.
const RATIO_TIE_TOL: f64 = 1e-7;
/// Consecutive degenerate pivots before Bland's rule takes over.
const STALL_LIMIT: usize = 200;

enum Step {
    Moved,
    Unbounded,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

pub fn solve_lp(instance: &LpInstance) -> Result<LpSolution, SolverError> {
    instance.validate()?;
    Simplex::new(instance).run()
}

struct Simplex<'a> {
    inst: &'a LpInstance,
    n: usize,
    m: usize,
    /// Column-wise copy of the constraint matrix (structural columns).
    cols: Vec<Vec<(usize, f64)>>,
    /// Bounds for structural, slack and artificial columns, in that order.
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Sign of the artificial column per row (0.0 when never activated).
    art_sign: Vec<f64>,
    rhs: Vec<f64>,
    status: Vec<VarStatus>,
    basis: Vec<usize>,
    x_basic: Vec<f64>,
    lu: LuFactors,
    etas: Vec<Eta>,
    pivots: usize,
    bland: bool,
    /// Consecutive degenerate (zero-length) pivots.
    stall: usize,
}

impl<'a> Simplex<'a> {
    fn new(inst: &'a LpInstance) -> Self {
        let n = inst.num_vars();
        let m = inst.rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, row) in inst.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((r, a));
                }
            }
        }
        let mut lo = Vec::with_capacity(n + 2 * m);
        let mut hi = Vec::with_capacity(n + 2 * m);
        for &(l, h) in &inst.bounds {
            lo.push(l);
            hi.push(h);
        }
        // Slacks encode the row sense via their bounds: a'x + s = rhs.
        for row in &inst.rows {
            let (l, h) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lo.push(l);
            hi.push(h);
        }
        // Artificials start fixed; activation happens per violated row.
        for _ in 0..m {
            lo.push(0.0);
            hi.push(0.0);
        }
        Simplex {
            inst,
            n,
            m,
            cols,
            lo,
            hi,
            art_sign: vec![0.0; m],
            rhs: inst.rows.iter().map(|r| r.rhs).collect(),
            status: Vec::new(),
            basis: Vec::new(),
            x_basic: Vec::new(),
            lu: LuFactors::factorize(&Matrix::identity(0)).unwrap(),
            etas: Vec::new(),
            pivots: 0,
            bland: false,
            stall: 0,
        }
    }

    fn col_entries(&self, j: usize, f: &mut dyn FnMut(usize, f64)) {
        if j < self.n {
            for &(r, a) in &self.cols[j] {
                f(r, a);
            }
        } else if j < self.n + self.m {
            f(j - self.n, 1.0);
        } else {
            let r = j - self.n - self.m;
            f(r, self.art_sign[r]);
        }
    }

    fn run(mut self) -> Result<LpSolution, SolverError> {
        self.initial_basis()?;

        if self.art_sign.iter().any(|&s| s != 0.0) {
            let c1 = self.phase1_costs();
            if let PhaseEnd::Unbounded = self.optimize(&c1)? {
                // A feasibility phase cannot be unbounded below zero.
                return Err(SolverError::NumericalFailure {
                    iterations: self.pivots,
                });
            }
            let scale = 1.0 + self.rhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            if self.phase1_value() > 1e-7 * scale {
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    x: Vec::new(),
                    duals: Vec::new(),
                    objective: f64::INFINITY,
                });
            }
            // Freeze artificials at zero for phase 2.
            for r in 0..self.m {
                let j = self.n + self.m + r;
                self.lo[j] = 0.0;
                self.hi[j] = 0.0;
            }
        }

        let c2 = self.phase2_costs();
        if let PhaseEnd::Unbounded = self.optimize(&c2)? {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: Vec::new(),
                duals: Vec::new(),
                objective: f64::NEG_INFINITY,
            });
        }

        let x = self.extract_primal();
        let duals = self.btran_costs(&c2);
        let objective = self.inst.objective_value(&x);
        Ok(LpSolution {
            status: LpStatus::Optimal,
            x,
            duals,
            objective,
        })
    }

    fn phase1_costs(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n + 2 * self.m];
        for r in 0..self.m {
            if self.art_sign[r] != 0.0 {
                c[self.n + self.m + r] = 1.0;
            }
        }
        c
    }

    fn phase2_costs(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n + 2 * self.m];
        c[..self.n].copy_from_slice(&self.inst.objective);
        c
    }

    fn phase1_value(&self) -> f64 {
        let mut v = 0.0;
        for (pos, &j) in self.basis.iter().enumerate() {
            if j >= self.n + self.m && self.art_sign[j - self.n - self.m] != 0.0 {
                v += self.x_basic[pos].max(0.0);
            }
        }
        v
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lo[j],
            VarStatus::AtUpper => self.hi[j],
            VarStatus::FreeAtZero => 0.0,
            VarStatus::Basic => unreachable!("basic variable queried as nonbasic"),
        }
    }

    fn initial_basis(&mut self) -> Result<(), SolverError> {
        let total = self.n + 2 * self.m;
        self.status = Vec::with_capacity(total);
        for j in 0..total {
            let (l, h) = (self.lo[j], self.hi[j]);
            self.status.push(if l.is_finite() && h.is_finite() {
                if l.abs() <= h.abs() {
                    VarStatus::AtLower
                } else {
                    VarStatus::AtUpper
                }
            } else if l.is_finite() {
                VarStatus::AtLower
            } else if h.is_finite() {
                VarStatus::AtUpper
            } else {
                VarStatus::FreeAtZero
            });
        }

        // Row residuals at the nonbasic starting point.
        let mut resid = self.rhs.clone();
        for j in 0..self.n {
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for &(r, a) in &self.cols[j] {
                    resid[r] -= a * v;
                }
            }
        }

        self.basis = Vec::with_capacity(self.m);
        self.x_basic = Vec::with_capacity(self.m);
        for r in 0..self.m {
            let slack_ok = match self.inst.rows[r].sense {
                Sense::Le => resid[r] >= 0.0,
                Sense::Ge => resid[r] <= 0.0,
                Sense::Eq => resid[r] == 0.0,
            };
            if slack_ok {
                let j = self.n + r;
                self.basis.push(j);
                self.status[j] = VarStatus::Basic;
                self.x_basic.push(resid[r]);
            } else {
                let j = self.n + self.m + r;
                self.art_sign[r] = if resid[r] >= 0.0 { 1.0 } else { -1.0 };
                self.hi[j] = f64::INFINITY;
                self.basis.push(j);
                self.status[j] = VarStatus::Basic;
                self.x_basic.push(resid[r].abs());
                // Keep the row slack nonbasic at the bound nearest zero.
                let sj = self.n + r;
                self.status[sj] = match self.inst.rows[r].sense {
                    Sense::Ge => VarStatus::AtUpper,
                    _ => VarStatus::AtLower,
                };
            }
        }

        self.refactorize()
    }

    fn basis_matrix(&self) -> Matrix {
        let mut b = Matrix::zeros(self.m, self.m);
        for (pos, &j) in self.basis.iter().enumerate() {
            self.col_entries(j, &mut |r, a| {
                b[(r, pos)] = a;
            });
        }
        b
    }

    fn refactorize(&mut self) -> Result<(), SolverError> {
        let b = self.basis_matrix();
        self.lu = LuFactors::factorize(&b).map_err(|_| SolverError::NumericalFailure {
            iterations: self.pivots,
        })?;
        self.etas.clear();
        // Basic values recomputed from scratch.
        let mut resid = self.rhs.clone();
        for j in 0..self.n + 2 * self.m {
            if self.status[j] != VarStatus::Basic {
                let v = self.nonbasic_value(j);
                if v != 0.0 {
                    self.col_entries(j, &mut |r, a| {
                        resid[r] -= a * v;
                    });
                }
            }
        }
        self.x_basic = self.lu.solve(&resid);
        Ok(())
    }

    /// w = B^-1 A_j.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.m];
        self.col_entries(j, &mut |r, v| {
            a[r] += v;
        });
        let mut w = self.lu.solve(&a);
        for eta in &self.etas {
            let wr = w[eta.row];
            if wr != 0.0 {
                for (wi, ei) in w.iter_mut().zip(&eta.col) {
                    *wi += ei * wr;
                }
                w[eta.row] = eta.col[eta.row] * wr;
            }
        }
        w
    }

    /// y = B^-T c_B for the given full cost vector.
    fn btran_costs(&self, costs: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.basis.iter().map(|&j| costs[j]).collect();
        for eta in self.etas.iter().rev() {
            let mut dot = 0.0;
            for (yi, ei) in y.iter().zip(&eta.col) {
                dot += yi * ei;
            }
            y[eta.row] = dot;
        }
        self.lu.solve_transposed(&y)
    }

    fn reduced_cost(&self, j: usize, y: &[f64], costs: &[f64]) -> f64 {
        let mut dot = 0.0;
        self.col_entries(j, &mut |r, a| {
            dot += y[r] * a;
        });
        costs[j] - dot
    }

    fn optimize(&mut self, costs: &[f64]) -> Result<PhaseEnd, SolverError> {
        let iter_limit = 10_000 + 200 * (self.n + self.m);
        let bland_after = 4000 + 50 * (self.n + self.m);
        let mut confirmed = false;
        loop {
            if self.pivots >= iter_limit {
                return Err(SolverError::NumericalFailure {
                    iterations: self.pivots,
                });
            }
            // Bland's rule engages on a long degenerate stall (and then
            // relaxes once progress resumes) or permanently near the
            // pivot budget; either way cycling cannot persist.
            self.bland = self.pivots >= bland_after || self.stall >= STALL_LIMIT;
            let y = self.btran_costs(costs);
            let (j, dir) = match self.price(&y, costs) {
                Some(e) => {
                    confirmed = false;
                    e
                }
                None => {
                    if confirmed || self.etas.is_empty() {
                        return Ok(PhaseEnd::Optimal);
                    }
                    // Confirm optimality against a fresh factorization.
                    self.refactorize()?;
                    confirmed = true;
                    continue;
                }
            };
            match self.step(j, dir)? {
                Step::Unbounded => {
                    if self.etas.is_empty() {
                        return Ok(PhaseEnd::Unbounded);
                    }
                    self.refactorize()?;
                }
                Step::Moved => {}
            }
            if self.etas.len() >= REFACTOR_EVERY {
                self.refactorize()?;
            }
        }
    }

    fn price(&self, y: &[f64], costs: &[f64]) -> Option<(usize, f64)> {
        let cmax = costs.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        let tol = RC_TOL * (1.0 + cmax);
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let rc = self.reduced_cost(j, y, costs);
            let (viol, dir) = match self.status[j] {
                VarStatus::AtLower => (-rc, 1.0),
                VarStatus::AtUpper => (rc, -1.0),
                VarStatus::FreeAtZero => (rc.abs(), if rc < 0.0 { 1.0 } else { -1.0 }),
                VarStatus::Basic => unreachable!(),
            };
            if viol > tol {
                if self.bland {
                    return Some((j, dir));
                }
                match best {
                    Some((_, v, _)) if v >= viol => {}
                    _ => best = Some((j, viol, dir)),
                }
            }
        }
        best.map(|(j, _, dir)| (j, dir))
    }

    fn step(&mut self, j: usize, dir: f64) -> Result<Step, SolverError> {
        let w = self.ftran(j);
        // Limit imposed by the entering variable's own opposite bound.
        let own_limit = if self.lo[j].is_finite() && self.hi[j].is_finite() {
            self.hi[j] - self.lo[j]
        } else {
            f64::INFINITY
        };

        // Two-pass ratio test: the exact blocking step first, then the
        // numerically best pivot among rows within a small window of it.
        // The step taken is the chosen row's own limit, so the leaving
        // variable lands exactly on its bound; other near-tied rows may
        // overshoot theirs by at most the window, which the next
        // degenerate pivot repairs.
        let row_limit = |pos: usize, wi: f64| -> Option<(f64, bool)> {
            let d = dir * wi;
            if d.abs() <= PIVOT_TOL {
                return None;
            }
            let bj = self.basis[pos];
            let xb = self.x_basic[pos];
            if d > 0.0 {
                if self.lo[bj].is_finite() {
                    Some((((xb - self.lo[bj]) / d).max(0.0), true))
                } else {
                    None
                }
            } else if self.hi[bj].is_finite() {
                Some((((self.hi[bj] - xb) / -d).max(0.0), false))
            } else {
                None
            }
        };

        let mut t_exact = own_limit;
        for (pos, &wi) in w.iter().enumerate() {
            if let Some((limit, _)) = row_limit(pos, wi) {
                t_exact = t_exact.min(limit);
            }
        }
        if t_exact.is_infinite() {
            return Ok(Step::Unbounded);
        }

        let tie = if self.bland { PIVOT_TOL } else { RATIO_TIE_TOL };
        let mut leave: Option<(usize, f64, bool)> = None; // (pos, limit, at lower)
        for (pos, &wi) in w.iter().enumerate() {
            if let Some((limit, at_lower)) = row_limit(pos, wi) {
                if limit > t_exact + tie {
                    continue;
                }
                let replace = match leave {
                    None => true,
                    Some((cur_pos, _, _)) => {
                        if self.bland {
                            self.basis[pos] < self.basis[cur_pos]
                        } else {
                            wi.abs() > w[cur_pos].abs()
                        }
                    }
                };
                if replace {
                    leave = Some((pos, limit, at_lower));
                }
            }
        }

        self.pivots += 1;
        if t_exact <= 1e-10 {
            self.stall += 1;
        } else {
            self.stall = 0;
        }

        let flip = match leave {
            None => true,
            Some((_, limit, _)) => own_limit < limit,
        };
        if flip {
            // Bound flip: the entering variable runs to its other bound.
            for (pos, &wi) in w.iter().enumerate() {
                self.x_basic[pos] -= dir * own_limit * wi;
            }
            self.status[j] = if dir > 0.0 {
                VarStatus::AtUpper
            } else {
                VarStatus::AtLower
            };
            return Ok(Step::Moved);
        }

        {
            let (pos, t_step, at_lower) = leave.expect("flip handled above");
            let pivot = w[pos];
            let enter_val = self.nonbasic_value(j) + dir * t_step;
            for (p, &wi) in w.iter().enumerate() {
                self.x_basic[p] -= dir * t_step * wi;
            }
            let leaving = self.basis[pos];
            self.status[leaving] = if at_lower {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            };
            self.status[j] = VarStatus::Basic;
            self.basis[pos] = j;
            self.x_basic[pos] = enter_val;

            let mut eta = vec![0.0; self.m];
            for (p, &wi) in w.iter().enumerate() {
                eta[p] = -wi / pivot;
            }
            eta[pos] = 1.0 / pivot;
            self.etas.push(Eta { row: pos, col: eta });
            Ok(Step::Moved)
        }
    }

    fn extract_primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for j in 0..self.n {
            if self.status[j] != VarStatus::Basic {
                x[j] = self.nonbasic_value(j);
            }
        }
        for (pos, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                x[j] = self.x_basic[pos];
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use crate::solver::{LpInstance, LpStatus, Sense};

    #[test]
    fn binding_lower_bound_row_has_unit_dual() {
        // min x  s.t. x >= 3, x >= 0
        let mut lp = LpInstance::new(1);
        lp.objective[0] = 1.0;
        lp.add_row(Sense::Ge, 3.0, vec![(0, 1.0)]);
        let sol = super::solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 3.0).abs() < 1e-9);
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!((sol.duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_optimum_reaches_unit_objective() {
        // max x + y  s.t. x + y <= 1, x, y in [0, 1]  (as minimization)
        let mut lp = LpInstance::new(2);
        lp.objective = vec![-1.0, -1.0];
        lp.bounds = vec![(0.0, 1.0), (0.0, 1.0)];
        lp.add_row(Sense::Le, 1.0, vec![(0, 1.0), (1, 1.0)]);
        let sol = super::solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-9);
        assert!((sol.x[0] + sol.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_row_system_is_detected() {
        // x <= 1 and x >= 2 cannot hold together.
        let mut lp = LpInstance::new(1);
        lp.objective[0] = 1.0;
        lp.add_row(Sense::Le, 1.0, vec![(0, 1.0)]);
        lp.add_row(Sense::Ge, 2.0, vec![(0, 1.0)]);
        let sol = super::solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction_is_detected() {
        // min -x with x >= 0 free above.
        let mut lp = LpInstance::new(1);
        lp.objective[0] = -1.0;
        let sol = super::solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_row_with_negative_rhs() {
        // min x + y  s.t. x - y = -2, 0 <= x, y <= 5
        let mut lp = LpInstance::new(2);
        lp.objective = vec![1.0, 1.0];
        lp.bounds = vec![(0.0, 5.0), (0.0, 5.0)];
        lp.add_row(Sense::Eq, -2.0, vec![(0, 1.0), (1, -1.0)]);
        let sol = super::solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 0.0).abs() < 1e-9);
        assert!((sol.x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn free_variable_and_upper_bounded_start() {
        // min 2a - b  s.t. a + b = 4, a free, b in [-3, 1]
        let mut lp = LpInstance::new(2);
        lp.objective = vec![2.0, -1.0];
        lp.bounds = vec![(f64::NEG_INFINITY, f64::INFINITY), (-3.0, 1.0)];
        lp.add_row(Sense::Eq, 4.0, vec![(0, 1.0), (1, 1.0)]);
        let sol = super::solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // b at its upper bound 1, a = 3, objective 5.
        assert!((sol.x[1] - 1.0).abs() < 1e-9);
        assert!((sol.x[0] - 3.0).abs() < 1e-9);
        assert!((sol.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn bound_only_problem_without_rows() {
        let mut lp = LpInstance::new(3);
        lp.objective = vec![1.0, -2.0, 0.5];
        lp.bounds = vec![(-1.0, 2.0), (0.0, 4.0), (-2.0, -1.0)];
        let sol = super::solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.x, vec![-1.0, 4.0, -2.0]);
        assert!((sol.objective - (-1.0 - 8.0 - 1.0)).abs() < 1e-12);
    }
}
