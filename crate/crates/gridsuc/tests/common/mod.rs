//! Shared test oracles, deliberately independent of the library's
//! solution paths: a naive full-tableau simplex, exhaustive MILP
//! enumeration, and helpers that verify solver output against first
//! principles (feasibility, dual sign conventions, strong duality).

#![allow(dead_code)]

use gridsuc::solver::{LpInstance, LpSolution, LpStatus, MilpInstance, Sense};

/// Outcome of the tableau oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleLp {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

/// Naive two-phase dense tableau simplex with Bland's rule throughout.
///
/// Bounds are compiled away into shifted variables and explicit rows, so
/// this shares no machinery with the revised solver under test.
pub fn tableau_simplex(instance: &LpInstance) -> OracleLp {
    let n = instance.num_vars();

    // x_j = shift_j + sign_j * x'_j (+ extra negative part when free).
    struct VarMap {
        shift: f64,
        sign: f64,
        col: usize,
        neg_col: Option<usize>,
    }

    let mut maps = Vec::with_capacity(n);
    let mut cols = 0usize;
    let mut extra_rows: Vec<(Vec<(usize, f64)>, Sense, f64)> = Vec::new();
    for &(lo, hi) in &instance.bounds {
        if lo.is_finite() {
            let col = cols;
            cols += 1;
            if hi.is_finite() && hi > lo {
                extra_rows.push((vec![(col, 1.0)], Sense::Le, hi - lo));
            } else if hi == lo {
                extra_rows.push((vec![(col, 1.0)], Sense::Le, 0.0));
            }
            maps.push(VarMap {
                shift: lo,
                sign: 1.0,
                col,
                neg_col: None,
            });
        } else if hi.is_finite() {
            let col = cols;
            cols += 1;
            maps.push(VarMap {
                shift: hi,
                sign: -1.0,
                col,
                neg_col: None,
            });
        } else {
            let col = cols;
            let neg = cols + 1;
            cols += 2;
            maps.push(VarMap {
                shift: 0.0,
                sign: 1.0,
                col,
                neg_col: Some(neg),
            });
        }
    }

    // Assemble rows over the transformed nonnegative variables.
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for row in &instance.rows {
        let mut coeffs = vec![0.0; cols];
        let mut rhs = row.rhs;
        for &(j, a) in &row.coeffs {
            let m = &maps[j];
            coeffs[m.col] += a * m.sign;
            if let Some(nc) = m.neg_col {
                coeffs[nc] -= a;
            }
            rhs -= a * m.shift;
        }
        rows.push((coeffs, row.sense, rhs));
    }
    for (sparse, sense, rhs) in extra_rows {
        let mut coeffs = vec![0.0; cols];
        for (c, a) in sparse {
            coeffs[c] = a;
        }
        rows.push((coeffs, sense, rhs));
    }

    let mut objective = vec![0.0; cols];
    let mut obj_shift = 0.0;
    for (j, &c) in instance.objective.iter().enumerate() {
        let m = &maps[j];
        objective[m.col] += c * m.sign;
        if let Some(nc) = m.neg_col {
            objective[nc] -= c;
        }
        obj_shift += c * m.shift;
    }

    // Standard form: slack/surplus columns, b >= 0, artificial basis.
    let m_rows = rows.len();
    let mut width = cols;
    for (_, sense, _) in &rows {
        if *sense != Sense::Eq {
            width += 1;
        }
    }
    let art0 = width;
    width += m_rows;

    let mut a = vec![vec![0.0; width]; m_rows];
    let mut b = vec![0.0; m_rows];
    let mut slack_cursor = cols;
    for (r, (coeffs, sense, rhs)) in rows.iter().enumerate() {
        for (c, &v) in coeffs.iter().enumerate() {
            a[r][c] = v;
        }
        b[r] = *rhs;
        match sense {
            Sense::Le => {
                a[r][slack_cursor] = 1.0;
                slack_cursor += 1;
            }
            Sense::Ge => {
                a[r][slack_cursor] = -1.0;
                slack_cursor += 1;
            }
            Sense::Eq => {}
        }
        if b[r] < 0.0 {
            for v in a[r].iter_mut() {
                *v = -*v;
            }
            b[r] = -b[r];
        }
        a[r][art0 + r] = 1.0;
    }

    let mut basis: Vec<usize> = (art0..art0 + m_rows).collect();

    // Phase 1.
    let phase1: Vec<f64> = (0..width).map(|c| if c >= art0 { 1.0 } else { 0.0 }).collect();
    if !tableau_iterate(&mut a, &mut b, &mut basis, &phase1, art0) {
        return OracleLp::Unbounded; // cannot happen in phase 1
    }
    let p1: f64 = basis
        .iter()
        .zip(&b)
        .filter(|(c, _)| **c >= art0)
        .map(|(_, v)| v)
        .sum();
    if p1 > 1e-7 {
        return OracleLp::Infeasible;
    }

    // Phase 2 keeps artificials pinned by a prohibitive cost.
    let big = 1e10;
    let mut phase2 = vec![0.0; width];
    phase2[..cols].copy_from_slice(&objective);
    for c in art0..width {
        phase2[c] = big;
    }
    if !tableau_iterate(&mut a, &mut b, &mut basis, &phase2, width) {
        return OracleLp::Unbounded;
    }

    let mut xt = vec![0.0; width];
    for (r, &c) in basis.iter().enumerate() {
        xt[c] = b[r];
    }
    let mut x = vec![0.0; n];
    for (j, m) in maps.iter().enumerate() {
        let mut v = m.shift + m.sign * xt[m.col];
        if let Some(nc) = m.neg_col {
            v -= xt[nc];
        }
        x[j] = v;
    }
    let objective_value: f64 = obj_shift
        + objective
            .iter()
            .zip(&xt)
            .map(|(c, v)| c * v)
            .sum::<f64>();
    OracleLp::Optimal {
        x,
        objective: objective_value,
    }
}

/// Bland-rule tableau iteration; returns false on an unbounded ray.
/// `enter_limit` bounds the columns eligible to enter.
fn tableau_iterate(
    a: &mut [Vec<f64>],
    b: &mut [f64],
    basis: &mut [usize],
    costs: &[f64],
    enter_limit: usize,
) -> bool {
    let m = a.len();
    let width = if m == 0 { 0 } else { a[0].len() };
    loop {
        // Reduced costs via the current basis (computed densely each pass).
        let mut y = vec![0.0; m];
        for r in 0..m {
            y[r] = costs[basis[r]];
        }
        // z_c = costs[c] - y' B^-1 a_c requires the tableau to be in
        // canonical form: we maintain it by full pivoting below, so the
        // reduced cost is costs[c] - sum_r y_r a[r][c].
        let mut entering = None;
        for c in 0..width.min(enter_limit) {
            if basis.contains(&c) {
                continue;
            }
            let rc: f64 = costs[c] - (0..m).map(|r| y[r] * a[r][c]).sum::<f64>();
            if rc < -1e-9 {
                entering = Some(c);
                break; // Bland: first eligible index
            }
        }
        let Some(e) = entering else {
            return true;
        };

        let mut pivot_row = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..m {
            if a[r][e] > 1e-9 {
                let ratio = b[r] / a[r][e];
                if ratio < best_ratio - 1e-12
                    || (ratio < best_ratio + 1e-12
                        && pivot_row.map_or(true, |pr: usize| basis[r] < basis[pr]))
                {
                    best_ratio = ratio;
                    pivot_row = Some(r);
                }
            }
        }
        let Some(pr) = pivot_row else {
            return false;
        };

        let pv = a[pr][e];
        for v in a[pr].iter_mut() {
            *v /= pv;
        }
        b[pr] /= pv;
        for r in 0..m {
            if r != pr && a[r][e] != 0.0 {
                let f = a[r][e];
                for c in 0..width {
                    a[r][c] -= f * a[pr][c];
                }
                b[r] -= f * b[pr];
                if b[r] < 0.0 && b[r] > -1e-11 {
                    b[r] = 0.0;
                }
            }
        }
        basis[pr] = e;
    }
}

/// Exhaustive enumeration oracle for small binary programs: every
/// assignment of the binaries is fixed and the residual LP solved with
/// the tableau oracle.
pub fn enumerate_milp(instance: &MilpInstance) -> OracleLp {
    let k = instance.binaries.len();
    assert!(k <= 20, "enumeration oracle is for small instances");
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut any_feasible = false;
    for mask in 0u32..(1u32 << k) {
        let mut lp = instance.lp.clone();
        for (bit, &j) in instance.binaries.iter().enumerate() {
            let v = if mask & (1 << bit) != 0 { 1.0 } else { 0.0 };
            let (lo, hi) = lp.bounds[j];
            if v < lo - 1e-12 || v > hi + 1e-12 {
                lp.bounds[j] = (1.0, 0.0); // force infeasibility of this mask
            } else {
                lp.bounds[j] = (v, v);
            }
        }
        if lp.bounds.iter().any(|&(lo, hi)| lo > hi) {
            continue;
        }
        match tableau_simplex(&lp) {
            OracleLp::Optimal { x, objective } => {
                any_feasible = true;
                if best.as_ref().map_or(true, |(_, o)| objective < *o) {
                    best = Some((x, objective));
                }
            }
            OracleLp::Unbounded => return OracleLp::Unbounded,
            OracleLp::Infeasible => {}
        }
    }
    match best {
        Some((x, objective)) => OracleLp::Optimal { x, objective },
        None => {
            let _ = any_feasible;
            OracleLp::Infeasible
        }
    }
}

/// First-principles verification of an optimal LP solution: primal
/// feasibility, dual sign conventions, and strong duality through the
/// bound multipliers recovered from reduced costs.
pub fn verify_lp_optimal(instance: &LpInstance, sol: &LpSolution, tol: f64) {
    assert_eq!(sol.status, LpStatus::Optimal);
    let viol = instance.max_violation(&sol.x);
    assert!(viol <= 1e-7, "primal violation {viol} exceeds 1e-7");

    let scale = 1.0 + sol.objective.abs();
    for (r, row) in instance.rows.iter().enumerate() {
        let y = sol.duals[r];
        match row.sense {
            Sense::Le => assert!(y <= tol * scale, "<= row {r} carries dual {y} > 0"),
            Sense::Ge => assert!(y >= -tol * scale, ">= row {r} carries dual {y} < 0"),
            Sense::Eq => {}
        }
    }

    // Reduced costs define the bound multipliers.
    let mut dual_obj: f64 = instance
        .rows
        .iter()
        .zip(&sol.duals)
        .map(|(row, y)| row.rhs * y)
        .sum();
    for j in 0..instance.num_vars() {
        let mut rc = instance.objective[j];
        for (row, y) in instance.rows.iter().zip(&sol.duals) {
            for &(jj, aa) in &row.coeffs {
                if jj == j {
                    rc -= aa * y;
                }
            }
        }
        let (lo, hi) = instance.bounds[j];
        if rc > 0.0 {
            assert!(
                lo.is_finite() || rc <= tol * scale,
                "positive reduced cost {rc} on variable {j} without lower bound"
            );
            if lo.is_finite() {
                dual_obj += rc * lo;
            }
        } else if rc < 0.0 {
            assert!(
                hi.is_finite() || -rc <= tol * scale,
                "negative reduced cost {rc} on variable {j} without upper bound"
            );
            if hi.is_finite() {
                dual_obj += rc * hi;
            }
        }
    }
    let gap = (sol.objective - dual_obj).abs();
    assert!(
        gap <= 1e-6 * scale,
        "strong duality violated: primal {} vs dual {dual_obj}",
        sol.objective
    );
}

/// Deterministic xorshift for reproducible random instances in tests.
pub struct TestRng(pub u64);

impl TestRng {
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Random LP generator used by the solver equivalence suites.
pub fn random_lp(rng: &mut TestRng, max_vars: usize, max_rows: usize) -> LpInstance {
    let n = 1 + rng.below(max_vars);
    let m = 1 + rng.below(max_rows);
    let mut lp = LpInstance::new(n);
    for j in 0..n {
        lp.objective[j] = rng.range(-10.0, 10.0);
        let style = rng.below(10);
        lp.bounds[j] = if style < 6 {
            (0.0, rng.range(1.0, 20.0))
        } else if style < 8 {
            (rng.range(-10.0, 0.0), rng.range(0.0, 10.0))
        } else {
            // One-sided; kept bounded often enough that most instances
            // have finite optima.
            (0.0, f64::INFINITY)
        };
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.unit() < 0.6 {
                coeffs.push((j, rng.range(-5.0, 5.0)));
            }
        }
        if coeffs.is_empty() {
            coeffs.push((rng.below(n), rng.range(1.0, 5.0)));
        }
        let style = rng.below(10);
        let (sense, rhs) = if style < 6 {
            (Sense::Le, rng.range(0.0, 25.0))
        } else if style < 8 {
            (Sense::Ge, rng.range(-15.0, 5.0))
        } else {
            (Sense::Eq, rng.range(-3.0, 8.0))
        };
        lp.add_row(sense, rhs, coeffs);
    }
    lp
}

/// Random small binary program with a few continuous columns.
pub fn random_milp(rng: &mut TestRng, max_binaries: usize) -> MilpInstance {
    let k = 2 + rng.below(max_binaries.saturating_sub(1));
    let nc = rng.below(4);
    let n = k + nc;
    let mut lp = LpInstance::new(n);
    for j in 0..k {
        lp.objective[j] = rng.range(-10.0, 10.0);
        lp.bounds[j] = (0.0, 1.0);
    }
    for j in k..n {
        lp.objective[j] = rng.range(-5.0, 5.0);
        lp.bounds[j] = (0.0, rng.range(1.0, 10.0));
    }
    let m = 1 + rng.below(6);
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.unit() < 0.5 {
                coeffs.push((j, rng.range(-4.0, 6.0)));
            }
        }
        if coeffs.is_empty() {
            coeffs.push((rng.below(n), 1.0));
        }
        let sense = if rng.unit() < 0.7 { Sense::Le } else { Sense::Ge };
        let rhs = rng.range(-2.0, 12.0);
        lp.add_row(sense, rhs, coeffs);
    }
    MilpInstance {
        lp,
        binaries: (0..k).collect(),
    }
}
