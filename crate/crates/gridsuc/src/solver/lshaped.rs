//! Two-stage L-shaped method: a cutting-plane approximation of the
//! expected recourse cost built from subproblem duals.
//!
//! The master is a binary program whose leading `first_stage_dim`
//! columns couple into the recourse. Each iteration evaluates every
//! scenario subproblem at the current first stage and adds one
//! aggregated optimality cut (or one per scenario with `multicut`).
//! Early iterations may relax the master binaries: relaxation bounds
//! are still valid lower bounds and the collected cuts carry over, so
//! the expensive integer masters only run near convergence.

use super::{
    milp::solve_milp_with_incumbent, MilpInstance, MilpOptions, MilpStatus, SolverError,
};
use rayon::prelude::*;

/// Value and subgradient of one scenario's recourse at a first-stage point.
#[derive(Clone, Debug)]
pub struct RecourseCut {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Supplier of scenario recourse evaluations.
///
/// A recourse that separates into additive components (for the UC
/// models, one per hour) can expose them through `component_count` and
/// `solve_scenario_components`: the driver then approximates each
/// component with its own cutting-plane model, which converges in far
/// fewer iterations than one aggregate model of the sum.
pub trait Recourse: Sync {
    /// Number of leading master columns the recourse depends on.
    fn first_stage_dim(&self) -> usize;
    fn scenario_count(&self) -> usize;
    /// Optimal recourse value and a subgradient w.r.t. the first stage.
    fn solve_scenario(&self, u: &[f64], scenario: usize) -> Result<RecourseCut, SolverError>;

    /// Additive pieces of the scenario recourse (default: one).
    fn component_count(&self) -> usize {
        1
    }

    /// Per-component values and subgradients; must sum to
    /// `solve_scenario`.
    fn solve_scenario_components(
        &self,
        u: &[f64],
        scenario: usize,
    ) -> Result<Vec<RecourseCut>, SolverError> {
        self.solve_scenario(u, scenario).map(|c| vec![c])
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LShapedOptions {
    /// Relative gap closing the upper and lower bounds.
    pub tol: f64,
    pub max_iterations: usize,
    /// One cut per scenario instead of the aggregated average cut.
    pub multicut: bool,
    /// Maximum number of leading iterations with relaxed master binaries.
    pub relaxed_warmup: usize,
    /// Known lower bound on each scenario's recourse value.
    pub recourse_floor: f64,
    pub milp: MilpOptions,
    /// Per-iteration progress on stderr.
    pub verbose: bool,
}

impl Default for LShapedOptions {
    fn default() -> Self {
        LShapedOptions {
            tol: super::LSHAPED_TOL,
            max_iterations: 400,
            multicut: false,
            relaxed_warmup: 40,
            recourse_floor: 0.0,
            milp: MilpOptions {
                gap_tol: 1e-9,
                ..MilpOptions::default()
            },
            verbose: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LShapedStatus {
    Converged,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct LShapedSolution {
    pub status: LShapedStatus,
    /// Master variable values of the best evaluated first stage.
    pub x: Vec<f64>,
    /// Best upper bound: first-stage cost plus sampled expected recourse.
    pub objective: f64,
    pub lower_bound: f64,
    pub iterations: usize,
    pub cuts: usize,
}

pub fn solve_two_stage_lshaped<R: Recourse>(
    master: &MilpInstance,
    recourse: &R,
    options: &LShapedOptions,
) -> Result<LShapedSolution, SolverError> {
    master.lp.validate()?;
    let nm = master.lp.num_vars();
    let dim = recourse.first_stage_dim();
    let scenarios = recourse.scenario_count();
    if dim > nm {
        return Err(SolverError::InvalidInstance(format!(
            "recourse couples {dim} variables but the master has only {nm}"
        )));
    }
    if scenarios == 0 {
        return Err(SolverError::InvalidInstance(
            "recourse declares zero scenarios".into(),
        ));
    }

    // Master working copy with one theta column per recourse component
    // (times the scenario count under multicut).
    let components = recourse.component_count();
    let mut work = master.clone();
    let per_comp = if options.multicut { scenarios } else { 1 };
    let n_theta = components * per_comp;
    let theta0 = nm;
    for _ in 0..n_theta {
        work.lp.add_var(
            1.0 / per_comp as f64,
            options.recourse_floor,
            f64::INFINITY,
        );
    }

    let int_tol = options.milp.int_tol;
    let mut lb = f64::NEG_INFINITY;
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut warm: Option<Vec<f64>> = None;
    let mut cuts = 0usize;
    let mut stall = 0usize;
    let mut dup_streak = 0usize;
    let mut iterations_run = 0usize;
    let mut relaxed = options.relaxed_warmup > 0;
    // Evaluated points kept for the debug-mode cut validity check.
    let mut history: Vec<(Vec<f64>, f64)> = Vec::new();

    for iteration in 1..=options.max_iterations {
        iterations_run = iteration;
        if relaxed && iteration > options.relaxed_warmup {
            relaxed = false;
            stall = 0;
        }
        let master_clock = std::time::Instant::now();
        let (x_master, master_obj, nodes) = if relaxed {
            let sol = super::simplex::solve_lp(&work.lp)?;
            match sol.status {
                super::LpStatus::Optimal => (sol.x, sol.objective, 0),
                super::LpStatus::Infeasible => return Err(SolverError::Infeasible),
                super::LpStatus::Unbounded => return Err(SolverError::Unbounded),
            }
        } else {
            let sol = solve_milp_with_incumbent(&work, &options.milp, warm.as_deref())?;
            if sol.status != MilpStatus::Optimal {
                return Err(SolverError::NodeLimit {
                    limit: options.milp.node_limit,
                });
            }
            (sol.x, sol.objective, sol.nodes)
        };
        let master_elapsed = master_clock.elapsed();

        // Relaxed and integer masters both lower-bound the true optimum;
        // the bound is monotone within a phase because cuts only tighten.
        debug_assert!(
            relaxed || master_obj >= lb - 1e-7 * (1.0 + lb.abs()),
            "master lower bound regressed: {master_obj} < {lb}"
        );
        if master_obj > lb {
            lb = master_obj;
        }

        let u = &x_master[..dim];
        let sub_clock = std::time::Instant::now();
        let evals: Vec<Vec<RecourseCut>> = (0..scenarios)
            .into_par_iter()
            .map(|s| {
                let comps = recourse.solve_scenario_components(u, s)?;
                debug_assert_eq!(comps.len(), components);
                Ok(comps)
            })
            .collect::<Result<_, SolverError>>()?;
        if options.verbose {
            eprintln!(
                "lshaped iter {iteration}: {} master {master_elapsed:?} ({nodes} nodes) \
                 subproblems {:?} lb {lb:.2} obj {master_obj:.2}",
                if relaxed { "relaxed" } else { "integer" },
                sub_clock.elapsed(),
            );
        }

        // Aggregate in fixed scenario order for reproducibility.
        let mean_value = evals
            .iter()
            .map(|comps| comps.iter().map(|c| c.value).sum::<f64>())
            .sum::<f64>()
            / scenarios as f64;
        let integral = work.binaries.iter().all(|&j| {
            let v = x_master[j];
            (v - v.round()).abs() <= int_tol
        });

        if integral {
            let first_stage: f64 = master.lp.objective_value(&x_master[..nm]);
            let ub = first_stage + mean_value;
            let better = match &incumbent {
                Some((_, best)) => ub < *best,
                None => true,
            };
            if better {
                incumbent = Some((x_master[..nm].to_vec(), ub));
            }
        }

        if let Some((_, best_ub)) = &incumbent {
            if best_ub - lb <= options.tol * (1.0 + best_ub.abs()) {
                let (x, objective) = incumbent.unwrap();
                return Ok(LShapedSolution {
                    status: LShapedStatus::Converged,
                    x,
                    objective,
                    lower_bound: lb,
                    iterations: iteration,
                    cuts,
                });
            }
        }

        // Warmup control: leave the relaxed phase once its bound stalls.
        if relaxed {
            let theta_val: f64 = x_master[theta0..theta0 + n_theta]
                .iter()
                .sum::<f64>()
                / per_comp as f64;
            let relax_gap = mean_value - theta_val;
            if relax_gap <= options.tol * (1.0 + mean_value.abs()) {
                stall += 1;
            } else {
                stall = 0;
            }
            if stall >= 2 {
                relaxed = false;
            }
        }

        let mut added_any = false;
        if options.multicut {
            for (s, comps) in evals.iter().enumerate() {
                for (c, cut) in comps.iter().enumerate() {
                    let theta = theta0 + c * scenarios + s;
                    if add_cut(&mut work.lp, theta, dim, u, cut.value, &cut.gradient) {
                        cuts += 1;
                        added_any = true;
                    }
                }
            }
        } else {
            // Scenario-averaged cut per component.
            let mut comp_means = vec![0.0; components];
            let mut comp_grads = vec![vec![0.0; dim]; components];
            for comps in &evals {
                for (c, cut) in comps.iter().enumerate() {
                    comp_means[c] += cut.value;
                    for (g, v) in comp_grads[c].iter_mut().zip(&cut.gradient) {
                        *g += v;
                    }
                }
            }
            for c in 0..components {
                comp_means[c] /= scenarios as f64;
                for g in &mut comp_grads[c] {
                    *g /= scenarios as f64;
                }
            }
            #[cfg(debug_assertions)]
            {
                // The summed component cuts must under-estimate the mean
                // recourse at every previously evaluated point.
                for (u_old, q_old) in &history {
                    let mut est = 0.0;
                    for c in 0..components {
                        est += comp_means[c]
                            + comp_grads[c]
                                .iter()
                                .zip(u_old.iter().zip(u))
                                .map(|(g, (uo, uc))| g * (uo - uc))
                                .sum::<f64>();
                    }
                    debug_assert!(
                        est <= q_old + 1e-6 * (1.0 + q_old.abs()),
                        "invalid optimality cut: estimates {est} at a point with recourse {q_old}"
                    );
                }
                history.push((u.to_vec(), mean_value));
            }
            for c in 0..components {
                if add_cut(
                    &mut work.lp,
                    theta0 + c,
                    dim,
                    u,
                    comp_means[c],
                    &comp_grads[c],
                ) {
                    cuts += 1;
                    added_any = true;
                }
            }
        }
        if added_any {
            dup_streak = 0;
        } else if relaxed {
            // A repeated point under the relaxation: the LP phase has
            // nothing further to say; move to integer masters.
            relaxed = false;
        } else {
            // Integer masters re-proposing covered points means the gap
            // cannot close further at this tolerance.
            dup_streak += 1;
            if dup_streak >= 3 {
                break;
            }
        }

        // Warm incumbent for the next integer master: the point just
        // evaluated with its thetas lifted onto the new cuts.
        if integral {
            let mut w = x_master.clone();
            if options.multicut {
                for (s, comps) in evals.iter().enumerate() {
                    for (c, cut) in comps.iter().enumerate() {
                        w[theta0 + c * scenarios + s] =
                            cut.value.max(options.recourse_floor);
                    }
                }
            } else {
                for c in 0..components {
                    let mean_c = evals.iter().map(|comps| comps[c].value).sum::<f64>()
                        / scenarios as f64;
                    w[theta0 + c] = mean_c.max(options.recourse_floor);
                }
            }
            warm = Some(w);
        }
    }

    match incumbent {
        Some((x, objective)) => Ok(LShapedSolution {
            status: LShapedStatus::IterationLimit,
            x,
            objective,
            lower_bound: lb,
            iterations: iterations_run,
            cuts,
        }),
        None => Err(SolverError::IterationLimit {
            limit: options.max_iterations,
            lb,
            ub: f64::INFINITY,
        }),
    }
}

/// theta >= value + grad . (u - u_k), appended as a `>=` row normalized
/// to unit magnitude (recourse gradients can reach the shedding price
/// times a unit's capacity, and raw cut rows at that scale degrade the
/// master's basis conditioning). Returns false when an equivalent cut
/// is already present.
fn add_cut(
    lp: &mut super::LpInstance,
    theta_col: usize,
    dim: usize,
    u_k: &[f64],
    value: f64,
    grad: &[f64],
) -> bool {
    let mut coeffs = Vec::with_capacity(dim + 1);
    let mut rhs = value;
    let mut scale = 1.0f64;
    for j in 0..dim {
        if grad[j] != 0.0 {
            coeffs.push((j, -grad[j]));
            scale = scale.max(grad[j].abs());
        }
        rhs -= grad[j] * u_k[j];
    }
    coeffs.push((theta_col, 1.0));
    let inv = 1.0 / scale;
    for (_, a) in coeffs.iter_mut() {
        *a *= inv;
    }
    rhs *= inv;

    let duplicate = lp.rows.iter().any(|row| {
        row.sense == super::Sense::Ge
            && (row.rhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs())
            && row.coeffs.len() == coeffs.len()
            && row
                .coeffs
                .iter()
                .zip(&coeffs)
                .all(|(&(ja, aa), &(jb, ab))| ja == jb && (aa - ab).abs() <= 1e-9 * (1.0 + ab.abs()))
    });
    if duplicate {
        return false;
    }
    lp.add_row(super::Sense::Ge, rhs, coeffs);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{milp::solve_milp, LpInstance, Sense};

    /// Capacity blocks vs. stochastic demand: first stage picks binary
    /// blocks at unit cost, recourse pays 10 per unit of shortage.
    struct Shortage {
        demands: Vec<f64>,
    }

    impl Recourse for Shortage {
        fn first_stage_dim(&self) -> usize {
            2
        }
        fn scenario_count(&self) -> usize {
            self.demands.len()
        }
        fn solve_scenario(&self, u: &[f64], s: usize) -> Result<RecourseCut, SolverError> {
            let cover = u[0] + u[1];
            let short = (self.demands[s] - cover).max(0.0);
            let grad = if short > 0.0 {
                vec![-10.0, -10.0]
            } else {
                vec![0.0, 0.0]
            };
            Ok(RecourseCut {
                value: 10.0 * short,
                gradient: grad,
            })
        }
    }

    fn shortage_master() -> MilpInstance {
        let mut lp = LpInstance::new(2);
        lp.objective = vec![1.0, 1.0];
        lp.bounds = vec![(0.0, 1.0), (0.0, 1.0)];
        MilpInstance {
            lp,
            binaries: vec![0, 1],
        }
    }

    fn shortage_extensive(demands: &[f64]) -> MilpInstance {
        let s_count = demands.len();
        let mut lp = LpInstance::new(2 + s_count);
        lp.objective[0] = 1.0;
        lp.objective[1] = 1.0;
        lp.bounds[0] = (0.0, 1.0);
        lp.bounds[1] = (0.0, 1.0);
        for (s, &d) in demands.iter().enumerate() {
            lp.objective[2 + s] = 10.0 / s_count as f64;
            lp.add_row(Sense::Ge, d, vec![(2 + s, 1.0), (0, 1.0), (1, 1.0)]);
        }
        MilpInstance {
            lp,
            binaries: vec![0, 1],
        }
    }

    #[test]
    fn matches_extensive_form_on_toy() {
        for demands in [vec![2.0], vec![0.0, 1.0, 2.0], vec![0.5, 1.2]] {
            let master = shortage_master();
            let rec = Shortage {
                demands: demands.clone(),
            };
            let got =
                solve_two_stage_lshaped(&master, &rec, &LShapedOptions::default()).unwrap();
            let want = solve_milp(
                &shortage_extensive(&demands),
                &crate::solver::MilpOptions::default(),
            )
            .unwrap();
            assert!(
                (got.objective - want.objective).abs() <= 1e-6 * (1.0 + want.objective.abs()),
                "demands {demands:?}: lshaped {} vs extensive {}",
                got.objective,
                want.objective
            );
            assert_eq!(got.status, LShapedStatus::Converged);
        }
    }

    #[test]
    fn single_scenario_is_deterministic_equivalent() {
        let master = shortage_master();
        let rec = Shortage {
            demands: vec![2.0],
        };
        let got = solve_two_stage_lshaped(&master, &rec, &LShapedOptions::default()).unwrap();
        // Both blocks on: cost 2, zero shortage.
        assert!((got.objective - 2.0).abs() < 1e-9);
        assert!((got.x[0] - 1.0).abs() < 1e-9);
        assert!((got.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn multicut_agrees_with_single_cut() {
        let master = shortage_master();
        let rec = Shortage {
            demands: vec![0.0, 1.0, 2.0],
        };
        let single =
            solve_two_stage_lshaped(&master, &rec, &LShapedOptions::default()).unwrap();
        let multi = solve_two_stage_lshaped(
            &master,
            &rec,
            &LShapedOptions {
                multicut: true,
                ..LShapedOptions::default()
            },
        )
        .unwrap();
        assert!((single.objective - multi.objective).abs() < 1e-9);
    }
}
