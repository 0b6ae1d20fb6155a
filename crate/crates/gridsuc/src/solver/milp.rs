//! Branch and bound over the LP relaxation for binary programs.
//!
//! Best-bound node selection with most-fractional branching. Small UC
//! masters and extensive forms are the target workload, so nodes keep a
//! full bounds vector rather than a diff chain.

use super::{simplex::solve_lp, LpStatus, MilpInstance, SolverError};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpStatus {
    /// Proven within the requested gap.
    Optimal,
    /// Node limit reached; incumbent and gap reported as-is.
    NodeLimit,
}

#[derive(Clone, Debug)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Relative bound gap at termination.
    pub gap: f64,
    pub nodes: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct MilpOptions {
    pub gap_tol: f64,
    pub node_limit: usize,
    pub int_tol: f64,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            gap_tol: super::MILP_GAP_TOL,
            node_limit: 100_000,
            int_tol: 1e-6,
        }
    }
}

struct Node {
    bound: f64,
    bounds: Vec<(f64, f64)>,
    depth: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.depth == other.depth
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the smallest bound pops first,
        // breaking ties toward deeper nodes (cheap dives).
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then_with(|| self.depth.cmp(&other.depth))
    }
}

pub fn solve_milp(
    instance: &MilpInstance,
    options: &MilpOptions,
) -> Result<MilpSolution, SolverError> {
    solve_milp_with_incumbent(instance, options, None)
}

/// As [`solve_milp`], but seeded with a known-feasible point used for
/// pruning from the first node on.
pub fn solve_milp_with_incumbent(
    instance: &MilpInstance,
    options: &MilpOptions,
    warm: Option<&[f64]>,
) -> Result<MilpSolution, SolverError> {
    instance.lp.validate()?;
    for &j in &instance.binaries {
        if j >= instance.lp.num_vars() {
            return Err(SolverError::InvalidInstance(format!(
                "binary index {j} out of range"
            )));
        }
    }

    if instance.binaries.is_empty() {
        let sol = solve_lp(&instance.lp)?;
        return match sol.status {
            LpStatus::Optimal => Ok(MilpSolution {
                status: MilpStatus::Optimal,
                x: sol.x,
                objective: sol.objective,
                gap: 0.0,
                nodes: 1,
            }),
            LpStatus::Infeasible => Err(SolverError::Infeasible),
            LpStatus::Unbounded => Err(SolverError::Unbounded),
        };
    }

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    if let Some(x0) = warm {
        let feasible = instance.lp.max_violation(x0) <= 1e-6
            && instance
                .binaries
                .iter()
                .all(|&j| (x0[j] - x0[j].round()).abs() <= options.int_tol);
        if feasible {
            incumbent = Some((x0.to_vec(), instance.lp.objective_value(x0)));
        }
    }

    let mut root_bounds = instance.lp.bounds.clone();
    for &j in &instance.binaries {
        let (lo, hi) = root_bounds[j];
        root_bounds[j] = (lo.max(0.0), hi.min(1.0));
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        bounds: root_bounds,
        depth: 0,
    });

    let mut nodes = 0usize;
    let mut lp = instance.lp.clone();
    let rel_gap = |inc: f64, bound: f64| ((inc - bound) / (1.0 + inc.abs())).max(0.0);

    while let Some(node) = heap.pop() {
        if let Some((_, inc_obj)) = &incumbent {
            if rel_gap(*inc_obj, node.bound) <= options.gap_tol && node.bound > f64::NEG_INFINITY {
                // Remaining tree cannot improve beyond the gap.
                break;
            }
        }
        if nodes >= options.node_limit {
            return match incumbent {
                Some((x, objective)) => {
                    let bound = node.bound;
                    Ok(MilpSolution {
                        status: MilpStatus::NodeLimit,
                        gap: rel_gap(objective, bound),
                        x,
                        objective,
                        nodes,
                    })
                }
                None => Err(SolverError::NodeLimit {
                    limit: options.node_limit,
                }),
            };
        }
        nodes += 1;

        lp.bounds.copy_from_slice(&node.bounds);
        let relax = solve_lp(&lp)?;
        match relax.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => return Err(SolverError::Unbounded),
            LpStatus::Optimal => {}
        }
        if let Some((_, inc_obj)) = &incumbent {
            if relax.objective >= *inc_obj - options.gap_tol * (1.0 + inc_obj.abs()) {
                continue;
            }
        }

        // Most fractional binary.
        let mut branch: Option<(usize, f64)> = None;
        for &j in &instance.binaries {
            let frac = (relax.x[j] - relax.x[j].round()).abs();
            if frac > options.int_tol {
                match branch {
                    Some((_, f)) if f >= frac => {}
                    _ => branch = Some((j, frac)),
                }
            }
        }

        match branch {
            None => {
                // Integral: candidate incumbent.
                let better = match &incumbent {
                    Some((_, inc_obj)) => relax.objective < *inc_obj,
                    None => true,
                };
                if better {
                    let mut x = relax.x.clone();
                    for &j in &instance.binaries {
                        x[j] = x[j].round();
                    }
                    incumbent = Some((x, relax.objective));
                }
            }
            Some((j, _)) => {
                for fix in [1.0, 0.0] {
                    let mut child = node.bounds.clone();
                    child[j] = (fix, fix);
                    heap.push(Node {
                        bound: relax.objective,
                        bounds: child,
                        depth: node.depth + 1,
                    });
                }
            }
        }
    }

    match incumbent {
        Some((x, objective)) => {
            let best_open = heap
                .peek()
                .map(|n| n.bound)
                .unwrap_or(objective)
                .min(objective);
            Ok(MilpSolution {
                status: MilpStatus::Optimal,
                gap: rel_gap(objective, best_open),
                x,
                objective,
                nodes,
            })
        }
        None => Err(SolverError::Infeasible),
    }
}
