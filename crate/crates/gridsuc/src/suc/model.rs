//! Builders for the two-stage UC optimization models and the solution
//! paths over them: the monolithic extensive form and the L-shaped
//! decomposition with hourly subproblems.
//!
//! Variable layout shared by the master and the extensive form, unit-
//! major with `T` columns per unit: commitments `u` first (these couple
//! into the recourse), then startup and shutdown cost linearizers.

use super::dispatch::{bus_load_matrix, HourlyLpBuilder};
use super::{CommitmentSchedule, Prices};
use crate::forecast::{sample_scenarios, ForecastError, ForecastModel, Trajectory};
use crate::grid::PowerSystem;
use crate::solver::{
    solve_milp, solve_two_stage_lshaped, LShapedOptions, LpInstance, MilpInstance, MilpOptions,
    Recourse, RecourseCut, Sense, SolverError,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
}

/// First-stage rows and columns: commitments plus turn-on / turn-off
/// indicators that both carry the transition costs and enforce the
/// minimum up/down times through their window form
/// (`sum of startups in the last min_on hours <= u_t`, symmetric for
/// shutdowns). The window form describes the same binary schedules as
/// the pairwise closure constraints but its relaxation is much tighter,
/// which keeps the branch-and-bound trees over these masters small. At
/// integral commitments the link equality pins the indicators to
/// exactly the transitions, so their objective terms are the standard
/// `cost * max(0, u_t - u_{t-1})` linearization.
pub fn build_master(system: &PowerSystem, horizon: usize) -> MilpInstance {
    let units = system.units.len();
    let u_of = |i: usize, t: usize| i * horizon + t;
    let v_of = |i: usize, t: usize| units * horizon + i * horizon + t;
    let w_of = |i: usize, t: usize| 2 * units * horizon + i * horizon + t;

    let mut lp = LpInstance::new(3 * units * horizon);
    for (i, unit) in system.units.iter().enumerate() {
        let min_load_cost = unit.fuel_price * system.fuel[i].f_min;
        let c_su = unit.fuel_price * unit.startup_fuel;
        let c_sd = unit.fuel_price * unit.shutdown_fuel;
        for t in 0..horizon {
            lp.objective[u_of(i, t)] = min_load_cost;
            lp.objective[v_of(i, t)] = c_su;
            lp.objective[w_of(i, t)] = c_sd;
            lp.bounds[u_of(i, t)] = (0.0, 1.0);
            lp.bounds[v_of(i, t)] = (0.0, 1.0);
            lp.bounds[w_of(i, t)] = (0.0, 1.0);
        }
    }

    for (i, unit) in system.units.iter().enumerate() {
        let init_on = if unit.on_initially() { 1.0 } else { 0.0 };
        let held = unit.init_hours();

        // Initial-state closure pins the first hours outright.
        if unit.on_initially() && held < unit.min_on {
            for t in 0..(unit.min_on - held).min(horizon) {
                lp.bounds[u_of(i, t)] = (1.0, 1.0);
            }
        }
        if !unit.on_initially() && held < unit.min_off {
            for t in 0..(unit.min_off - held).min(horizon) {
                lp.bounds[u_of(i, t)] = (0.0, 0.0);
            }
        }

        for t in 0..horizon {
            // Link: u_t - u_{t-1} = v_t - w_t.
            if t == 0 {
                lp.add_row(
                    Sense::Eq,
                    init_on,
                    vec![(u_of(i, 0), 1.0), (v_of(i, 0), -1.0), (w_of(i, 0), 1.0)],
                );
            } else {
                lp.add_row(
                    Sense::Eq,
                    0.0,
                    vec![
                        (u_of(i, t), 1.0),
                        (u_of(i, t - 1), -1.0),
                        (v_of(i, t), -1.0),
                        (w_of(i, t), 1.0),
                    ],
                );
            }

            // Startups within the last min_on hours keep the unit on. A
            // unit still serving its pre-horizon minimum counts as a
            // startup inside the window.
            let mut coeffs: Vec<(usize, f64)> = (t.saturating_sub(unit.min_on - 1)..=t)
                .map(|tau| (v_of(i, tau), 1.0))
                .collect();
            coeffs.push((u_of(i, t), -1.0));
            let virtual_on =
                unit.on_initially() && held < unit.min_on && t + held + 1 <= unit.min_on;
            lp.add_row(Sense::Le, if virtual_on { -1.0 } else { 0.0 }, coeffs);

            // Shutdowns within the last min_off hours keep it off.
            let mut coeffs: Vec<(usize, f64)> = (t.saturating_sub(unit.min_off - 1)..=t)
                .map(|tau| (w_of(i, tau), 1.0))
                .collect();
            coeffs.push((u_of(i, t), 1.0));
            let virtual_off =
                !unit.on_initially() && held < unit.min_off && t + held + 1 <= unit.min_off;
            lp.add_row(Sense::Le, if virtual_off { 0.0 } else { 1.0 }, coeffs);
        }
    }

    let binaries = (0..units * horizon).collect();
    MilpInstance { lp, binaries }
}

/// The SAA extensive form: first-stage columns followed by one dispatch
/// block per scenario, each weighted `1/S` in the objective.
pub fn build_extensive_form(
    system: &PowerSystem,
    loads: &[f64],
    scenarios: &[Trajectory],
    prices: Prices,
) -> Result<MilpInstance, ModelError> {
    let horizon = loads.len();
    let units = system.units.len();
    let farms = system.farms.len();
    let buses = system.buses.len();
    let lines = system.lines.len();
    let s_count = scenarios.len();
    if horizon == 0 {
        return Err(ModelError::DimensionMismatch("empty horizon".into()));
    }
    if s_count == 0 {
        return Err(ModelError::DimensionMismatch("no scenarios".into()));
    }
    for (s, traj) in scenarios.iter().enumerate() {
        if traj.len() != farms || traj.iter().any(|row| row.len() != horizon) {
            return Err(ModelError::DimensionMismatch(format!(
                "scenario {s} is not [{farms} farms][{horizon} hours]"
            )));
        }
    }

    let mut inst = build_master(system, horizon);
    let u_of = |i: usize, t: usize| i * horizon + t;
    let first_stage_cols = 3 * units * horizon;
    let block = (units + farms + 2 * buses) * horizon;
    let p_of = |s: usize, i: usize, t: usize| first_stage_cols + s * block + i * horizon + t;
    let wc_of = |s: usize, w: usize, t: usize| {
        first_stage_cols + s * block + (units + w) * horizon + t
    };
    let ens_of = |s: usize, b: usize, t: usize| {
        first_stage_cols + s * block + (units + farms + b) * horizon + t
    };
    let over_of = |s: usize, b: usize, t: usize| {
        first_stage_cols + s * block + (units + farms + buses + b) * horizon + t
    };

    let weight = 1.0 / s_count as f64;
    let bus_loads = bus_load_matrix(system, loads);
    let unit_bus: Vec<usize> = system.units.iter().map(|u| system.bus_index(u.bus)).collect();
    let farm_bus: Vec<usize> = system.farms.iter().map(|f| system.bus_index(f.bus)).collect();

    for s in 0..s_count {
        for (i, unit) in system.units.iter().enumerate() {
            let rate = unit.fuel_price * system.fuel[i].f_avg;
            for t in 0..horizon {
                let col = inst.lp.add_var(rate * weight, 0.0, unit.p_max);
                debug_assert_eq!(col, p_of(s, i, t));
            }
        }
        for w in 0..farms {
            for t in 0..horizon {
                let col = inst
                    .lp
                    .add_var(prices.c_wc * weight, 0.0, scenarios[s][w][t]);
                debug_assert_eq!(col, wc_of(s, w, t));
            }
        }
        for b in 0..buses {
            for t in 0..horizon {
                let col = inst
                    .lp
                    .add_var(prices.c_ens * weight, 0.0, bus_loads[b][t]);
                debug_assert_eq!(col, ens_of(s, b, t));
            }
        }
        for b in 0..buses {
            for t in 0..horizon {
                let col = inst
                    .lp
                    .add_var(prices.c_ens * weight, 0.0, f64::INFINITY);
                debug_assert_eq!(col, over_of(s, b, t));
            }
        }
    }

    for (s, traj) in scenarios.iter().enumerate() {
        for t in 0..horizon {
            // System balance.
            let total_load: f64 = bus_loads.iter().map(|row| row[t]).sum();
            let total_wind: f64 = traj.iter().map(|row| row[t]).sum();
            let mut coeffs = Vec::with_capacity(units + farms + 2 * buses);
            for i in 0..units {
                coeffs.push((p_of(s, i, t), 1.0));
            }
            for w in 0..farms {
                coeffs.push((wc_of(s, w, t), -1.0));
            }
            for b in 0..buses {
                coeffs.push((ens_of(s, b, t), 1.0));
                coeffs.push((over_of(s, b, t), -1.0));
            }
            inst.lp
                .add_row(Sense::Eq, total_load - total_wind, coeffs);

            // DC flow limits through the shift factors.
            for li in 0..lines {
                let mut coeffs = Vec::new();
                let mut constant = 0.0;
                for i in 0..units {
                    let k = system.ptdf[li][unit_bus[i]];
                    if k != 0.0 {
                        coeffs.push((p_of(s, i, t), k));
                    }
                }
                for w in 0..farms {
                    let k = system.ptdf[li][farm_bus[w]];
                    if k != 0.0 {
                        coeffs.push((wc_of(s, w, t), -k));
                    }
                    constant += k * traj[w][t];
                }
                for b in 0..buses {
                    let k = system.ptdf[li][b];
                    if k != 0.0 {
                        coeffs.push((ens_of(s, b, t), k));
                        coeffs.push((over_of(s, b, t), -k));
                    }
                    constant -= k * bus_loads[b][t];
                }
                let limit = system.lines[li].flow_limit;
                inst.lp.add_row(Sense::Le, limit - constant, coeffs.clone());
                inst.lp.add_row(Sense::Ge, -limit - constant, coeffs);
            }

            // Commitment-gated output limits.
            for (i, unit) in system.units.iter().enumerate() {
                inst.lp.add_row(
                    Sense::Le,
                    0.0,
                    vec![(p_of(s, i, t), 1.0), (u_of(i, t), -unit.p_max)],
                );
                inst.lp.add_row(
                    Sense::Ge,
                    0.0,
                    vec![(p_of(s, i, t), 1.0), (u_of(i, t), -unit.p_min)],
                );
            }
        }
    }

    Ok(inst)
}

/// Deterministic UC: the extensive form collapsed onto one point
/// forecast.
pub fn build_deterministic_uc(
    system: &PowerSystem,
    loads: &[f64],
    point_forecast: &Trajectory,
    prices: Prices,
) -> Result<MilpInstance, ModelError> {
    build_extensive_form(system, loads, std::slice::from_ref(point_forecast), prices)
}

/// Scenario recourse evaluator for the L-shaped path: one hourly LP per
/// hour with commitment-coupling rows, summed over the horizon.
pub struct UcRecourse<'a> {
    system: &'a PowerSystem,
    scenarios: &'a [Trajectory],
    bus_loads: Vec<Vec<f64>>,
    horizon: usize,
    builder: HourlyLpBuilder<'a>,
}

impl<'a> UcRecourse<'a> {
    pub fn new(
        system: &'a PowerSystem,
        loads: &[f64],
        scenarios: &'a [Trajectory],
        prices: Prices,
    ) -> Self {
        UcRecourse {
            system,
            scenarios,
            bus_loads: bus_load_matrix(system, loads),
            horizon: loads.len(),
            builder: HourlyLpBuilder::new(system, prices, true),
        }
    }
}

impl UcRecourse<'_> {
    /// Solve the hour-`t` dispatch LP of one scenario; value plus the
    /// per-unit commitment gradient.
    fn solve_hour(
        &self,
        u: &[f64],
        scenario: usize,
        t: usize,
    ) -> Result<(f64, Vec<f64>), SolverError> {
        let units = self.system.units.len();
        let farms = self.system.farms.len();
        let buses = self.system.buses.len();
        let traj = &self.scenarios[scenario];
        let mut u_col = vec![0.0; units];
        let mut wind_col = vec![0.0; farms];
        let mut load_col = vec![0.0; buses];
        for i in 0..units {
            u_col[i] = u[i * self.horizon + t];
        }
        for w in 0..farms {
            wind_col[w] = traj[w][t];
        }
        for b in 0..buses {
            load_col[b] = self.bus_loads[b][t];
        }
        let lp = self.builder.build(&u_col, &wind_col, &load_col);
        let sol = crate::solver::solve_lp(&lp)?;
        match sol.status {
            crate::solver::LpStatus::Optimal => {}
            crate::solver::LpStatus::Infeasible => {
                return Err(SolverError::SubproblemInfeasible { scenario })
            }
            crate::solver::LpStatus::Unbounded => return Err(SolverError::Unbounded),
        }
        Ok((sol.objective, self.builder.commitment_gradient(&sol.duals)))
    }
}

impl Recourse for UcRecourse<'_> {
    fn first_stage_dim(&self) -> usize {
        self.system.units.len() * self.horizon
    }

    fn scenario_count(&self) -> usize {
        self.scenarios.len()
    }

    /// The dispatch separates by hour; expose each hour as its own
    /// additive component so the cutting-plane model converges in few
    /// iterations.
    fn component_count(&self) -> usize {
        self.horizon
    }

    fn solve_scenario(&self, u: &[f64], scenario: usize) -> Result<RecourseCut, SolverError> {
        let units = self.system.units.len();
        let mut value = 0.0;
        let mut gradient = vec![0.0; units * self.horizon];
        for t in 0..self.horizon {
            let (v, g) = self.solve_hour(u, scenario, t)?;
            value += v;
            for (i, gi) in g.into_iter().enumerate() {
                gradient[i * self.horizon + t] = gi;
            }
        }
        Ok(RecourseCut { value, gradient })
    }

    fn solve_scenario_components(
        &self,
        u: &[f64],
        scenario: usize,
    ) -> Result<Vec<RecourseCut>, SolverError> {
        let units = self.system.units.len();
        let dim = units * self.horizon;
        let mut out = Vec::with_capacity(self.horizon);
        for t in 0..self.horizon {
            let (value, g) = self.solve_hour(u, scenario, t)?;
            let mut gradient = vec![0.0; dim];
            for (i, gi) in g.into_iter().enumerate() {
                gradient[i * self.horizon + t] = gi;
            }
            out.push(RecourseCut { value, gradient });
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaaMethod {
    /// Monolithic MILP over all scenario blocks.
    Extensive,
    /// L-shaped decomposition with hourly subproblems.
    LShaped { multicut: bool },
}

/// Sample `s_count` scenarios from the forecast and solve the SAA
/// problem with the chosen method. Returns the committed schedule and
/// the SAA objective.
pub fn solve_saa_suc(
    system: &PowerSystem,
    loads: &[f64],
    model: &ForecastModel,
    s_count: usize,
    seed: u64,
    prices: Prices,
    caps: &[f64],
    method: SaaMethod,
) -> Result<(CommitmentSchedule, f64), ModelError> {
    let set = sample_scenarios(model, s_count, loads.len(), seed, caps)?;
    let (schedule, objective) =
        solve_uc_over_scenarios(system, loads, &set.scenarios, prices, method)?;
    Ok((schedule, objective))
}

/// Solve the SAA problem over an explicit scenario set.
pub fn solve_uc_over_scenarios(
    system: &PowerSystem,
    loads: &[f64],
    scenarios: &[Trajectory],
    prices: Prices,
    method: SaaMethod,
) -> Result<(CommitmentSchedule, f64), ModelError> {
    let units = system.units.len();
    let horizon = loads.len();
    let (x, objective) = match method {
        SaaMethod::Extensive => {
            let inst = build_extensive_form(system, loads, scenarios, prices)?;
            let sol = solve_milp(&inst, &MilpOptions::default())?;
            (sol.x, sol.objective)
        }
        SaaMethod::LShaped { multicut } => {
            let master = build_master(system, horizon);
            let recourse = UcRecourse::new(system, loads, scenarios, prices);
            let sol = solve_two_stage_lshaped(
                &master,
                &recourse,
                &LShapedOptions {
                    multicut,
                    ..LShapedOptions::default()
                },
            )?;
            (sol.x, sol.objective)
        }
    };
    let schedule = CommitmentSchedule::from_flat(units, horizon, &x);
    debug_assert_eq!(schedule.validate(&system.units), Ok(()));
    Ok((schedule, objective))
}
