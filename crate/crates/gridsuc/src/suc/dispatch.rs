//! Second-stage economic dispatch. With commitments fixed and no
//! intertemporal coupling in the second stage, the dispatch LP
//! separates by hour into small problems: thermal outputs, wind
//! curtailment, per-bus shedding and a per-bus surplus absorber against
//! one balance row, two flow rows per line, and commitment-gated output
//! bounds.
//!
//! The surplus absorber keeps recourse complete even when forced
//! minimum outputs exceed what the demand and the network can take; it
//! is priced like shedding and stays at zero in any economically sane
//! instance.

use super::{first_stage_cost, CommitmentSchedule, CostBreakdown, Prices};
use crate::forecast::Trajectory;
use crate::grid::PowerSystem;
use crate::solver::{solve_lp, LpInstance, LpStatus, Sense, SolverError};
use rayon::prelude::*;

/// Variable layout of one hourly dispatch LP.
#[derive(Clone, Copy)]
pub(crate) struct HourlyLayout {
    pub units: usize,
    pub farms: usize,
    pub buses: usize,
    pub lines: usize,
}

impl HourlyLayout {
    pub fn of(system: &PowerSystem) -> Self {
        HourlyLayout {
            units: system.units.len(),
            farms: system.farms.len(),
            buses: system.buses.len(),
            lines: system.lines.len(),
        }
    }
    pub fn p(&self, i: usize) -> usize {
        i
    }
    pub fn wc(&self, w: usize) -> usize {
        self.units + w
    }
    pub fn ens(&self, b: usize) -> usize {
        self.units + self.farms + b
    }
    pub fn over(&self, b: usize) -> usize {
        self.units + self.farms + self.buses + b
    }
    pub fn num_vars(&self) -> usize {
        self.units + self.farms + 2 * self.buses
    }
}

/// Reusable template for the hourly LP: static coefficients once,
/// per-hour right-hand sides and bounds patched in on each build.
pub(crate) struct HourlyLpBuilder<'a> {
    pub system: &'a PowerSystem,
    pub layout: HourlyLayout,
    template: LpInstance,
    /// Index of each bus hosting a unit / farm, resolved once.
    unit_bus: Vec<usize>,
    farm_bus: Vec<usize>,
    /// Whether the template carries the two commitment-coupling rows per
    /// unit (used for dual extraction in the decomposition).
    coupled: bool,
}

impl<'a> HourlyLpBuilder<'a> {
    pub fn new(system: &'a PowerSystem, prices: Prices, coupled: bool) -> Self {
        let layout = HourlyLayout::of(system);
        let mut lp = LpInstance::new(layout.num_vars());
        for (i, unit) in system.units.iter().enumerate() {
            lp.objective[layout.p(i)] = unit.fuel_price * system.fuel[i].f_avg;
        }
        for w in 0..layout.farms {
            lp.objective[layout.wc(w)] = prices.c_wc;
        }
        for b in 0..layout.buses {
            lp.objective[layout.ens(b)] = prices.c_ens;
            lp.objective[layout.over(b)] = prices.c_ens;
            lp.bounds[layout.over(b)] = (0.0, f64::INFINITY);
        }

        let unit_bus: Vec<usize> = system
            .units
            .iter()
            .map(|u| system.bus_index(u.bus))
            .collect();
        let farm_bus: Vec<usize> = system
            .farms
            .iter()
            .map(|f| system.bus_index(f.bus))
            .collect();

        // Balance: sum(p) - sum(wc) + sum(ens) - sum(over) = D - xi.
        let mut balance = Vec::with_capacity(layout.num_vars());
        for i in 0..layout.units {
            balance.push((layout.p(i), 1.0));
        }
        for w in 0..layout.farms {
            balance.push((layout.wc(w), -1.0));
        }
        for b in 0..layout.buses {
            balance.push((layout.ens(b), 1.0));
            balance.push((layout.over(b), -1.0));
        }
        lp.add_row(Sense::Eq, 0.0, balance);

        // Flow rows per line: coefficients are the host-bus shift
        // factors; shedding raises net injection at its bus, surplus
        // absorption lowers it.
        for (li, line) in system.lines.iter().enumerate() {
            let mut coeffs = Vec::with_capacity(layout.num_vars());
            for i in 0..layout.units {
                let k = system.ptdf[li][unit_bus[i]];
                if k != 0.0 {
                    coeffs.push((layout.p(i), k));
                }
            }
            for w in 0..layout.farms {
                let k = system.ptdf[li][farm_bus[w]];
                if k != 0.0 {
                    coeffs.push((layout.wc(w), -k));
                }
            }
            for b in 0..layout.buses {
                let k = system.ptdf[li][b];
                if k != 0.0 {
                    coeffs.push((layout.ens(b), k));
                    coeffs.push((layout.over(b), -k));
                }
            }
            lp.add_row(Sense::Le, line.flow_limit, coeffs.clone());
            lp.add_row(Sense::Ge, -line.flow_limit, coeffs);
        }

        if coupled {
            for (i, unit) in system.units.iter().enumerate() {
                let _ = unit;
                lp.add_row(Sense::Le, 0.0, vec![(layout.p(i), 1.0)]);
                lp.add_row(Sense::Ge, 0.0, vec![(layout.p(i), 1.0)]);
            }
        }

        HourlyLpBuilder {
            system,
            layout,
            template: lp,
            unit_bus,
            farm_bus,
            coupled,
        }
    }

    fn flow_const(&self, li: usize, wind: &[f64], bus_loads: &[f64]) -> f64 {
        let mut c = 0.0;
        for (w, &xi) in wind.iter().enumerate() {
            c += self.system.ptdf[li][self.farm_bus[w]] * xi;
        }
        for (b, &d) in bus_loads.iter().enumerate() {
            c -= self.system.ptdf[li][b] * d;
        }
        c
    }

    /// Instantiate the LP for one hour. `u` holds per-unit commitment
    /// levels (binary in evaluation, possibly fractional inside the
    /// decomposition's relaxed masters).
    pub fn build(&self, u: &[f64], wind: &[f64], bus_loads: &[f64]) -> LpInstance {
        let mut lp = self.template.clone();
        let lay = &self.layout;
        let total_load: f64 = bus_loads.iter().sum();
        let total_wind: f64 = wind.iter().sum();
        lp.rows[0].rhs = total_load - total_wind;
        for li in 0..lay.lines {
            let c = self.flow_const(li, wind, bus_loads);
            let limit = self.system.lines[li].flow_limit;
            lp.rows[1 + 2 * li].rhs = limit - c;
            lp.rows[2 + 2 * li].rhs = -limit - c;
        }
        for (i, unit) in self.system.units.iter().enumerate() {
            if self.coupled {
                lp.bounds[lay.p(i)] = (0.0, unit.p_max);
                let base = 1 + 2 * lay.lines;
                lp.rows[base + 2 * i].rhs = unit.p_max * u[i];
                lp.rows[base + 2 * i + 1].rhs = unit.p_min * u[i];
            } else {
                lp.bounds[lay.p(i)] = (unit.p_min * u[i], unit.p_max * u[i]);
            }
        }
        for (w, &xi) in wind.iter().enumerate() {
            lp.bounds[lay.wc(w)] = (0.0, xi);
        }
        for (b, &d) in bus_loads.iter().enumerate() {
            lp.bounds[lay.ens(b)] = (0.0, d);
        }
        lp
    }

    /// Gradient of the hourly optimum with respect to each unit's
    /// commitment level, from the coupling-row duals.
    pub fn commitment_gradient(&self, duals: &[f64]) -> Vec<f64> {
        assert!(self.coupled);
        let base = 1 + 2 * self.layout.lines;
        self.system
            .units
            .iter()
            .enumerate()
            .map(|(i, unit)| {
                duals[base + 2 * i] * unit.p_max + duals[base + 2 * i + 1] * unit.p_min
            })
            .collect()
    }
}

/// Per-bus loads for every hour: `[bus][hour]`.
pub(crate) fn bus_load_matrix(system: &PowerSystem, loads: &[f64]) -> Vec<Vec<f64>> {
    system
        .buses
        .iter()
        .map(|b| loads.iter().map(|l| b.load_share * l).collect())
        .collect()
}

/// Second-stage solution over a horizon.
#[derive(Clone, Debug)]
pub struct DispatchSolution {
    /// Thermal output, `[unit][hour]` MW.
    pub p: Vec<Vec<f64>>,
    /// Energy not served, `[bus][hour]` MW.
    pub ens: Vec<Vec<f64>>,
    /// Emergency surplus absorption, `[bus][hour]` MW.
    pub over: Vec<Vec<f64>>,
    /// Wind curtailment, `[farm][hour]` MW.
    pub wc: Vec<Vec<f64>>,
    /// Total second-stage cost, $.
    pub cost: f64,
}

impl DispatchSolution {
    /// Line flows implied by the dispatch, `[line][hour]` MW.
    pub fn line_flows(
        &self,
        system: &PowerSystem,
        wind: &Trajectory,
        loads: &[f64],
    ) -> Vec<Vec<f64>> {
        let horizon = self.p.first().map_or(0, |r| r.len());
        let bus_loads = bus_load_matrix(system, &loads[..horizon]);
        let mut flows = vec![vec![0.0; horizon]; system.lines.len()];
        for t in 0..horizon {
            let mut inj = vec![0.0; system.buses.len()];
            for (i, unit) in system.units.iter().enumerate() {
                inj[system.bus_index(unit.bus)] += self.p[i][t];
            }
            for (w, farm) in system.farms.iter().enumerate() {
                inj[system.bus_index(farm.bus)] += wind[w][t] - self.wc[w][t];
            }
            for b in 0..system.buses.len() {
                inj[b] -= bus_loads[b][t] - self.ens[b][t];
                inj[b] -= self.over[b][t];
            }
            for (li, flow_row) in flows.iter_mut().enumerate() {
                flow_row[t] = system.ptdf[li]
                    .iter()
                    .zip(&inj)
                    .map(|(k, x)| k * x)
                    .sum();
            }
        }
        flows
    }

    /// Check the physical invariants: balance, flow limits, gated
    /// output bounds and slack ranges. Returns the first defect found.
    pub fn verify(
        &self,
        system: &PowerSystem,
        schedule: &CommitmentSchedule,
        wind: &Trajectory,
        loads: &[f64],
    ) -> Result<(), String> {
        let horizon = schedule.horizon();
        let bus_loads = bus_load_matrix(system, &loads[..horizon]);
        for t in 0..horizon {
            let gen: f64 = (0..system.units.len()).map(|i| self.p[i][t]).sum();
            let wind_used: f64 = (0..system.farms.len())
                .map(|w| wind[w][t] - self.wc[w][t])
                .sum();
            let served: f64 = (0..system.buses.len())
                .map(|b| bus_loads[b][t] - self.ens[b][t])
                .sum();
            let absorbed: f64 = (0..system.buses.len()).map(|b| self.over[b][t]).sum();
            let imbalance = (gen + wind_used - served - absorbed).abs();
            if imbalance > 1e-6 {
                return Err(format!("hour {t}: balance off by {imbalance} MW"));
            }
            for (i, unit) in system.units.iter().enumerate() {
                let (lo, hi) = if schedule.u[i][t] {
                    (unit.p_min, unit.p_max)
                } else {
                    (0.0, 0.0)
                };
                if self.p[i][t] < lo - 1e-6 || self.p[i][t] > hi + 1e-6 {
                    return Err(format!(
                        "hour {t}: unit {} output {} outside [{lo}, {hi}]",
                        unit.id, self.p[i][t]
                    ));
                }
            }
            for w in 0..system.farms.len() {
                if self.wc[w][t] < -1e-9 || self.wc[w][t] > wind[w][t] + 1e-6 {
                    return Err(format!("hour {t}: curtailment outside [0, capacity]"));
                }
            }
            for b in 0..system.buses.len() {
                if self.ens[b][t] < -1e-9 || self.ens[b][t] > bus_loads[b][t] + 1e-6 {
                    return Err(format!("hour {t}: shedding outside [0, load]"));
                }
                if self.over[b][t] < -1e-9 {
                    return Err(format!("hour {t}: negative surplus absorption"));
                }
            }
        }
        let flows = self.line_flows(system, wind, loads);
        for (li, line) in system.lines.iter().enumerate() {
            for t in 0..horizon {
                if flows[li][t].abs() > line.flow_limit + 1e-6 {
                    return Err(format!(
                        "hour {t}: line {} flow {} exceeds {}",
                        line.id, flows[li][t], line.flow_limit
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Solve the second stage for a fixed schedule against one wind
/// trajectory. Complete recourse: this cannot be infeasible for any
/// valid schedule and nonnegative wind.
pub fn evaluate_dispatch(
    system: &PowerSystem,
    schedule: &CommitmentSchedule,
    wind: &Trajectory,
    loads: &[f64],
    prices: Prices,
) -> Result<DispatchSolution, SolverError> {
    let horizon = schedule.horizon();
    let builder = HourlyLpBuilder::new(system, prices, false);
    let lay = builder.layout;
    let bus_loads = bus_load_matrix(system, &loads[..horizon]);

    let mut out = DispatchSolution {
        p: vec![vec![0.0; horizon]; lay.units],
        ens: vec![vec![0.0; horizon]; lay.buses],
        over: vec![vec![0.0; horizon]; lay.buses],
        wc: vec![vec![0.0; horizon]; lay.farms],
        cost: 0.0,
    };

    let mut u_col = vec![0.0; lay.units];
    let mut wind_col = vec![0.0; lay.farms];
    let mut load_col = vec![0.0; lay.buses];
    for t in 0..horizon {
        for i in 0..lay.units {
            u_col[i] = if schedule.u[i][t] { 1.0 } else { 0.0 };
        }
        for w in 0..lay.farms {
            wind_col[w] = wind[w][t];
        }
        for b in 0..lay.buses {
            load_col[b] = bus_loads[b][t];
        }
        let lp = builder.build(&u_col, &wind_col, &load_col);
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                // The surplus and shedding slacks make this unreachable.
                return Err(SolverError::SubproblemInfeasible { scenario: t });
            }
            LpStatus::Unbounded => return Err(SolverError::Unbounded),
        }
        for i in 0..lay.units {
            out.p[i][t] = sol.x[lay.p(i)];
        }
        for w in 0..lay.farms {
            out.wc[w][t] = sol.x[lay.wc(w)];
        }
        for b in 0..lay.buses {
            out.ens[b][t] = sol.x[lay.ens(b)];
            out.over[b][t] = sol.x[lay.over(b)];
        }
        out.cost += sol.objective;
    }
    debug_assert_eq!(
        out.verify(system, schedule, wind, loads),
        Ok(()),
        "dispatch violates its invariants"
    );
    Ok(out)
}

/// Total cost (first stage plus dispatch) of a schedule under each
/// scenario, in scenario order.
pub fn scenario_dispatch_costs(
    system: &PowerSystem,
    schedule: &CommitmentSchedule,
    scenarios: &[Trajectory],
    loads: &[f64],
    prices: Prices,
) -> Result<Vec<f64>, SolverError> {
    let base = first_stage_cost(system, schedule);
    scenarios
        .par_iter()
        .map(|w| evaluate_dispatch(system, schedule, w, loads, prices).map(|d| base + d.cost))
        .collect()
}

/// Sample mean and variance of the schedule's total cost over a
/// scenario set (the SAA estimator and its spread).
pub fn estimate_expected_cost(
    system: &PowerSystem,
    schedule: &CommitmentSchedule,
    scenarios: &[Trajectory],
    loads: &[f64],
    prices: Prices,
) -> Result<(f64, f64), SolverError> {
    let costs = scenario_dispatch_costs(system, schedule, scenarios, loads, prices)?;
    Ok(mean_variance(&costs))
}

pub(crate) fn mean_variance(costs: &[f64]) -> (f64, f64) {
    let n = costs.len();
    let mean = costs.iter().sum::<f64>() / n as f64;
    let variance = if n < 2 {
        0.0
    } else {
        costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1) as f64
    };
    (mean, variance)
}

/// Cost actually incurred by a schedule against a realized trajectory,
/// itemized.
pub fn realized_cost(
    system: &PowerSystem,
    schedule: &CommitmentSchedule,
    realized_wind: &Trajectory,
    loads: &[f64],
    prices: Prices,
) -> Result<CostBreakdown, SolverError> {
    let dispatch = evaluate_dispatch(system, schedule, realized_wind, loads, prices)?;
    let commitment = first_stage_cost(system, schedule);
    let mut production = 0.0;
    for (i, unit) in system.units.iter().enumerate() {
        let rate = unit.fuel_price * system.fuel[i].f_avg;
        production += rate * dispatch.p[i].iter().sum::<f64>();
    }
    let shed: f64 = dispatch.ens.iter().flatten().sum::<f64>()
        + dispatch.over.iter().flatten().sum::<f64>();
    let curtailed: f64 = dispatch.wc.iter().flatten().sum();
    let penalty_ens = prices.c_ens * shed;
    let curtailment = prices.c_wc * curtailed;
    Ok(CostBreakdown {
        commitment,
        dispatch: production,
        penalty_ens,
        curtailment,
        total: commitment + production + penalty_ens + curtailment,
    })
}
