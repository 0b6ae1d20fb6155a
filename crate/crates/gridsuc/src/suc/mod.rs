//! Two-stage unit-commitment models over a [`PowerSystem`]: commitment
//! schedules with minimum up/down validation, economic dispatch of the
//! second stage, and the extensive-form / L-shaped solution paths.

mod dispatch;
mod model;

pub use dispatch::{
    estimate_expected_cost, evaluate_dispatch, realized_cost, scenario_dispatch_costs,
    DispatchSolution,
};
pub use model::{
    build_deterministic_uc, build_extensive_form, build_master, solve_saa_suc,
    solve_uc_over_scenarios, ModelError, SaaMethod, UcRecourse,
};

use crate::grid::{PowerSystem, ThermalUnit};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Penalty prices of the second stage, $/MWh.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Prices {
    /// Load shedding (energy not served).
    pub c_ens: f64,
    /// Wind curtailment (forgone reward).
    pub c_wc: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("unit {unit} hour {hour}: {message}")]
    Violation {
        unit: usize,
        hour: usize,
        message: String,
    },
    #[error("schedule shape mismatch: {0}")]
    Shape(String),
}

/// First-stage decision: on/off per unit per hour.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CommitmentSchedule {
    pub u: Vec<Vec<bool>>,
}

impl CommitmentSchedule {
    pub fn new(u: Vec<Vec<bool>>) -> Self {
        CommitmentSchedule { u }
    }

    pub fn all_off(units: usize, horizon: usize) -> Self {
        CommitmentSchedule {
            u: vec![vec![false; horizon]; units],
        }
    }

    pub fn all_on(units: usize, horizon: usize) -> Self {
        CommitmentSchedule {
            u: vec![vec![true; horizon]; units],
        }
    }

    pub fn horizon(&self) -> usize {
        self.u.first().map_or(0, |r| r.len())
    }

    pub fn units(&self) -> usize {
        self.u.len()
    }

    /// Fractional view used by solvers and subgradient code,
    /// flattened unit-major.
    pub fn to_flat(&self) -> Vec<f64> {
        self.u
            .iter()
            .flat_map(|row| row.iter().map(|&b| if b { 1.0 } else { 0.0 }))
            .collect()
    }

    pub fn from_flat(units: usize, horizon: usize, x: &[f64]) -> Self {
        let u = (0..units)
            .map(|i| {
                (0..horizon)
                    .map(|t| x[i * horizon + t] > 0.5)
                    .collect()
            })
            .collect();
        CommitmentSchedule { u }
    }

    /// Minimum up/down closure, including the carry-in from each unit's
    /// initial state. A turn-on at hour `t` pins the unit on through
    /// `t + min_on - 1` (clipped to the horizon); symmetric for
    /// turn-offs; a unit that has not yet served its initial minimum
    /// time must hold its state at the start of the horizon.
    pub fn validate(&self, units: &[ThermalUnit]) -> Result<(), ScheduleError> {
        if self.u.len() != units.len() {
            return Err(ScheduleError::Shape(format!(
                "{} unit rows for {} units",
                self.u.len(),
                units.len()
            )));
        }
        let horizon = self.horizon();
        for (i, (row, unit)) in self.u.iter().zip(units).enumerate() {
            if row.len() != horizon {
                return Err(ScheduleError::Shape(format!(
                    "unit {} row has length {}, expected {horizon}",
                    unit.id,
                    row.len()
                )));
            }
            // Initial-state closure.
            let held = unit.init_hours();
            if unit.on_initially() && held < unit.min_on {
                let must_stay = (unit.min_on - held).min(horizon);
                for (t, &on) in row.iter().enumerate().take(must_stay) {
                    if !on {
                        return Err(ScheduleError::Violation {
                            unit: unit.id,
                            hour: t + 1,
                            message: format!(
                                "unit on only {held}h before the horizon; must stay on through hour {must_stay}"
                            ),
                        });
                    }
                }
            }
            if !unit.on_initially() && held < unit.min_off {
                let must_stay = (unit.min_off - held).min(horizon);
                for (t, &on) in row.iter().enumerate().take(must_stay) {
                    if on {
                        return Err(ScheduleError::Violation {
                            unit: unit.id,
                            hour: t + 1,
                            message: format!(
                                "unit off only {held}h before the horizon; must stay off through hour {must_stay}"
                            ),
                        });
                    }
                }
            }
            // Transition closure inside the horizon.
            let mut prev = unit.on_initially();
            for t in 0..horizon {
                let cur = row[t];
                if cur && !prev {
                    let until = (t + unit.min_on).min(horizon);
                    for (k, &on) in row.iter().enumerate().take(until).skip(t) {
                        if !on {
                            return Err(ScheduleError::Violation {
                                unit: unit.id,
                                hour: k + 1,
                                message: format!(
                                    "turn-on at hour {} violates a {}h minimum up time",
                                    t + 1,
                                    unit.min_on
                                ),
                            });
                        }
                    }
                } else if !cur && prev {
                    let until = (t + unit.min_off).min(horizon);
                    for (k, &on) in row.iter().enumerate().take(until).skip(t) {
                        if on {
                            return Err(ScheduleError::Violation {
                                unit: unit.id,
                                hour: k + 1,
                                message: format!(
                                    "turn-off at hour {} violates a {}h minimum down time",
                                    t + 1,
                                    unit.min_off
                                ),
                            });
                        }
                    }
                }
                let _ = i;
                prev = cur;
            }
        }
        Ok(())
    }
}

/// First-stage cost of a schedule: committed minimum-load fuel plus
/// startup and shutdown fuel at each transition.
pub fn first_stage_cost(system: &PowerSystem, schedule: &CommitmentSchedule) -> f64 {
    let mut cost = 0.0;
    for (i, unit) in system.units.iter().enumerate() {
        let lin = system.fuel[i];
        let mut prev = unit.on_initially();
        for &on in &schedule.u[i] {
            if on {
                cost += unit.fuel_price * lin.f_min;
            }
            if on && !prev {
                cost += unit.fuel_price * unit.startup_fuel;
            } else if !on && prev {
                cost += unit.fuel_price * unit.shutdown_fuel;
            }
            prev = on;
        }
    }
    cost
}

/// Itemized cost of one realized horizon.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct CostBreakdown {
    /// Minimum-load, startup and shutdown cost of the commitments.
    pub commitment: f64,
    /// Marginal production fuel cost.
    pub dispatch: f64,
    /// Shedding penalty (includes any emergency surplus absorption).
    pub penalty_ens: f64,
    /// Forgone wind reward.
    pub curtailment: f64,
    pub total: f64,
}
