//! Power-system data model: buses, thermal units, wind farms and
//! transmission lines, with CSV ingestion, validation, and the DC
//! power-flow shift-factor (PTDF) matrix.
//!
//! Shift factors are computed against a slack bus by inverting the
//! reduced nodal susceptance matrix: `ptdf[l][b]` is the MW flow on
//! line `l` caused by injecting 1 MW at bus `b` and withdrawing it at
//! the slack. The slack column is identically zero.

use crate::linalg::{LuFactors, Matrix};
use serde::Deserialize;
use std::collections::HashSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file}: duplicate id {id}")]
    DuplicateId { file: String, id: usize },
    #[error("{file} row {row}: {message}")]
    InvalidValue {
        file: String,
        row: usize,
        message: String,
    },
    #[error("network is not connected")]
    DisconnectedNetwork,
    #[error("singular susceptance matrix: disconnected or degenerate network")]
    SingularSusceptanceMatrix,
    #[error("load series sums to zero")]
    ZeroDemand,
    #[error("{0}")]
    Io(String),
}

/// A bus with its share of the system load.
#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub load_share: f64,
}

/// A thermal generator. `init_state` is signed hours: positive means the
/// unit has been on that long before the first hour, negative off.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalUnit {
    pub id: usize,
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub min_on: usize,
    pub min_off: usize,
    pub init_state: i64,
    pub fuel_a: f64,
    pub fuel_b: f64,
    pub fuel_c: f64,
    pub startup_fuel: f64,
    pub shutdown_fuel: f64,
    pub fuel_price: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindFarm {
    pub id: usize,
    pub bus: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionLine {
    pub id: usize,
    pub from_bus: usize,
    pub to_bus: usize,
    pub reactance: f64,
    pub flow_limit: f64,
}

/// Endpoint-exact linear model of a unit's quadratic fuel curve:
/// `f_min + f_avg * P` agrees with `a + b P + c P^2` at both output
/// limits, and never under-estimates it in between (the chord of a
/// convex function).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FuelLinearization {
    /// MBtu charged per committed hour.
    pub f_min: f64,
    /// Marginal MBtu per MWh produced.
    pub f_avg: f64,
}

impl ThermalUnit {
    /// Quadratic fuel consumption at output `p`, in MBtu.
    pub fn fuel(&self, p: f64) -> f64 {
        self.fuel_a + self.fuel_b * p + self.fuel_c * p * p
    }

    pub fn on_initially(&self) -> bool {
        self.init_state > 0
    }

    /// Hours the unit has held its initial state before hour one.
    pub fn init_hours(&self) -> usize {
        self.init_state.unsigned_abs() as usize
    }
}

/// Chord linearization of the fuel curve between the output limits.
pub fn linearize_fuel(unit: &ThermalUnit) -> FuelLinearization {
    let f_avg = if unit.p_max > unit.p_min {
        (unit.fuel(unit.p_max) - unit.fuel(unit.p_min)) / (unit.p_max - unit.p_min)
    } else {
        unit.fuel_b + 2.0 * unit.fuel_c * unit.p_min
    };
    let f_min = unit.fuel(unit.p_min) - f_avg * unit.p_min;
    FuelLinearization { f_min, f_avg }
}

/// Ratio of total wind energy to total demand over a horizon.
pub fn wind_penetration(wind: &[f64], load: &[f64]) -> Result<f64, GridError> {
    let demand: f64 = load.iter().sum();
    if demand == 0.0 {
        return Err(GridError::ZeroDemand);
    }
    Ok(wind.iter().sum::<f64>() / demand)
}

/// The validated physical problem instance. Immutable after
/// construction and safe to share across threads.
#[derive(Clone, Debug)]
pub struct PowerSystem {
    pub buses: Vec<Bus>,
    pub units: Vec<ThermalUnit>,
    pub farms: Vec<WindFarm>,
    pub lines: Vec<TransmissionLine>,
    pub slack_bus: usize,
    /// `ptdf[line][bus]`, slack column all zeros.
    pub ptdf: Vec<Vec<f64>>,
    /// Cached fuel linearization per unit.
    pub fuel: Vec<FuelLinearization>,
}

impl PowerSystem {
    pub fn new(
        buses: Vec<Bus>,
        units: Vec<ThermalUnit>,
        farms: Vec<WindFarm>,
        lines: Vec<TransmissionLine>,
        slack_bus: usize,
    ) -> Result<Self, GridError> {
        validate_buses(&buses)?;
        let bus_ids: HashSet<usize> = buses.iter().map(|b| b.id).collect();
        if !bus_ids.contains(&slack_bus) {
            return Err(GridError::InvalidValue {
                file: "system".into(),
                row: 0,
                message: format!("slack bus {slack_bus} does not exist"),
            });
        }
        validate_units(&units, &bus_ids)?;
        validate_farms(&farms, &bus_ids)?;
        validate_lines(&lines, &bus_ids)?;
        check_connected(&buses, &lines)?;

        let ptdf = compute_ptdf(&buses, &lines, slack_bus)?;
        let fuel = units.iter().map(linearize_fuel).collect();
        Ok(PowerSystem {
            buses,
            units,
            farms,
            lines,
            slack_bus,
            ptdf,
            fuel,
        })
    }

    pub fn bus_index(&self, id: usize) -> usize {
        self.buses.iter().position(|b| b.id == id).expect("validated bus id")
    }

    /// PTDF column of the bus hosting unit `i`.
    pub fn unit_ptdf(&self, line: usize, unit: usize) -> f64 {
        self.ptdf[line][self.bus_index(self.units[unit].bus)]
    }

    /// PTDF column of the bus hosting farm `w`.
    pub fn farm_ptdf(&self, line: usize, farm: usize) -> f64 {
        self.ptdf[line][self.bus_index(self.farms[farm].bus)]
    }

    /// Per-bus loads for a system-wide load value.
    pub fn bus_loads(&self, system_load: f64) -> Vec<f64> {
        self.buses.iter().map(|b| b.load_share * system_load).collect()
    }

    pub fn total_thermal_min(&self) -> f64 {
        self.units.iter().map(|u| u.p_min).sum()
    }

    pub fn total_thermal_max(&self) -> f64 {
        self.units.iter().map(|u| u.p_max).sum()
    }
}

fn validate_buses(buses: &[Bus]) -> Result<(), GridError> {
    if buses.is_empty() {
        return Err(GridError::InvalidValue {
            file: "buses".into(),
            row: 0,
            message: "no buses".into(),
        });
    }
    let mut seen = HashSet::new();
    for (i, b) in buses.iter().enumerate() {
        if !seen.insert(b.id) {
            return Err(GridError::DuplicateId {
                file: "buses".into(),
                id: b.id,
            });
        }
        if !(0.0..=1.0).contains(&b.load_share) {
            return Err(GridError::InvalidValue {
                file: "buses".into(),
                row: i + 1,
                message: format!("load share {} outside [0, 1]", b.load_share),
            });
        }
    }
    // Ids contiguous from 1.
    for want in 1..=buses.len() {
        if !seen.contains(&want) {
            return Err(GridError::InvalidValue {
                file: "buses".into(),
                row: 0,
                message: format!("bus ids not contiguous: {want} missing"),
            });
        }
    }
    let share_sum: f64 = buses.iter().map(|b| b.load_share).sum();
    if (share_sum - 1.0).abs() > 1e-9 {
        return Err(GridError::InvalidValue {
            file: "buses".into(),
            row: 0,
            message: format!("load shares sum to {share_sum}, expected 1.0"),
        });
    }
    Ok(())
}

fn validate_units(units: &[ThermalUnit], bus_ids: &HashSet<usize>) -> Result<(), GridError> {
    let mut seen = HashSet::new();
    for (i, u) in units.iter().enumerate() {
        let row = i + 1;
        let fail = |message: String| GridError::InvalidValue {
            file: "units".into(),
            row,
            message,
        };
        if !seen.insert(u.id) {
            return Err(GridError::DuplicateId {
                file: "units".into(),
                id: u.id,
            });
        }
        if !bus_ids.contains(&u.bus) {
            return Err(fail(format!("unit {} references unknown bus {}", u.id, u.bus)));
        }
        if !(0.0 <= u.p_min && u.p_min <= u.p_max) {
            return Err(fail(format!(
                "output limits must satisfy 0 <= p_min <= p_max, got [{}, {}]",
                u.p_min, u.p_max
            )));
        }
        if u.min_on < 1 || u.min_off < 1 {
            return Err(fail("min_on and min_off must be at least one hour".into()));
        }
        if u.init_state == 0 {
            return Err(fail("init_state must be nonzero signed hours".into()));
        }
        // Convexity keeps the minimum of the fuel curve at an endpoint or
        // the vertex; all three must be nonnegative on [p_min, p_max].
        let mut lowest = u.fuel(u.p_min).min(u.fuel(u.p_max));
        if u.fuel_c > 0.0 {
            let vertex = -u.fuel_b / (2.0 * u.fuel_c);
            if vertex > u.p_min && vertex < u.p_max {
                lowest = lowest.min(u.fuel(vertex));
            }
        }
        if lowest < 0.0 {
            return Err(fail(format!(
                "fuel curve dips below zero on [{}, {}]",
                u.p_min, u.p_max
            )));
        }
        if u.startup_fuel < 0.0 || u.shutdown_fuel < 0.0 || u.fuel_price < 0.0 {
            return Err(fail("fuel quantities and price must be nonnegative".into()));
        }
    }
    Ok(())
}

fn validate_farms(farms: &[WindFarm], bus_ids: &HashSet<usize>) -> Result<(), GridError> {
    let mut seen = HashSet::new();
    for f in farms {
        if !seen.insert(f.id) {
            return Err(GridError::DuplicateId {
                file: "farms".into(),
                id: f.id,
            });
        }
        if !bus_ids.contains(&f.bus) {
            return Err(GridError::InvalidValue {
                file: "farms".into(),
                row: f.id,
                message: format!("farm {} references unknown bus {}", f.id, f.bus),
            });
        }
    }
    Ok(())
}

fn validate_lines(lines: &[TransmissionLine], bus_ids: &HashSet<usize>) -> Result<(), GridError> {
    let mut seen = HashSet::new();
    for (i, l) in lines.iter().enumerate() {
        let row = i + 1;
        if !seen.insert(l.id) {
            return Err(GridError::DuplicateId {
                file: "lines".into(),
                id: l.id,
            });
        }
        if l.from_bus == l.to_bus {
            return Err(GridError::InvalidValue {
                file: "lines".into(),
                row,
                message: format!("line {} connects bus {} to itself", l.id, l.from_bus),
            });
        }
        if !bus_ids.contains(&l.from_bus) || !bus_ids.contains(&l.to_bus) {
            return Err(GridError::InvalidValue {
                file: "lines".into(),
                row,
                message: format!("line {} references an unknown bus", l.id),
            });
        }
        if l.reactance <= 0.0 || l.flow_limit <= 0.0 {
            return Err(GridError::InvalidValue {
                file: "lines".into(),
                row,
                message: "reactance and flow limit must be positive".into(),
            });
        }
    }
    Ok(())
}

fn check_connected(buses: &[Bus], lines: &[TransmissionLine]) -> Result<(), GridError> {
    if buses.len() <= 1 {
        return Ok(());
    }
    let index = |id: usize| buses.iter().position(|b| b.id == id).unwrap();
    let mut adj = vec![Vec::new(); buses.len()];
    for l in lines {
        let (f, t) = (index(l.from_bus), index(l.to_bus));
        adj[f].push(t);
        adj[t].push(f);
    }
    let mut seen = vec![false; buses.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    if seen.iter().all(|&s| s) {
        Ok(())
    } else {
        Err(GridError::DisconnectedNetwork)
    }
}

/// Shift factors from the reduced susceptance matrix. Requires a
/// connected network with positive reactances.
pub fn compute_ptdf(
    buses: &[Bus],
    lines: &[TransmissionLine],
    slack_bus: usize,
) -> Result<Vec<Vec<f64>>, GridError> {
    let n = buses.len();
    let index = |id: usize| buses.iter().position(|b| b.id == id).unwrap();
    let slack = index(slack_bus);
    if lines.is_empty() {
        return Ok(Vec::new());
    }

    // Nodal susceptance matrix, slack row/column removed.
    let reduced: Vec<usize> = (0..n).filter(|&b| b != slack).collect();
    let pos_of: Vec<Option<usize>> = (0..n)
        .map(|b| reduced.iter().position(|&r| r == b))
        .collect();
    let mut b_red = Matrix::zeros(n - 1, n - 1);
    for l in lines {
        let (f, t) = (index(l.from_bus), index(l.to_bus));
        let y = 1.0 / l.reactance;
        for (a, bb) in [(f, f), (t, t)] {
            if let (Some(i), Some(j)) = (pos_of[a], pos_of[bb]) {
                b_red[(i, j)] += y;
            }
        }
        if let (Some(i), Some(j)) = (pos_of[f], pos_of[t]) {
            b_red[(i, j)] -= y;
            b_red[(j, i)] -= y;
        }
    }
    let lu = LuFactors::factorize(&b_red).map_err(|_| GridError::SingularSusceptanceMatrix)?;

    // One reduced solve per non-slack bus yields the angle response to a
    // unit injection there (withdrawn at the slack).
    let mut ptdf = vec![vec![0.0; n]; lines.len()];
    let mut rhs = vec![0.0; n - 1];
    for (col, &b) in reduced.iter().enumerate() {
        rhs[col] = 1.0;
        let theta_red = lu.solve(&rhs);
        rhs[col] = 0.0;
        let theta = |bus: usize| pos_of[bus].map_or(0.0, |p| theta_red[p]);
        for (li, l) in lines.iter().enumerate() {
            let (f, t) = (index(l.from_bus), index(l.to_bus));
            ptdf[li][b] = (theta(f) - theta(t)) / l.reactance;
        }
    }
    Ok(ptdf)
}

// ------------------------------------------------------------------
// CSV ingestion
// ------------------------------------------------------------------

#[derive(Deserialize)]
struct BusRow {
    id: usize,
    load_share: f64,
}

#[derive(Deserialize)]
struct UnitRow {
    id: usize,
    bus: usize,
    p_min: f64,
    p_max: f64,
    min_on: i64,
    min_off: i64,
    init_state: i64,
    fuel_a: f64,
    fuel_b: f64,
    fuel_c: f64,
    startup_fuel: f64,
    shutdown_fuel: f64,
    fuel_price: f64,
}

#[derive(Deserialize)]
struct LineRow {
    id: usize,
    from_bus: usize,
    to_bus: usize,
    reactance: f64,
    flow_limit: f64,
}

#[derive(Deserialize)]
struct FarmRow {
    id: usize,
    bus: usize,
}

fn read_rows<T: serde::de::DeserializeOwned>(
    path: &Path,
    columns: &[&str],
) -> Result<Vec<T>, GridError> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| GridError::Io(format!("{file}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| GridError::Io(format!("{file}: {e}")))?
        .clone();
    for col in columns {
        if !headers.iter().any(|h| h == *col) {
            return Err(GridError::MissingColumn {
                file,
                column: (*col).into(),
            });
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<T>().enumerate() {
        rows.push(record.map_err(|e| GridError::InvalidValue {
            file: file.clone(),
            row: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(rows)
}

/// Load and validate a full system from its four CSV files.
pub fn load_system(
    bus_file: &Path,
    unit_file: &Path,
    line_file: &Path,
    farm_file: &Path,
    slack_bus: Option<usize>,
) -> Result<PowerSystem, GridError> {
    let buses: Vec<Bus> = read_rows::<BusRow>(bus_file, &["id", "load_share"])?
        .into_iter()
        .map(|r| Bus {
            id: r.id,
            load_share: r.load_share,
        })
        .collect();
    let units: Vec<ThermalUnit> = read_rows::<UnitRow>(
        unit_file,
        &[
            "id",
            "bus",
            "p_min",
            "p_max",
            "min_on",
            "min_off",
            "init_state",
            "fuel_a",
            "fuel_b",
            "fuel_c",
            "startup_fuel",
            "shutdown_fuel",
            "fuel_price",
        ],
    )?
    .into_iter()
    .map(|r| ThermalUnit {
        id: r.id,
        bus: r.bus,
        p_min: r.p_min,
        p_max: r.p_max,
        // Published generator tables sometimes carry the off-time with a
        // minus sign; durations are magnitudes.
        min_on: r.min_on.unsigned_abs() as usize,
        min_off: r.min_off.unsigned_abs() as usize,
        init_state: r.init_state,
        fuel_a: r.fuel_a,
        fuel_b: r.fuel_b,
        fuel_c: r.fuel_c,
        startup_fuel: r.startup_fuel,
        shutdown_fuel: r.shutdown_fuel,
        fuel_price: r.fuel_price,
    })
    .collect();
    let lines: Vec<TransmissionLine> = read_rows::<LineRow>(
        line_file,
        &["id", "from_bus", "to_bus", "reactance", "flow_limit"],
    )?
    .into_iter()
    .map(|r| TransmissionLine {
        id: r.id,
        from_bus: r.from_bus,
        to_bus: r.to_bus,
        reactance: r.reactance,
        flow_limit: r.flow_limit,
    })
    .collect();
    let farms: Vec<WindFarm> = read_rows::<FarmRow>(farm_file, &["id", "bus"])?
        .into_iter()
        .map(|r| WindFarm { id: r.id, bus: r.bus })
        .collect();

    let slack = slack_bus.unwrap_or_else(|| buses.iter().map(|b| b.id).min().unwrap_or(1));
    PowerSystem::new(buses, units, farms, lines, slack)
}

/// Read an `hour,value` series.
pub fn read_series(path: &Path) -> Result<Vec<f64>, GridError> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| GridError::Io(format!("{file}: {e}")))?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| GridError::Io(format!("{file}: {e}")))?;
        let v: f64 = record
            .get(1)
            .ok_or_else(|| GridError::InvalidValue {
                file: file.clone(),
                row: i + 1,
                message: "expected two columns".into(),
            })?
            .parse()
            .map_err(|e| GridError::InvalidValue {
                file: file.clone(),
                row: i + 1,
                message: format!("bad value: {e}"),
            })?;
        out.push(v);
    }
    Ok(out)
}

/// Read a wide series `hour,c1,c2,...` into per-column vectors.
pub fn read_wide_series(path: &Path) -> Result<Vec<Vec<f64>>, GridError> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| GridError::Io(format!("{file}: {e}")))?;
    let width = reader
        .headers()
        .map_err(|e| GridError::Io(format!("{file}: {e}")))?
        .len();
    if width < 2 {
        return Err(GridError::MissingColumn {
            file,
            column: "value".into(),
        });
    }
    let mut out = vec![Vec::new(); width - 1];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| GridError::Io(format!("{file}: {e}")))?;
        for c in 1..width {
            let v: f64 = record
                .get(c)
                .ok_or_else(|| GridError::InvalidValue {
                    file: file.clone(),
                    row: i + 1,
                    message: format!("expected {width} columns"),
                })?
                .parse()
                .map_err(|e| GridError::InvalidValue {
                    file: file.clone(),
                    row: i + 1,
                    message: format!("bad value: {e}"),
                })?;
            out[c - 1].push(v);
        }
    }
    Ok(out)
}
