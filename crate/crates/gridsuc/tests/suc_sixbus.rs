//! Six-bus system tests: fixture ingestion, cross-method agreement of
//! the two SAA solution paths, and dispatch invariants at system scale.

mod common;

use gridsuc::forecast::{sample_scenarios, ForecastModel, Trajectory};
use gridsuc::grid::load_system;
use gridsuc::suc::{
    estimate_expected_cost, evaluate_dispatch, solve_uc_over_scenarios, CommitmentSchedule,
    Prices, SaaMethod,
};
use std::path::{Path, PathBuf};
use std::time::Instant;

fn sixbus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sixbus")
}

pub fn load_sixbus() -> gridsuc::grid::PowerSystem {
    let d = sixbus_dir();
    load_system(
        &d.join("buses.csv"),
        &d.join("units.csv"),
        &d.join("lines.csv"),
        &d.join("farms.csv"),
        None,
    )
    .unwrap()
}

const PRICES: Prices = Prices {
    c_ens: 3500.0,
    c_wc: 50.0,
};

fn wind_model(horizon: usize) -> ForecastModel {
    ForecastModel::NormalPosteriorPredictive {
        mean: vec![vec![90.0; horizon]],
        sd: vec![vec![90.0 * 0.2 * std::f64::consts::SQRT_2; horizon]],
        m: 1,
    }
}

#[test]
fn sixbus_fixture_loads_with_expected_shape() {
    let sys = load_sixbus();
    assert_eq!(sys.buses.len(), 6);
    assert_eq!(sys.units.len(), 3);
    assert_eq!(sys.farms.len(), 1);
    assert_eq!(sys.lines.len(), 7);
    // Line 2 runs bus 1 to bus 4 with reactance 0.258 and a 100 MW limit.
    let l2 = &sys.lines[1];
    assert_eq!((l2.from_bus, l2.to_bus), (1, 4));
    assert!((l2.reactance - 0.258).abs() < 1e-12);
    assert!((l2.flow_limit - 100.0).abs() < 1e-12);
    // Negative published off-times arrive as magnitudes.
    assert_eq!(sys.units[0].min_off, 4);
    assert_eq!(sys.units[1].min_off, 3);
    // Slack defaults to the lowest bus id, whose PTDF column is zero.
    assert_eq!(sys.slack_bus, 1);
    for row in &sys.ptdf {
        assert_eq!(row[0], 0.0);
    }
}

#[test]
fn lshaped_equals_extensive_form_on_sixbus_horizon_four() {
    let sys = load_sixbus();
    let loads = [200.0, 240.0, 280.0, 230.0];
    let caps = [250.0];
    let started = Instant::now();
    for s_count in [1usize, 5, 10] {
        let set = sample_scenarios(&wind_model(4), s_count, 4, 9001, &caps).unwrap();
        let (_, ext) =
            solve_uc_over_scenarios(&sys, &loads, &set.scenarios, PRICES, SaaMethod::Extensive)
                .unwrap();
        let (_, lsh) = solve_uc_over_scenarios(
            &sys,
            &loads,
            &set.scenarios,
            PRICES,
            SaaMethod::LShaped { multicut: false },
        )
        .unwrap();
        assert!(
            (ext - lsh).abs() <= 1e-6 * (1.0 + ext.abs()),
            "S={s_count}: extensive {ext} vs lshaped {lsh}"
        );
    }
    eprintln!("three cross-method instances took {:?}", started.elapsed());
}

#[test]
fn expected_cost_estimator_variance_shrinks() {
    let sys = load_sixbus();
    let loads = [220.0, 260.0, 290.0, 240.0];
    let caps = [250.0];
    let schedule = CommitmentSchedule::new(vec![vec![true; 4], vec![false; 4], vec![true; 4]]);
    schedule.validate(&sys.units).unwrap();

    let set = sample_scenarios(&wind_model(4), 200, 4, 77, &caps).unwrap();
    let (mean, var) =
        estimate_expected_cost(&sys, &schedule, &set.scenarios, &loads, PRICES).unwrap();
    assert!(mean > 0.0);
    assert!(var >= 0.0);

    // Identical scenarios have zero variance.
    let point = ForecastModel::PersistencePoint {
        value: vec![vec![90.0; 4]],
    };
    let set = sample_scenarios(&point, 8, 4, 5, &caps).unwrap();
    let (_, var0) =
        estimate_expected_cost(&sys, &schedule, &set.scenarios, &loads, PRICES).unwrap();
    assert!(var0.abs() < 1e-12);
}

/// Perf canary for the day-ahead scale; run with
/// `cargo test -p gridsuc --test suc_sixbus -- --ignored --nocapture`.
#[test]
#[ignore]
fn day_ahead_scale_lshaped_timing() {
    let sys = load_sixbus();
    let loads: Vec<f64> = (0..24)
        .map(|t| 230.0 + 60.0 * ((t as f64 - 17.0) / 24.0 * std::f64::consts::TAU).cos())
        .collect();
    let caps = [250.0];
    let set = sample_scenarios(&wind_model(24), 50, 24, 31337, &caps).unwrap();
    let started = Instant::now();
    let master = gridsuc::suc::build_master(&sys, 24);
    let recourse = gridsuc::suc::UcRecourse::new(&sys, &loads, &set.scenarios, PRICES);
    let sol = gridsuc::solver::solve_two_stage_lshaped(
        &master,
        &recourse,
        &gridsuc::solver::LShapedOptions {
            verbose: true,
            ..Default::default()
        },
    )
    .unwrap();
    let (schedule, obj) = (
        gridsuc::suc::CommitmentSchedule::from_flat(3, 24, &sol.x),
        sol.objective,
    );
    eprintln!(
        "T=24 S=50 lshaped: {:?}, objective {obj:.0}, committed hours {}",
        started.elapsed(),
        schedule.u.iter().flatten().filter(|&&b| b).count()
    );

    let started = Instant::now();
    let set_eval = sample_scenarios(&wind_model(24), 1000, 24, 99, &caps).unwrap();
    let (mean, _) =
        estimate_expected_cost(&sys, &schedule, &set_eval.scenarios, &loads, PRICES).unwrap();
    eprintln!("S_e=1000 evaluation: {:?}, mean {mean:.0}", started.elapsed());
}

#[test]
fn dispatch_respects_line_limits_under_wind_pressure() {
    let sys = load_sixbus();
    let loads = [180.0; 4];
    // All wind at bus 4 with modest local load forces exports through
    // the two 100 MW corridors.
    let schedule = CommitmentSchedule::new(vec![vec![true; 4], vec![false; 4], vec![false; 4]]);
    let wind: Trajectory = vec![vec![240.0, 200.0, 160.0, 250.0]];
    let d = evaluate_dispatch(&sys, &schedule, &wind, &loads, PRICES).unwrap();
    d.verify(&sys, &schedule, &wind, &loads).unwrap();
    let flows = d.line_flows(&sys, &wind, &loads);
    for (li, line) in sys.lines.iter().enumerate() {
        for t in 0..4 {
            assert!(flows[li][t].abs() <= line.flow_limit + 1e-6);
        }
    }
}
