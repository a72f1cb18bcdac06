use isac_core::scenario::{
    read_csv, run, run_sweep, write_csv, Mode, ScenarioConfig, SweepParam, SweepRow, SweepSpec, CSV_COLUMNS,
};

fn small() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::desk();
    cfg.network.n_ue = 2;
    cfg.swarm.swarm_size = 10;
    cfg.swarm.max_iterations = 10;
    cfg.bcd.max_rounds = 2;
    cfg
}

/// Serialized form; NaN cells compare equal.
fn csv_of(row: &SweepRow) -> String {
    let mut buf = Vec::new();
    write_csv(std::slice::from_ref(row), &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn single_point_sweep_equals_direct_runs() {
    let cfg = small();
    let spec = SweepSpec {
        param: SweepParam::GammaDb,
        values: vec![cfg.network.gamma_db.0],
        modes: Mode::ALL.to_vec(),
        seeds: vec![3],
    };
    let result = run_sweep(&cfg, &spec).unwrap();
    assert_eq!(result.rows.len(), 3);
    for row in &result.rows {
        let direct = SweepRow::from_outcome("gamma_db", cfg.network.gamma_db.0, &run(&cfg, row.mode, 3));
        assert_eq!(csv_of(&row.without_time()), csv_of(&direct.without_time()));
    }
}

#[test]
fn mobile_without_position_search_is_fixed() {
    let mut cfg = small();
    for seed in 0..3 {
        cfg.bcd.optimize_positions = false;
        let mobile = run(&cfg, Mode::Mobile, seed);
        let fixed = run(&cfg, Mode::Fixed, seed);
        assert_eq!(mobile.gamma_t(), fixed.gamma_t());
        assert_eq!(mobile.positions, fixed.positions);
        assert_eq!(mobile.pso_iters, 0);
        cfg.bcd.optimize_positions = true;
        let moved = run(&cfg, Mode::Mobile, seed);
        assert!((moved.round_gamma[0] - fixed.gamma_t()).abs() <= 1e-6 * fixed.gamma_t());
    }
}

#[test]
fn positions_respect_their_deployment() {
    let cfg = small();
    let flight = cfg.flight_box();
    for seed in 0..3 {
        for mode in [Mode::Fixed, Mode::Tethered] {
            assert_eq!(run(&cfg, mode, seed).positions, cfg.pinned_positions());
        }
        let mobile = run(&cfg, Mode::Mobile, seed);
        assert!(flight.admits(&mobile.positions));
        for pair in mobile.round_gamma.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
        assert_eq!(*mobile.round_gamma.last().unwrap(), mobile.gamma_t());
        for trace in &mobile.swarm_traces {
            for pair in trace.windows(2) {
                assert!(pair[1].best_utility >= pair[0].best_utility);
            }
        }
    }
}

#[test]
fn fixed_sensing_ignores_the_bs_budget() {
    let cfg = small();
    let spec = SweepSpec {
        param: SweepParam::BsPowerDbm,
        values: vec![20.0, 30.0, 40.0],
        modes: vec![Mode::Fixed],
        seeds: vec![0, 1],
    };
    let rows = run_sweep(&cfg, &spec).unwrap().rows;
    for seed in [0, 1] {
        let g: Vec<f64> = rows.iter().filter(|r| r.seed == seed).map(|r| r.gamma_t_linear).collect();
        assert_eq!(g.len(), 3);
        for x in &g {
            assert!((x - g[0]).abs() <= 1e-9 * g[0], "{g:?}");
        }
    }
}

#[test]
fn rows_are_internally_consistent() {
    let cfg = small();
    for mode in Mode::ALL {
        let row = SweepRow::from_outcome("run", 0.0, &run(&cfg, mode, 1));
        assert!((row.gamma_t_db - 10.0 * row.gamma_t_linear.log10()).abs() < 1e-12);
        assert!(row.gamma_t_linear > 0.0);
        assert!(row.cccp_iters >= 1);
        if mode == Mode::Tethered {
            assert!(row.min_backhaul_sinr_db.is_nan());
            assert!(row.power_used_w <= cfg.total_power_w() * (1.0 + 1e-6));
        }
    }
}

#[test]
fn empty_result_writes_only_the_header() {
    let mut buf = Vec::new();
    write_csv(&[], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.trim_end(), CSV_COLUMNS.join(","));
    assert!(read_csv(text.as_bytes()).unwrap().is_empty());
}

#[test]
fn invalid_sweep_values_are_rejected_before_running() {
    let cfg = small();
    for (param, v) in [(SweepParam::NUe, 2.5), (SweepParam::NTx, 0.0), (SweepParam::TotalPowerFixedBsDbm, 10.0)] {
        let spec = SweepSpec { param, values: vec![v], modes: vec![Mode::Fixed], seeds: vec![0] };
        assert!(run_sweep(&cfg, &spec).is_err(), "{param} = {v}");
    }
    assert!("n_uavs".parse::<SweepParam>().is_err());
}
