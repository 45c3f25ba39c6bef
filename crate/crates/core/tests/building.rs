use chrono::NaiveDate;
use demandgym::building::*;
use proptest::prelude::*;

fn august() -> (Building, Period) {
    let period = Period::august();
    let weather = synth_weather(1, period.start, period.end).unwrap();
    (
        Building::new(BuildingConfig::default(), weather, ScheduleSet::default()).unwrap(),
        period,
    )
}

#[test]
fn calibration_reproduces_shipped_defaults() {
    let (building, period) = august();
    let point = calibrate(
        BuildingConfig::default(),
        &building.weather,
        &building.schedules,
        period,
        &CALIBRATION_A_SOL_GRID,
        &CALIBRATION_UA_OUT_GRID,
        CALIBRATION_TARGET_W,
        CALIBRATION_MIN_HOURLY_STD_W,
    )
    .unwrap();
    assert_eq!(point.a_sol_m2, CALIBRATED_A_SOL_M2);
    assert_eq!(point.ua_out_w_per_k, CALIBRATED_UA_OUT_W_PER_K);
}

#[test]
fn default_baseline_matches_working_hours_anchor() {
    let (building, period) = august();
    let stats = building.run_baseline(period).unwrap().window_stats(8, 16);
    assert!((stats.mean_w - 17_000.0).abs() <= 2_000.0, "mean {}", stats.mean_w);
    assert!(stats.mean_per_hour_std_w > 1_000.0, "per-hour std {}", stats.mean_per_hour_std_w);
}

#[test]
fn substeps_close_the_energy_balance() {
    let (building, _) = august();
    let cfg = building.config;
    let start = NaiveDate::from_ymd_opt(2023, 8, 2).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let mut state = building.initial_state(start);
    for _ in 0..24 * 60 {
        let before = state;
        let (tout, ghi) = building.weather.at(before.time);
        let flows = building.substep(&mut state, 60.0);
        let stored = cfg.c_air_j_per_k * (state.t_air_c - before.t_air_c)
            + cfg.c_env_j_per_k * (state.t_env_c - before.t_env_c);
        let exchanged = 60.0
            * (cfg.ua_out_w_per_k * (tout - before.t_env_c) + cfg.a_sol_m2 * ghi + flows.infiltration_w
                + flows.internal_w
                - flows.cooling_w);
        // Stored energy is a difference of large node energies, so the
        // rounding bound scales with the node contents.
        let scale = cfg.c_air_j_per_k * before.t_air_c.abs() + cfg.c_env_j_per_k * before.t_env_c.abs();
        assert!(
            (stored - exchanged).abs() <= 1e-13 * scale,
            "{stored} vs {exchanged} at {}",
            before.time
        );
    }
}

#[test]
fn weekend_baseline_never_drops_below_unoccupied_setpoint_by_cooling() {
    let (building, period) = august();
    let series = building.run_baseline(period).unwrap();
    for (state, q) in series.states.iter().zip(&series.cooling_w) {
        if !cooling_available(state.time) {
            assert_eq!(*q, 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn higher_setpoint_never_needs_more_cooling(low in 23.0f64..26.5, gap in 0.1f64..0.5) {
        let (building, _) = august();
        let period = Period::new(
            NaiveDate::from_ymd_opt(2023, 8, 1).unwrap(),
            NaiveDate::from_ymd_opt(2023, 8, 2).unwrap(),
        )
        .unwrap();
        let cool = building.run_schedule(period, |_| low).unwrap();
        let warm = building.run_schedule(period, |_| low + gap).unwrap();
        let total = |s: &BaselineSeries| s.cooling_w.iter().sum::<f64>();
        prop_assert!(total(&warm) <= total(&cool));
    }
}
