use tvwsplan::model::{build_grid, candidate_links, ConfigError, ScenarioConfig, SolveMode};
use tvwsplan::propagation::LinkGainTable;

fn base() -> ScenarioConfig {
    ScenarioConfig::new(3, 3, 3.0, vec![1, 5, 9], vec![491.0, 533.0])
}

#[test]
fn json_round_trip_with_defaults() {
    let text = r#"{
        "rows": 3, "cols": 3, "spacing_km": 3.0,
        "fiber_ids": [1, 3, 7, 9],
        "channels_mhz": [57, 79, 85, 491, 527, 533, 671]
    }"#;
    let cfg = ScenarioConfig::from_json(text).unwrap();
    assert_eq!(cfg.pmax_w, 4.0);
    assert_eq!(cfg.noise_figure_db, 10.0);
    assert_eq!(cfg.gtx_db, 6.0);
    assert_eq!(cfg.channel_bw_hz, 6.0e6);
    assert_eq!(cfg.noise_psd_dbm_hz, -174.0);
    assert_eq!(cfg.pwl_step_db, 10.0);
    assert_eq!(cfg.solver.mode, SolveMode::Granularity);
    assert_eq!(cfg.solver.granularity_bps, 1.0e6);
    assert_eq!(cfg.solver.time_limit_s, 1800.0);
    assert!(cfg.validate().is_ok());
}

#[test]
fn unknown_fields_are_rejected() {
    let text = r#"{"rows": 1, "cols": 2, "spacing_km": 3.0,
        "fiber_ids": [1], "channels_mhz": [491], "grid_size": 9}"#;
    assert!(ScenarioConfig::from_json(text).is_err());
}

#[test]
fn validation_failures() {
    let mut cfg = base();
    cfg.rows = 1;
    cfg.cols = 1;
    assert!(matches!(cfg.validate(), Err(ConfigError::TooFewTowers(1))));

    cfg = base();
    cfg.fiber_ids = vec![];
    assert!(matches!(cfg.validate(), Err(ConfigError::EmptyFiberSet)));

    cfg = base();
    cfg.fiber_ids = vec![10];
    assert!(matches!(
        cfg.validate(),
        Err(ConfigError::FiberIdOutOfRange { id: 10, count: 9 })
    ));

    cfg = base();
    cfg.spacing_km = 0.0;
    assert!(matches!(cfg.validate(), Err(ConfigError::NonPositiveSpacing(_))));

    cfg = base();
    cfg.pmax_w = -1.0;
    assert!(matches!(cfg.validate(), Err(ConfigError::NonPositivePower(_))));

    cfg = base();
    cfg.channels_mhz = vec![];
    assert!(matches!(cfg.validate(), Err(ConfigError::NoChannels)));

    cfg = base();
    cfg.channels_mhz = vec![491.0, -3.0];
    assert!(matches!(cfg.validate(), Err(ConfigError::NonPositiveFrequency(_))));

    cfg = base();
    cfg.pwl_step_db = 0.0;
    assert!(matches!(cfg.validate(), Err(ConfigError::NonPositivePwlStep(_))));

    cfg = base();
    cfg.positions_km = Some(vec![[0.0, 0.0]; 4]);
    assert!(matches!(
        cfg.validate(),
        Err(ConfigError::PositionCountMismatch { got: 4, expected: 9 })
    ));

    cfg = base();
    cfg.solver.workers = 0;
    assert!(matches!(cfg.validate(), Err(ConfigError::Solver(_))));

    cfg = base();
    cfg.solver.granularity_bps = 0.0;
    assert!(matches!(cfg.validate(), Err(ConfigError::Solver(_))));

    cfg = base();
    cfg.traffic.penetration = 2.0;
    assert!(matches!(cfg.validate(), Err(ConfigError::Traffic(_))));
}

#[test]
fn grid_layout_row_major_at_cell_centers() {
    let net = build_grid(&base()).unwrap();
    assert_eq!(net.len(), 9);
    let t1 = net.tower(1);
    assert_eq!((t1.x_km, t1.y_km), (1.5, 1.5));
    let t9 = net.tower(9);
    assert_eq!((t9.x_km, t9.y_km), (7.5, 7.5));
    // Row-major: tower 4 starts the second row.
    let t4 = net.tower(4);
    assert_eq!((t4.x_km, t4.y_km), (1.5, 4.5));

    assert_eq!(net.distance_km(1, 2), 3.0);
    assert!((net.distance_km(1, 5) - 3.0 * 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(net.fiber_ids(), vec![1, 5, 9]);
    assert_eq!(net.non_fiber_ids(), vec![2, 3, 4, 6, 7, 8]);
}

#[test]
fn explicit_positions_override_the_grid() {
    let mut cfg = ScenarioConfig::new(1, 3, 3.0, vec![1], vec![491.0]);
    cfg.positions_km = Some(vec![[0.0, 0.0], [4.0, 0.0], [4.0, 3.0]]);
    let net = build_grid(&cfg).unwrap();
    assert_eq!(net.distance_km(1, 2), 4.0);
    assert_eq!(net.distance_km(2, 3), 3.0);
    assert_eq!(net.distance_km(1, 3), 5.0);
}

#[test]
fn candidate_links_exclude_fiber_sources() {
    let cfg = base();
    let net = build_grid(&cfg).unwrap();
    let gains = LinkGainTable::build(&net, &cfg).unwrap();
    let links = candidate_links(&net, &gains, None);
    assert_eq!(links.len(), 6 * 8);
    assert!(links.iter().all(|&(i, _)| !net.is_fiber(i)));
    assert!(links.iter().all(|&(i, j)| i != j));
}

#[test]
fn snr_floor_prunes_weak_links() {
    let cfg = base();
    let net = build_grid(&cfg).unwrap();
    let gains = LinkGainTable::build(&net, &cfg).unwrap();
    let all = candidate_links(&net, &gains, None);
    // Under the default obstructed geometry, full-power SNR runs from 24.4 dB
    // on adjacent links down to 21.1 dB corner to corner.
    let strong = candidate_links(&net, &gains, Some(22.0));
    assert!(strong.len() < all.len());
    assert!(!strong.is_empty());
    for &(i, j) in &strong {
        let best = (0..2)
            .map(|m| gains.snr_full_db(i, j, m))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(best >= 22.0);
    }
    // An impossibly high floor keeps nothing.
    assert!(candidate_links(&net, &gains, Some(500.0)).is_empty());
}

#[test]
fn interference_threshold_defaults_ten_db_below_noise() {
    let cfg = base();
    let noise = cfg.noise_power_w();
    let thr = cfg.interference_threshold_w();
    assert!((thr - noise / 10.0).abs() / thr < 1e-12);

    let mut cfg2 = base();
    cfg2.interference_threshold_dbm = Some(-100.0);
    assert!((cfg2.interference_threshold_w() - 1.0e-13).abs() < 1e-25);
}
