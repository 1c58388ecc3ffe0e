//! Export/import fidelity: the nine-tower reference scenario is written to
//! MPS, parsed back, and searched again. The parsed model must carry every
//! coefficient bit for bit, and an identical deterministic search on it must
//! land on the same objective.

use tvwsplan::lp::{apply_name_table, read_mps, write_mps, LpProblem, RowId, VarId};
use tvwsplan::milp::{build_milp, solve_bb, BbOptions, BuildMode};
use tvwsplan::model::{build_grid, ScenarioConfig};
use tvwsplan::propagation::LinkGainTable;

fn reference_scenario() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(
        3,
        3,
        3.0,
        vec![1, 3, 7, 9],
        vec![57.0, 79.0, 85.0, 491.0, 527.0, 533.0, 671.0],
    );
    cfg.traffic.density_per_km2 = 79.88;
    cfg
}

fn assert_bit_identical(a: &LpProblem, b: &LpProblem) {
    assert_eq!(a.num_vars(), b.num_vars(), "variable count differs");
    assert_eq!(a.num_rows(), b.num_rows(), "row count differs");
    assert_eq!(a.maximize, b.maximize, "objective sense differs");
    for j in 0..a.num_vars() {
        let va = a.var(VarId(j));
        let vb = b.var(VarId(j));
        assert_eq!(va.name, vb.name, "var {j} name");
        assert_eq!(va.integer, vb.integer, "var {} integrality", va.name);
        assert_eq!(va.lb.to_bits(), vb.lb.to_bits(), "var {} lower bound", va.name);
        assert_eq!(va.ub.to_bits(), vb.ub.to_bits(), "var {} upper bound", va.name);
        assert_eq!(va.obj.to_bits(), vb.obj.to_bits(), "var {} objective", va.name);
    }
    for i in 0..a.num_rows() {
        let ra = a.row(RowId(i));
        let rb = b.row(RowId(i));
        assert_eq!(ra.name, rb.name, "row {i} name");
        assert_eq!(ra.sense, rb.sense, "row {} sense", ra.name);
        assert_eq!(ra.rhs.to_bits(), rb.rhs.to_bits(), "row {} rhs", ra.name);
        assert_eq!(ra.terms.len(), rb.terms.len(), "row {} term count", ra.name);
        // The matrix is a map from (row, column) to coefficient; the order
        // terms are stored in carries no meaning, so compare canonically.
        let mut ta: Vec<(usize, u64)> = ra.terms.iter().map(|t| (t.0 .0, t.1.to_bits())).collect();
        let mut tb: Vec<(usize, u64)> = rb.terms.iter().map(|t| (t.0 .0, t.1.to_bits())).collect();
        ta.sort_unstable();
        tb.sort_unstable();
        assert_eq!(ta, tb, "row {} coefficients", ra.name);
    }
}

#[test]
fn reference_model_round_trips_bit_identical_and_resolves() {
    let cfg = reference_scenario();
    let net = build_grid(&cfg).unwrap();
    let gains = LinkGainTable::build(&net, &cfg).unwrap();
    let prob = build_milp(&net, &gains, &cfg, BuildMode::Epigraph).unwrap();

    let doc = write_mps(&prob.lp);
    let mut parsed = read_mps(&doc.mps).unwrap();
    apply_name_table(&mut parsed, &doc.names).unwrap();

    assert_bit_identical(&prob.lp, &parsed);

    let opts = BbOptions {
        gap: 1e-6,
        node_limit: Some(400),
        time_limit: None,
        cutoff: None,
        target: None,
        workers: 1,
        log: false,
        initial: None,
    };
    let first = solve_bb(&prob.lp, &opts).unwrap();
    let second = solve_bb(&parsed, &opts).unwrap();
    assert_eq!(first.status, second.status, "search outcome differs");
    assert_eq!(first.nodes, second.nodes, "node count differs");
    assert!(!first.values.is_empty(), "reference model has a plan");
    assert!(!second.values.is_empty(), "parsed model has a plan");
    let obj = first.objective;
    let re = second.objective;
    assert!(
        (obj - re).abs() <= 1e-6 * obj.abs().max(1.0),
        "objective drifted across the round trip: {obj} vs {re}"
    );
}

#[test]
fn small_model_objective_survives_round_trip_to_optimality() {
    let cfg = ScenarioConfig::new(1, 2, 3.0, vec![1], vec![491.0]);
    let net = build_grid(&cfg).unwrap();
    let gains = LinkGainTable::build(&net, &cfg).unwrap();
    let prob = build_milp(&net, &gains, &cfg, BuildMode::Epigraph).unwrap();

    let doc = write_mps(&prob.lp);
    let mut parsed = read_mps(&doc.mps).unwrap();
    apply_name_table(&mut parsed, &doc.names).unwrap();
    assert_bit_identical(&prob.lp, &parsed);

    let opts = BbOptions {
        gap: 1e-9,
        node_limit: None,
        time_limit: None,
        cutoff: None,
        target: None,
        workers: 1,
        log: false,
        initial: None,
    };
    let first = solve_bb(&prob.lp, &opts).unwrap();
    let second = solve_bb(&parsed, &opts).unwrap();
    assert!(!first.values.is_empty(), "two-tower model solves");
    assert!(!second.values.is_empty(), "parsed two-tower model solves");
    let obj = first.objective;
    let re = second.objective;
    assert!((obj - re).abs() <= 1e-6 * obj.abs().max(1.0));
}
