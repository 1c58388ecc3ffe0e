use std::collections::BTreeSet;

use tvwsplan::milp::{bisection_feasible_rate, build_milp, direct_plan, BuildMode};
use tvwsplan::model::{build_grid, ScenarioConfig, SolveMode};
use tvwsplan::propagation::LinkGainTable;
use tvwsplan::scenario::{export_topology_dot, run_scenario, run_sweep, sweep_csv, SweepSpec};

fn two_tower() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(1, 2, 3.0, vec![2], vec![491.0]);
    cfg.clearance_m = Some(15.0);
    cfg.traffic.density_per_km2 = 50.0;
    cfg
}

fn small_grid() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(2, 2, 3.0, vec![1], vec![491.0, 533.0]);
    cfg.clearance_m = Some(15.0);
    cfg.traffic.density_per_km2 = 10.0;
    cfg.solver.gap = 1e-9;
    cfg
}

#[test]
fn direct_plan_takes_the_single_link() {
    let cfg = two_tower();
    let net = build_grid(&cfg).unwrap();
    let gains = LinkGainTable::build(&net, &cfg).unwrap();
    let heur = direct_plan(&net, &gains, None, 0);
    assert_eq!(heur.links.len(), 1);
    let l = &heur.links[0];
    assert_eq!((l.from, l.to, l.channel), (1, 2, 0));
    assert!((l.power_w - 4.0).abs() < 1e-9, "single channel gets the whole budget");
    let cap = gains.capacity_full_bps(1, 2, 0);
    assert!((l.rate_bps - cap).abs() < 1.0);
    assert!((heur.min_rate_bps - cap).abs() < 1.0);
}

#[test]
fn direct_plan_waterfills_equal_channels() {
    let mut cfg = ScenarioConfig::new(1, 2, 3.0, vec![2], vec![491.0, 491.0]);
    cfg.clearance_m = Some(15.0);
    let net = build_grid(&cfg).unwrap();
    let gains = LinkGainTable::build(&net, &cfg).unwrap();
    let heur = direct_plan(&net, &gains, None, 0);
    assert_eq!(heur.links.len(), 2);
    // Identical gains: the budget splits evenly and both links carry the
    // same rate.
    assert!((heur.links[0].power_w - 2.0).abs() < 1e-9);
    assert!((heur.links[1].power_w - 2.0).abs() < 1e-9);
    assert!((heur.links[0].rate_bps - heur.links[1].rate_bps).abs() < 1.0);
    let total: f64 = heur.links.iter().map(|l| l.power_w).sum();
    assert!((total - 4.0).abs() < 1e-12);
}

#[test]
fn direct_plan_values_satisfy_the_program() {
    let cfg = two_tower();
    let net = build_grid(&cfg).unwrap();
    let gains = LinkGainTable::build(&net, &cfg).unwrap();
    let prob = build_milp(&net, &gains, &cfg, BuildMode::FixedTarget(0.0)).unwrap();
    let heur = direct_plan(&net, &gains, None, 0);
    let values = heur.lp_values(&prob);
    assert_eq!(values.len(), prob.lp.num_vars());
    assert!(prob.lp.max_violation(&values) < 1e-4);
    assert!((prob.min_injected(&values) - heur.min_rate_bps).abs() < 1.0);
}

#[test]
fn bisection_lands_on_the_granularity_floor() {
    let cfg = two_tower();
    let net = build_grid(&cfg).unwrap();
    let gains = LinkGainTable::build(&net, &cfg).unwrap();
    let cap = gains.capacity_full_bps(1, 2, 0);

    let fine = bisection_feasible_rate(&net, &gains, &cfg, 1.0e6).unwrap();
    assert_eq!(fine.rate_bps, (cap / 1.0e6).floor() * 1.0e6);
    assert!(!fine.unresolved);

    let coarse = bisection_feasible_rate(&net, &gains, &cfg, 5.0e6).unwrap();
    assert_eq!(coarse.rate_bps, (cap / 5.0e6).floor() * 5.0e6);
}

#[test]
fn two_tower_scenario_in_both_modes() {
    let cfg = two_tower();
    let out = run_scenario(&cfg).unwrap();
    assert_eq!(out.solver.mode, SolveMode::Granularity);
    assert_eq!(out.solver.granularity_rate_bps, Some(96.0e6));
    assert!(out.validation.pass, "{}", out.validation.to_json());
    // The polish step lifts the plan from the certified 96 Mbps to the exact
    // link capacity just above it.
    assert!((96.0e6..97.0e6).contains(&out.rate_bps));
    assert!(out.feasible, "50 people per square km is well under capacity");

    let mut epi = two_tower();
    epi.solver.mode = SolveMode::Epigraph;
    let out2 = run_scenario(&epi).unwrap();
    assert!(out2.validation.pass);
    assert!((out2.rate_bps - out.rate_bps).abs() < 1.0, "same topology, same polish");
    assert_eq!(out2.solver.status, "optimal");
    assert!(out2.solver.objective_bps.is_some());
}

#[test]
fn small_grid_scenario_verifies_end_to_end() {
    let mut cfg = small_grid();
    cfg.solver.mode = SolveMode::Epigraph;
    let out = run_scenario(&cfg).unwrap();
    assert!(out.validation.pass, "{}", out.validation.to_json());
    assert!(out.rate_bps > 0.0);
    for name in [
        "power_budget",
        "fiber_silent",
        "half_duplex",
        "capacity",
        "flow_conservation",
        "network_balance",
        "interference",
        "nonnegativity",
    ] {
        let fam = out.validation.family(name).unwrap();
        assert!(fam.pass, "family {name} failed: {:?}", fam);
    }

    // Every tower that injects traffic must reach fiber through the links.
    let net = build_grid(&cfg).unwrap();
    let mut reach: BTreeSet<usize> = net.fiber_ids().into_iter().collect();
    loop {
        let before = reach.len();
        for l in &out.plan.links {
            if reach.contains(&l.to) {
                reach.insert(l.from);
            }
        }
        if reach.len() == before {
            break;
        }
    }
    for (&tower, &inj) in &out.plan.injected_bps {
        if inj > 1.0 {
            assert!(reach.contains(&tower), "tower {tower} injects but cannot reach fiber");
        }
    }
}

#[test]
fn granularity_result_rides_below_epigraph() {
    let cfg = small_grid();
    let gran = run_scenario(&cfg).unwrap();
    let mut epi_cfg = small_grid();
    epi_cfg.solver.mode = SolveMode::Epigraph;
    let epi = run_scenario(&epi_cfg).unwrap();
    assert!(
        gran.rate_bps <= epi.rate_bps + 1.0,
        "granularity {} must not beat the epigraph optimum {}",
        gran.rate_bps,
        epi.rate_bps
    );
    assert!(
        gran.rate_bps >= epi.rate_bps - cfg.solver.granularity_bps - 1.0,
        "granularity {} fell more than one step below the epigraph optimum {}",
        gran.rate_bps,
        epi.rate_bps
    );
}

#[test]
fn sweep_covers_the_grid_and_survives_bad_cells() {
    let mut base = two_tower();
    base.traffic.density_per_km2 = 30.0;
    let spec = SweepSpec {
        base,
        l_values_km: vec![2.0, 3.0],
        fiber_sets: vec![vec![2], vec![1, 2]],
    };
    let rows = run_sweep(&spec);
    assert_eq!(rows.len(), 4);
    // The all-fiber set has no backhaul to plan; its rows carry the error.
    for r in &rows {
        if r.fiber_ids == vec![1, 2] {
            assert!(r.status.starts_with("error"));
            assert!(!r.feasible);
            assert_eq!(r.rate_mbps, 0.0);
        } else {
            assert_eq!(r.status, "optimal");
            assert!(r.rate_mbps > 90.0);
        }
    }
    // Demand still scales with the cell even in failed rows.
    assert!(rows[0].demand_mbps < rows[2].demand_mbps);

    let csv = sweep_csv(&rows);
    let lines: Vec<&str> = csv.trim_end().lines().collect();
    assert_eq!(
        lines[0],
        "l_km,fiber_ids,demand_mbps,rate_mbps,feasible,gap,nodes,status"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("2,2,"));
    assert!(lines[2].contains(",1+2,"));
}

#[test]
fn sweep_rows_reproduce_bit_identically() {
    let spec = SweepSpec {
        base: small_grid(),
        l_values_km: vec![3.0],
        fiber_sets: vec![vec![1]],
    };
    let a = run_sweep(&spec);
    let b = run_sweep(&spec);
    assert_eq!(sweep_csv(&a), sweep_csv(&b));
}

#[test]
fn dot_export_shapes() {
    let cfg = two_tower();
    let out = run_scenario(&cfg).unwrap();
    let net = build_grid(&cfg).unwrap();
    let dot = export_topology_dot(&out.plan, &net);
    assert!(dot.starts_with("digraph"));
    assert!(dot.contains("t2 [label=\"2\", shape=doublecircle];"));
    assert!(dot.contains("t1 [label=\"1\", shape=circle];"));
    assert!(dot.contains("t1 -> t2 [label=\"491 MHz"));

    // An empty plan renders isolated nodes only.
    let empty = tvwsplan::plan::Plan {
        links: vec![],
        injected_bps: Default::default(),
        min_rate_bps: 0.0,
        pre_repair_min_rate_bps: 0.0,
    };
    let wich = ScenarioConfig::new(3, 3, 3.0, vec![1, 3, 7, 9], vec![491.0]);
    let net9 = build_grid(&wich).unwrap();
    let dot9 = export_topology_dot(&empty, &net9);
    assert_eq!(dot9.matches("shape=").count(), 9);
    assert!(!dot9.contains("->"));
}

#[test]
fn outcome_serializes_with_the_full_story() {
    let cfg = two_tower();
    let out = run_scenario(&cfg).unwrap();
    let json: serde_json::Value = serde_json::from_str(&out.to_json()).unwrap();
    assert!(json["plan"]["links"].is_array());
    assert!(json["validation"]["families"].is_array());
    assert!(json["demand"]["demand_bps"].is_number());
    assert!(json["solver"]["mode"].is_string());
    assert!(json["rate_bps"].as_f64().unwrap() > 0.0);
}
