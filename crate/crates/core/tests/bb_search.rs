use tvwsplan::lp::{LpProblem, Sense};
use tvwsplan::milp::{solve_bb, BbOptions, BbStatus};

fn binary(lp: &mut LpProblem, name: &str, obj: f64) -> tvwsplan::lp::VarId {
    lp.add_var(name, 0.0, 1.0, obj, true)
}

#[test]
fn continuous_problem_solves_at_the_root() {
    let mut lp = LpProblem::new("lp only", true);
    let x = lp.add_var("x", 0.0, 10.0, 1.0, false);
    let y = lp.add_var("y", 0.0, 10.0, 1.0, false);
    lp.add_row("cap", Sense::Le, 12.0, vec![(x, 1.0), (y, 2.0)]);
    let out = solve_bb(&lp, &BbOptions::default()).unwrap();
    assert_eq!(out.status, BbStatus::Optimal);
    assert_eq!(out.nodes, 1);
    assert!((out.objective - 11.0).abs() < 1e-6);
}

#[test]
fn knapsack_optimum() {
    let mut lp = LpProblem::new("knapsack", true);
    let x1 = binary(&mut lp, "x1", 8.0);
    let x2 = binary(&mut lp, "x2", 11.0);
    let x3 = binary(&mut lp, "x3", 6.0);
    let x4 = binary(&mut lp, "x4", 4.0);
    lp.add_row(
        "weight",
        Sense::Le,
        14.0,
        vec![(x1, 5.0), (x2, 7.0), (x3, 4.0), (x4, 3.0)],
    );
    let out = solve_bb(&lp, &BbOptions { gap: 1e-9, ..BbOptions::default() }).unwrap();
    assert_eq!(out.status, BbStatus::Optimal);
    assert!((out.objective - 21.0).abs() < 1e-6);
    assert!(out.values[x1.0] < 0.5);
    assert!(out.values[x2.0] > 0.5);
    assert!(out.values[x3.0] > 0.5);
    assert!(out.values[x4.0] > 0.5);
}

#[test]
fn fractional_relaxation_forces_branching() {
    let mut lp = LpProblem::new("branch", true);
    let x = binary(&mut lp, "x", 1.0);
    let y = binary(&mut lp, "y", 1.0);
    lp.add_row("pack", Sense::Le, 1.5, vec![(x, 1.0), (y, 1.0)]);
    let out = solve_bb(&lp, &BbOptions { gap: 1e-9, ..BbOptions::default() }).unwrap();
    assert_eq!(out.status, BbStatus::Optimal);
    assert!((out.objective - 1.0).abs() < 1e-9);
    assert!(out.nodes > 1, "the root relaxation is fractional at 1.5");
    assert!(out.bound >= out.objective - 1e-9);
}

#[test]
fn infeasible_integer_program() {
    let mut lp = LpProblem::new("infeasible", true);
    let x = binary(&mut lp, "x", 1.0);
    lp.add_row("hi", Sense::Ge, 0.6, vec![(x, 1.0)]);
    lp.add_row("lo", Sense::Le, 0.4, vec![(x, 1.0)]);
    let out = solve_bb(&lp, &BbOptions::default()).unwrap();
    assert_eq!(out.status, BbStatus::Infeasible);
    assert!(out.values.is_empty());
}

#[test]
fn target_stops_the_search_early() {
    let mut lp = LpProblem::new("target", true);
    let x = binary(&mut lp, "x", 1.0);
    let y = binary(&mut lp, "y", 1.0);
    lp.add_row("pack", Sense::Le, 1.5, vec![(x, 1.0), (y, 1.0)]);
    let out = solve_bb(
        &lp,
        &BbOptions {
            target: Some(0.5),
            ..BbOptions::default()
        },
    )
    .unwrap();
    assert_eq!(out.status, BbStatus::TargetReached);
    assert!(out.objective >= 0.5);
}

#[test]
fn injected_incumbent_counts() {
    let mut lp = LpProblem::new("warm", true);
    let x = binary(&mut lp, "x", 3.0);
    let y = binary(&mut lp, "y", 2.0);
    lp.add_row("pack", Sense::Le, 1.0, vec![(x, 1.0), (y, 1.0)]);
    // A known-feasible solution plus a target it already meets: the search
    // can stop before exploring a single node.
    let out = solve_bb(
        &lp,
        &BbOptions {
            target: Some(2.0),
            initial: Some((2.0, vec![0.0, 1.0])),
            ..BbOptions::default()
        },
    )
    .unwrap();
    assert_eq!(out.status, BbStatus::TargetReached);
    assert_eq!(out.nodes, 0);
    assert!((out.objective - 2.0).abs() < 1e-9);

    // Without the early target the injected incumbent is just a bound and
    // the search still proves the true optimum.
    let out2 = solve_bb(
        &lp,
        &BbOptions {
            initial: Some((2.0, vec![0.0, 1.0])),
            gap: 1e-9,
            ..BbOptions::default()
        },
    )
    .unwrap();
    assert_eq!(out2.status, BbStatus::Optimal);
    assert!((out2.objective - 3.0).abs() < 1e-9);
}

#[test]
fn node_limit_reports_honestly() {
    let mut lp = LpProblem::new("capped", true);
    let mut vars = Vec::new();
    for i in 0..12 {
        vars.push(binary(&mut lp, &format!("x{i}"), 1.0 + (i as f64) * 0.1));
    }
    let terms: Vec<_> = vars.iter().map(|&v| (v, 1.0)).collect();
    lp.add_row("pack", Sense::Le, 5.5, terms);

    let starved = solve_bb(
        &lp,
        &BbOptions {
            node_limit: Some(0),
            ..BbOptions::default()
        },
    )
    .unwrap();
    assert_eq!(starved.status, BbStatus::LimitNoSolution);
    assert!(starved.values.is_empty());

    let mut seed = vec![0.0; 12];
    for s in seed.iter_mut().take(5) {
        *s = 1.0;
    }
    let score: f64 = (0..5).map(|i| 1.0 + (i as f64) * 0.1).sum();
    let warm = solve_bb(
        &lp,
        &BbOptions {
            node_limit: Some(0),
            initial: Some((score, seed)),
            ..BbOptions::default()
        },
    )
    .unwrap();
    assert_eq!(warm.status, BbStatus::LimitFeasible);
    assert!((warm.objective - score).abs() < 1e-9);
    assert!(warm.bound >= warm.objective);
}

#[test]
fn deterministic_single_worker_runs() {
    let mut lp = LpProblem::new("repeat", true);
    let mut vars = Vec::new();
    for i in 0..10 {
        vars.push(binary(&mut lp, &format!("x{i}"), ((i * 7) % 5) as f64 + 1.0));
    }
    let terms: Vec<_> = vars.iter().map(|&v| (v, 1.0)).collect();
    lp.add_row("pack", Sense::Le, 4.5, terms);
    for w in [(0, 1), (1, 2), (2, 3)] {
        lp.add_row(
            &format!("pair{}", w.0),
            Sense::Le,
            1.0,
            vec![(vars[w.0], 1.0), (vars[w.1], 1.0)],
        );
    }
    let a = solve_bb(&lp, &BbOptions::default()).unwrap();
    let b = solve_bb(&lp, &BbOptions::default()).unwrap();
    assert_eq!(a.status, b.status);
    assert_eq!(a.nodes, b.nodes);
    assert_eq!(a.objective, b.objective);
    assert_eq!(a.values, b.values);
}

#[test]
fn two_workers_agree_with_one() {
    let mut lp = LpProblem::new("parallel", true);
    let mut vars = Vec::new();
    for i in 0..10 {
        vars.push(binary(&mut lp, &format!("x{i}"), 1.0 + ((i * 3) % 4) as f64));
    }
    let terms: Vec<_> = vars.iter().map(|&v| (v, 1.0)).collect();
    lp.add_row("pack", Sense::Le, 4.5, terms);
    let solo = solve_bb(&lp, &BbOptions { gap: 1e-9, ..BbOptions::default() }).unwrap();
    let duo = solve_bb(
        &lp,
        &BbOptions {
            gap: 1e-9,
            workers: 2,
            ..BbOptions::default()
        },
    )
    .unwrap();
    assert_eq!(solo.status, BbStatus::Optimal);
    assert_eq!(duo.status, BbStatus::Optimal);
    assert!((solo.objective - duo.objective).abs() < 1e-9);
}
