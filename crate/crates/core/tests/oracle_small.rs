//! Cross-checks the integer search against exhaustive enumeration. With at
//! most four towers and two channels, every degree-feasible set of active
//! links can be tried directly: fix the schedule, solve what remains as a
//! plain LP, keep the best. Branch and bound has to match that optimum, the
//! resulting plans have to survive repair and verification, and the
//! granularity search has to land within one step of the epigraph optimum.

use std::time::Instant;

use tvwsplan::lp::{LpStatus, SimplexSolver, VarId};
use tvwsplan::milp::{branch_and_bound, build_milp, BuildMode, MilpStatus};
use tvwsplan::model::{build_grid, ScenarioConfig, SolveMode};
use tvwsplan::propagation::LinkGainTable;
use tvwsplan::repair::repair_rates;
use tvwsplan::scenario::run_scenario;

struct Rng(u64);

impl Rng {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn f64(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }
}

/// A random line-free layout: 2 to 4 towers scattered in a 4 km box with at
/// least a kilometer between any two, one fiber tower, one or two channels.
fn random_instance(seed: u64) -> ScenarioConfig {
    let mut rng = Rng(seed);
    let n = [2, 3, 4, 4][rng.below(4)];
    let bands = [491.0, 533.0, 57.0, 671.0, 79.0];
    let nch = 1 + rng.below(2);
    let start = rng.below(bands.len());
    let channels: Vec<f64> = (0..nch).map(|k| bands[(start + k) % bands.len()]).collect();

    let mut pts: Vec<[f64; 2]> = Vec::new();
    while pts.len() < n {
        let cand = [rng.f64() * 4.0, rng.f64() * 4.0];
        let ok = pts
            .iter()
            .all(|p| (p[0] - cand[0]).hypot(p[1] - cand[1]) >= 1.0);
        if ok {
            pts.push(cand);
        }
    }

    let mut cfg = ScenarioConfig::new(1, n, 3.0, vec![1 + rng.below(n)], channels);
    cfg.positions_km = Some(pts);
    cfg.clearance_m = Some(if rng.below(4) == 0 { -15.0 } else { 15.0 });
    cfg.traffic.density_per_km2 = 1.0;
    cfg.solver.gap = 1e-9;
    cfg.solver.workers = 1;
    cfg
}

fn seeds() -> Vec<u64> {
    (0..20).map(|k| 9000 + 17 * k).collect()
}

/// Best objective over every degree-feasible link activation pattern, found
/// by fixing the binaries and solving the remaining LP.
fn exhaustive_best(prob: &tvwsplan::milp::MilpProblem, n_towers: usize) -> f64 {
    let nch = prob
        .x
        .keys()
        .map(|&(_, _, m)| m + 1)
        .max()
        .unwrap_or(0);

    // Per channel, every subset of links where no tower appears twice.
    let mut per_channel: Vec<Vec<Vec<VarId>>> = Vec::new();
    for m in 0..nch {
        let links: Vec<((usize, usize), VarId)> = prob
            .x
            .iter()
            .filter(|&(&(_, _, c), _)| c == m)
            .map(|(&(i, j, _), &v)| ((i, j), v))
            .collect();
        assert!(links.len() <= 16, "enumeration space sized for tiny instances");
        let mut feasible = Vec::new();
        for mask in 0u32..(1 << links.len()) {
            let mut deg = vec![0u8; n_towers + 1];
            let mut ok = true;
            let mut on = Vec::new();
            for (ix, &((i, j), v)) in links.iter().enumerate() {
                if mask & (1 << ix) != 0 {
                    deg[i] += 1;
                    deg[j] += 1;
                    if deg[i] > 1 || deg[j] > 1 {
                        ok = false;
                        break;
                    }
                    on.push(v);
                }
            }
            if ok {
                feasible.push(on);
            }
        }
        per_channel.push(feasible);
    }

    let mut combos: Vec<Vec<VarId>> = vec![Vec::new()];
    for pats in &per_channel {
        let mut next = Vec::with_capacity(combos.len() * pats.len());
        for base in &combos {
            for p in pats {
                let mut v = base.clone();
                v.extend_from_slice(p);
                next.push(v);
            }
        }
        combos = next;
    }

    let all_x: Vec<VarId> = prob.x.values().copied().collect();
    let mut solver = SimplexSolver::new(&prob.lp);
    let mut best = f64::NEG_INFINITY;
    for combo in &combos {
        for &v in &all_x {
            solver.set_var_bounds(v, 0.0, 0.0);
        }
        for &v in combo {
            solver.set_var_bounds(v, 1.0, 1.0);
        }
        match solver.solve().expect("fixed-pattern LP solves") {
            LpStatus::Optimal => best = best.max(solver.objective()),
            LpStatus::Infeasible => {}
            other => panic!("fixed-pattern LP ended {other:?}"),
        }
    }
    best
}

#[test]
fn branch_and_bound_matches_exhaustive_link_patterns() {
    let started = Instant::now();
    for seed in seeds() {
        let cfg = random_instance(seed);
        let net = build_grid(&cfg).unwrap();
        let gains = LinkGainTable::build(&net, &cfg).unwrap();
        let prob = build_milp(&net, &gains, &cfg, BuildMode::Epigraph).unwrap();

        let out = branch_and_bound(&prob, &cfg.solver).unwrap();
        assert_eq!(out.status, MilpStatus::Optimal, "seed {seed} did not close");

        let oracle = exhaustive_best(&prob, net.len());
        let tol = 1e-6 * oracle.abs().max(1.0);
        assert!(
            (out.objective - oracle).abs() <= tol,
            "seed {seed}: search found {} but enumeration found {}",
            out.objective,
            oracle
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "whole comparison took {elapsed:?}, budget is 30 s"
    );
}

#[test]
fn plans_survive_repair_and_verification_on_small_instances() {
    for seed in seeds() {
        let cfg = random_instance(seed);
        let net = build_grid(&cfg).unwrap();
        let gains = LinkGainTable::build(&net, &cfg).unwrap();
        let outcome = run_scenario(&cfg).unwrap();

        assert!(
            outcome.validation.pass,
            "seed {seed} failed verification:\n{}",
            outcome.validation.to_json()
        );
        for family in &outcome.validation.families {
            assert!(
                family.pass,
                "seed {seed} family {} violated by {}",
                family.name, family.worst_violation
            );
        }

        let again = repair_rates(&outcome.plan, &gains).unwrap();
        assert_eq!(again.links.len(), outcome.plan.links.len(), "seed {seed}");
        for (a, b) in again.links.iter().zip(&outcome.plan.links) {
            assert_eq!(a.rate_bps, b.rate_bps, "seed {seed} repair moved a rate");
            assert_eq!(a.power_w, b.power_w, "seed {seed} repair moved a power");
        }
        assert_eq!(again.injected_bps, outcome.plan.injected_bps, "seed {seed}");
        let _ = net;
    }
}

#[test]
fn granularity_stays_within_one_step_of_epigraph() {
    for seed in seeds() {
        let mut fine = random_instance(seed);
        fine.solver.mode = SolveMode::Granularity;
        fine.solver.granularity_bps = 1.0e6;
        let mut epi = random_instance(seed);
        epi.solver.mode = SolveMode::Epigraph;

        let g = run_scenario(&fine).unwrap();
        let e = run_scenario(&epi).unwrap();

        let slack = 1e-6 * e.rate_bps.abs().max(1.0);
        assert!(
            g.rate_bps <= e.rate_bps + slack,
            "seed {seed}: granularity {} outran epigraph {}",
            g.rate_bps,
            e.rate_bps
        );
        assert!(
            g.rate_bps >= e.rate_bps - 1.0e6 - slack,
            "seed {seed}: granularity {} fell more than one step below epigraph {}",
            g.rate_bps,
            e.rate_bps
        );
    }
}
