//! Granularity search: the largest multiple of the rate granularity every
//! tower can be guaranteed, found by bisecting feasibility probes. The
//! direct-link heuristic certifies the lower end without touching the
//! solver; each probe is a fixed-target run that stops at the first
//! integer-feasible point.

use std::time::Instant;

use crate::model::{ConfigError, Network, ScenarioConfig};
use crate::propagation::LinkGainTable;

use super::bb::{solve_bb, BbOptions, BbStatus};
use super::heuristic::direct_plan;
use super::{build_milp, BuildMode};

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ProbeRecord {
    pub target_bps: f64,
    pub feasible: bool,
    /// False when the probe hit its node budget before finding a point or
    /// proving there is none; such targets are treated as infeasible.
    pub resolved: bool,
    pub nodes: usize,
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    /// Largest granularity multiple with a verified feasible plan.
    pub rate_bps: f64,
    /// Variable values of the verified plan, in the probe problem's layout.
    pub values: Vec<f64>,
    pub probes: Vec<ProbeRecord>,
    /// True when some rejected target was never actually resolved, so the
    /// reported rate is a supported value rather than a proven optimum.
    pub unresolved: bool,
    pub nodes_total: usize,
}

pub fn bisection_feasible_rate(
    net: &Network,
    gains: &LinkGainTable,
    cfg: &ScenarioConfig,
    granularity_bps: f64,
) -> Result<PlanResult, ConfigError> {
    assert!(granularity_bps > 0.0);
    let started = Instant::now();
    let mut prob = build_milp(net, gains, cfg, BuildMode::FixedTarget(0.0))?;

    let heur = direct_plan(net, gains, cfg.min_snr_db, cfg.solver.seed);
    let mut lo = (heur.min_rate_bps / granularity_bps).floor().max(0.0) as u64;
    let mut values = heur.lp_values(&prob);

    // No tower can inject more than the sum over channels of its best
    // single-link capacity, so targets above the weakest tower's total are
    // infeasible outright.
    let mut weakest = f64::INFINITY;
    for &i in &net.non_fiber_ids() {
        let mut total = 0.0;
        for m in 0..net.channels_mhz.len() {
            let best = prob
                .v_big_bps
                .iter()
                .filter(|&(&(ii, _, mm), _)| ii == i && mm == m)
                .map(|(_, &v)| v)
                .fold(0.0, f64::max);
            total += best;
        }
        weakest = weakest.min(total);
    }
    let mut hi = (weakest / granularity_bps).floor() as u64 + 1;
    if hi <= lo {
        hi = lo + 1;
    }

    let mut probes = Vec::new();
    let mut unresolved = false;
    let mut nodes_total = 0usize;

    while hi - lo > 1 {
        let remaining = cfg.solver.time_limit_s - started.elapsed().as_secs_f64();
        if remaining <= 0.0 {
            unresolved = true;
            break;
        }
        let mid = lo + (hi - lo) / 2;
        let target = mid as f64 * granularity_bps;
        prob.set_rate_target(target);
        let opts = BbOptions {
            gap: cfg.solver.gap,
            node_limit: Some(cfg.solver.probe_node_limit as usize),
            time_limit: Some(std::time::Duration::from_secs_f64(remaining)),
            cutoff: None,
            target: Some(f64::NEG_INFINITY),
            workers: cfg.solver.workers,
            log: cfg.solver.log_nodes,
            initial: None,
        };
        let out = solve_bb(&prob.lp, &opts).map_err(|e| ConfigError::Solver(e.to_string()))?;
        nodes_total += out.nodes;
        match out.status {
            BbStatus::TargetReached
            | BbStatus::Optimal
            | BbStatus::LimitFeasible => {
                probes.push(ProbeRecord {
                    target_bps: target,
                    feasible: true,
                    resolved: true,
                    nodes: out.nodes,
                });
                lo = mid;
                values = out.values;
            }
            BbStatus::Infeasible => {
                probes.push(ProbeRecord {
                    target_bps: target,
                    feasible: false,
                    resolved: true,
                    nodes: out.nodes,
                });
                hi = mid;
            }
            BbStatus::LimitNoSolution => {
                probes.push(ProbeRecord {
                    target_bps: target,
                    feasible: false,
                    resolved: false,
                    nodes: out.nodes,
                });
                unresolved = true;
                hi = mid;
            }
        }
    }

    Ok(PlanResult {
        rate_bps: lo as f64 * granularity_bps,
        values,
        probes,
        unresolved,
        nodes_total,
    })
}
