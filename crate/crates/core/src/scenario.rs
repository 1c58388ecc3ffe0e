//! End-to-end runs: grid construction, gain table, demand model, solve,
//! polish, repair, validation, and the deployment-size sweep. This is the
//! layer the command line and the browser demo sit on.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::lp::solve_lp;
use crate::milp::{
    bisection_feasible_rate, build_milp, direct_plan, milp_solution_from, solve_bb, BbOptions,
    BuildMode, MilpProblem, MilpStatus, ProbeRecord,
};
use crate::model::{build_grid, ConfigError, Network, ScenarioConfig, SolveMode};
use crate::plan::Plan;
use crate::propagation::LinkGainTable;
use crate::repair::{repair_rates, verify_plan, ValidationReport};
use crate::traffic::{per_cell_demand, CellDemand};

#[derive(Clone, Debug, Serialize)]
pub struct SolverStats {
    pub mode: SolveMode,
    pub status: String,
    pub nodes: usize,
    /// Bisection probe trail; empty for epigraph runs.
    pub probes: Vec<ProbeRecord>,
    /// True when a node or time budget left some probe target unproven, so
    /// the reported rate is supported rather than proven optimal.
    pub unresolved: bool,
    pub gap: f64,
    /// Certified granularity multiple, granularity mode only.
    pub granularity_rate_bps: Option<f64>,
    /// Solver objective before repair, epigraph mode only.
    pub objective_bps: Option<f64>,
    pub bound_bps: Option<f64>,
    pub wall_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioOutcome {
    pub demand: CellDemand,
    pub plan: Plan,
    pub validation: ValidationReport,
    /// Post-repair guaranteed rate for every tower.
    pub rate_bps: f64,
    /// Whether the repaired, validated plan covers the cell demand.
    pub feasible: bool,
    pub warnings: Vec<String>,
    pub solver: SolverStats,
}

impl ScenarioOutcome {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcome serializes")
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome, ConfigError> {
    let started = Instant::now();
    let net = build_grid(cfg)?;
    let gains =
        LinkGainTable::build(&net, cfg).map_err(|e| ConfigError::Solver(e.to_string()))?;
    let demand = per_cell_demand(&cfg.traffic, cfg.spacing_km);

    let mut warnings = Vec::new();
    let (source, values, mut stats) = match cfg.solver.mode {
        SolveMode::Granularity => {
            let prob = build_milp(&net, &gains, cfg, BuildMode::FixedTarget(0.0))?;
            warnings.extend(prob.warnings.iter().cloned());
            let res = bisection_feasible_rate(&net, &gains, cfg, cfg.solver.granularity_bps)?;
            let stats = SolverStats {
                mode: SolveMode::Granularity,
                status: if res.unresolved {
                    "supported".into()
                } else {
                    "optimal".into()
                },
                nodes: res.nodes_total,
                probes: res.probes.clone(),
                unresolved: res.unresolved,
                gap: 0.0,
                granularity_rate_bps: Some(res.rate_bps),
                objective_bps: None,
                bound_bps: None,
                wall_s: 0.0,
            };
            (prob, res.values, stats)
        }
        SolveMode::Epigraph => {
            let prob = build_milp(&net, &gains, cfg, BuildMode::Epigraph)?;
            warnings.extend(prob.warnings.iter().cloned());
            let heur = direct_plan(&net, &gains, cfg.min_snr_db, cfg.solver.seed);
            let initial = heur.lp_values(&prob);
            let opts = BbOptions {
                gap: cfg.solver.gap,
                node_limit: cfg.solver.node_limit.map(|n| n as usize),
                time_limit: Some(std::time::Duration::from_secs_f64(cfg.solver.time_limit_s)),
                cutoff: None,
                target: None,
                workers: cfg.solver.workers,
                log: cfg.solver.log_nodes,
                initial: Some((heur.min_rate_bps, initial)),
            };
            let out =
                solve_bb(&prob.lp, &opts).map_err(|e| ConfigError::Solver(e.to_string()))?;
            let sol = milp_solution_from(out);
            if sol.values.is_empty() {
                return Err(ConfigError::Solver(format!(
                    "no feasible plan found within the limits (status {:?}, {} nodes)",
                    sol.status, sol.nodes
                )));
            }
            if sol.status == MilpStatus::Feasible {
                warnings.push(format!(
                    "search stopped at a limit; best plan is within {:.3e} relative gap of optimal",
                    sol.gap
                ));
            }
            let stats = SolverStats {
                mode: SolveMode::Epigraph,
                status: format!("{:?}", sol.status).to_lowercase(),
                nodes: sol.nodes,
                probes: Vec::new(),
                unresolved: sol.status == MilpStatus::Feasible,
                gap: sol.gap,
                granularity_rate_bps: None,
                objective_bps: Some(sol.objective),
                bound_bps: Some(sol.bound),
                wall_s: 0.0,
            };
            (prob, sol.values, stats)
        }
    };

    let (prob, values) = polish(&net, &gains, cfg, &source, &values)?;
    let plan = Plan::from_values(&prob, &net, &values);
    let plan = repair_rates(&plan, &gains).map_err(|e| ConfigError::Solver(e.to_string()))?;
    let validation = verify_plan(&plan, &net, &gains, cfg);
    let rate_bps = plan.min_rate_bps;
    let feasible = validation.pass && rate_bps + 1e-9 >= demand.demand_bps;
    stats.wall_s = started.elapsed().as_secs_f64();

    Ok(ScenarioOutcome {
        demand,
        plan,
        validation,
        rate_bps,
        feasible,
        warnings,
        solver: stats,
    })
}

/// Rebalances rates for the solved topology: keeps the scheduling bits
/// fixed and re-solves the continuous relaxation with a max-min objective,
/// so every tower gets the best rate the chosen links support.
fn polish(
    net: &Network,
    gains: &LinkGainTable,
    cfg: &ScenarioConfig,
    source: &MilpProblem,
    source_values: &[f64],
) -> Result<(MilpProblem, Vec<f64>), ConfigError> {
    let mut epi = build_milp(net, gains, cfg, BuildMode::Epigraph)?;
    for (key, &xv) in &epi.x {
        let fixed = source_values[source.x[key].0].round().clamp(0.0, 1.0);
        epi.lp.set_bounds(xv, fixed, fixed);
    }
    let sol = solve_lp(&epi.lp).map_err(|e| ConfigError::Solver(e.to_string()))?;
    if sol.status == crate::lp::LpStatus::Optimal {
        let values = sol.values;
        return Ok((epi, values));
    }
    // The fixed topology should always admit its own rates; fall back to
    // translating the source solution directly if the re-solve bails.
    let mut values = vec![0.0; epi.lp.num_vars()];
    for (key, &v) in &epi.x {
        values[v.0] = source_values[source.x[key].0];
    }
    for (key, &v) in &epi.p {
        values[v.0] = source_values[source.p[key].0];
    }
    for (key, &v) in &epi.r {
        values[v.0] = source_values[source.r[key].0];
    }
    let mut t_val = f64::INFINITY;
    for (&tower, &v) in &epi.r_inj {
        let sv = source_values[source.r_inj[&tower].0];
        values[v.0] = sv;
        t_val = t_val.min(sv);
    }
    if let Some(t) = epi.t {
        values[t.0] = if t_val.is_finite() { t_val } else { 0.0 };
    }
    Ok((epi, values))
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub l_values_km: Vec<f64>,
    pub fiber_sets: Vec<Vec<usize>>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub l_km: f64,
    pub fiber_ids: Vec<usize>,
    pub demand_mbps: f64,
    pub rate_mbps: f64,
    pub feasible: bool,
    pub gap: f64,
    pub nodes: usize,
    pub status: String,
}

/// Runs every (cell size, fiber set) combination independently. Each row
/// re-derives its own grid, gains, and demand from the base scenario; a cell
/// that fails to solve is recorded in its row and the sweep moves on.
pub fn run_sweep(spec: &SweepSpec) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &l in &spec.l_values_km {
        for fiber in &spec.fiber_sets {
            let mut cfg = spec.base.clone();
            cfg.spacing_km = l;
            cfg.fiber_ids = fiber.clone();
            let row = match run_scenario(&cfg) {
                Ok(out) => SweepRow {
                    l_km: l,
                    fiber_ids: fiber.clone(),
                    demand_mbps: out.demand.demand_bps / 1e6,
                    rate_mbps: out.rate_bps / 1e6,
                    feasible: out.feasible,
                    gap: out.solver.gap,
                    nodes: out.solver.nodes,
                    status: out.solver.status.clone(),
                },
                Err(e) => SweepRow {
                    l_km: l,
                    fiber_ids: fiber.clone(),
                    demand_mbps: per_cell_demand(&spec.base.traffic, l).demand_bps / 1e6,
                    rate_mbps: 0.0,
                    feasible: false,
                    gap: 0.0,
                    nodes: 0,
                    status: format!("error: {e}"),
                },
            };
            rows.push(row);
        }
    }
    rows
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("l_km,fiber_ids,demand_mbps,rate_mbps,feasible,gap,nodes,status\n");
    for r in rows {
        let ids = r
            .fiber_ids
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join("+");
        s.push_str(&format!(
            "{},{},{:.3},{:.3},{},{},{},{}\n",
            r.l_km,
            ids,
            r.demand_mbps,
            r.rate_mbps,
            r.feasible,
            r.gap,
            r.nodes,
            r.status.replace(',', ";")
        ));
    }
    s
}

/// Graphviz rendering of a plan: fiber towers are double circled, each
/// active link is an edge labeled with its channel and repaired rate.
pub fn export_topology_dot(plan: &Plan, net: &Network) -> String {
    let mut s = String::from("digraph backhaul {\n  rankdir=LR;\n");
    for t in &net.towers {
        if t.fiber {
            s.push_str(&format!(
                "  t{} [label=\"{}\", shape=doublecircle];\n",
                t.id, t.id
            ));
        } else {
            s.push_str(&format!("  t{} [label=\"{}\", shape=circle];\n", t.id, t.id));
        }
    }
    let mut links: Vec<_> = plan.links.iter().collect();
    links.sort_by_key(|l| (l.from, l.to, l.channel));
    for l in links {
        s.push_str(&format!(
            "  t{} -> t{} [label=\"{} MHz\\n{:.1} Mbps\"];\n",
            l.from,
            l.to,
            l.channel_mhz,
            l.rate_bps / 1e6
        ));
    }
    s.push_str("}\n");
    s
}
