//! Mixed-integer program for joint power allocation, channel scheduling and
//! routing: binary link-channel activations, piecewise-linear capacity cuts,
//! per-tower power budgets, half-duplex degree limits, receiver protection
//! against co-channel transmitters, and flow conservation toward the fiber
//! sites. Solved by branch and bound, either maximizing the minimum injected
//! rate directly or probing fixed rate targets for the granularity search.

mod bb;
mod bisect;
mod heuristic;

pub use bb::{solve_bb, BbOptions, BbOutcome, BbStatus};
pub use bisect::{bisection_feasible_rate, PlanResult, ProbeRecord};
pub use heuristic::{direct_plan, DirectLink, DirectPlan};

use std::collections::BTreeMap;

use crate::lp::{LpError, LpProblem, Sense, VarId};
use crate::model::{candidate_links, ConfigError, Network, ScenarioConfig, SolverConfig};
use crate::propagation::LinkGainTable;

/// (transmitter id, receiver id, channel index)
pub type LinkKey = (usize, usize, usize);

/// One tangent line to the capacity curve, expressed over transmit power:
/// rate <= intercept + slope * p.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct PwlCut {
    /// Tangent point as linear SNR.
    pub s0: f64,
    /// bps per watt.
    pub slope_bps_per_w: f64,
    /// bps at zero power.
    pub intercept_bps: f64,
}

impl PwlCut {
    pub fn eval_at_power(&self, p_w: f64) -> f64 {
        self.intercept_bps + self.slope_bps_per_w * p_w
    }

    pub fn eval_at_snr(&self, s: f64, alpha_per_w: f64) -> f64 {
        self.eval_at_power(s / alpha_per_w)
    }
}

fn tangent_at(s0: f64, w_hz: f64, alpha_per_w: f64) -> PwlCut {
    let slope_s = w_hz / ((1.0 + s0) * std::f64::consts::LN_2);
    PwlCut {
        s0,
        slope_bps_per_w: slope_s * alpha_per_w,
        intercept_bps: w_hz * (1.0 + s0).log2() - slope_s * s0,
    }
}

/// Tangent lines at 0 dB, step_db, 2*step_db, ... strictly below the
/// full-power SNR, plus one at the full-power SNR itself. When full power
/// yields less than 0 dB only that last tangent is emitted.
pub fn tangent_cuts(
    g_linear: f64,
    pmax_w: f64,
    n0_w_per_hz: f64,
    w_hz: f64,
    step_db: f64,
) -> Vec<PwlCut> {
    assert!(g_linear > 0.0 && pmax_w > 0.0 && w_hz > 0.0 && step_db > 0.0);
    let alpha = g_linear / (n0_w_per_hz * w_hz);
    let s_max = pmax_w * alpha;
    let s_max_db = 10.0 * s_max.log10();
    let mut cuts = Vec::new();
    if s_max >= 1.0 {
        let mut db = 0.0;
        while db < s_max_db {
            cuts.push(tangent_at(10f64.powf(db / 10.0), w_hz, alpha));
            db += step_db;
        }
    }
    cuts.push(tangent_at(s_max, w_hz, alpha));
    cuts
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BuildMode {
    /// max t with r_i >= t for every non-fiber tower.
    Epigraph,
    /// Feasibility probe: r_i >= target for every non-fiber tower, max 0.
    FixedTarget(f64),
}

/// The assembled program plus the variable index needed to read solutions
/// back out of a raw LP values vector.
pub struct MilpProblem {
    pub lp: LpProblem,
    pub x: BTreeMap<LinkKey, VarId>,
    pub p: BTreeMap<LinkKey, VarId>,
    pub r: BTreeMap<LinkKey, VarId>,
    pub r_inj: BTreeMap<usize, VarId>,
    pub t: Option<VarId>,
    pub cuts: BTreeMap<LinkKey, Vec<PwlCut>>,
    pub u_big_w: f64,
    pub v_big_bps: BTreeMap<LinkKey, f64>,
    pub mode: BuildMode,
    pub warnings: Vec<String>,
}

impl MilpProblem {
    /// Moves every non-fiber tower's injected-rate floor, turning the same
    /// problem into a probe for a different target.
    pub fn set_rate_target(&mut self, target_bps: f64) {
        assert!(matches!(self.mode, BuildMode::FixedTarget(_)));
        for (_, &v) in &self.r_inj {
            self.lp.set_bounds(v, target_bps, f64::INFINITY);
        }
        self.mode = BuildMode::FixedTarget(target_bps);
    }

    pub fn min_injected(&self, values: &[f64]) -> f64 {
        self.r_inj
            .values()
            .map(|v| values[v.0])
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn build_milp(
    net: &Network,
    gains: &LinkGainTable,
    cfg: &ScenarioConfig,
    mode: BuildMode,
) -> Result<MilpProblem, ConfigError> {
    let non_fiber = net.non_fiber_ids();
    if non_fiber.is_empty() {
        return Err(ConfigError::Solver(
            "every tower has fiber; there is no backhaul to plan".into(),
        ));
    }
    let mut warnings = Vec::new();
    let links = candidate_links(net, gains, cfg.min_snr_db);
    if links.is_empty() {
        warnings.push("no candidate links; the program is trivially rate-zero".into());
    }
    let n_ch = net.channels_mhz.len();
    let pmax = cfg.pmax_w;
    let n0 = crate::propagation::noise_power_w(cfg.noise_psd_dbm_hz, 1.0);
    let w = cfg.channel_bw_hz;
    let thr_w = cfg.interference_threshold_w();

    let mut lp = LpProblem::new("backhaul", true);
    let mut x = BTreeMap::new();
    let mut p = BTreeMap::new();
    let mut r = BTreeMap::new();
    let mut cuts: BTreeMap<LinkKey, Vec<PwlCut>> = BTreeMap::new();
    let mut v_big: BTreeMap<LinkKey, f64> = BTreeMap::new();

    let keys: Vec<LinkKey> = links
        .iter()
        .flat_map(|&(i, j)| (0..n_ch).map(move |m| (i, j, m)))
        .collect();

    for &(i, j, m) in &keys {
        x.insert((i, j, m), lp.add_var(format!("x_{i}_{j}_{m}"), 0.0, 1.0, 0.0, true));
    }
    for &(i, j, m) in &keys {
        p.insert((i, j, m), lp.add_var(format!("p_{i}_{j}_{m}"), 0.0, pmax, 0.0, false));
    }
    for &(i, j, m) in &keys {
        let cap = gains.capacity_full_bps(i, j, m);
        v_big.insert((i, j, m), cap);
        r.insert((i, j, m), lp.add_var(format!("r_{i}_{j}_{m}"), 0.0, cap, 0.0, false));
    }
    let target0 = match mode {
        BuildMode::Epigraph => 0.0,
        BuildMode::FixedTarget(t0) => t0,
    };
    let mut r_inj = BTreeMap::new();
    for &i in &non_fiber {
        r_inj.insert(i, lp.add_var(format!("ri_{i}"), target0, f64::INFINITY, 0.0, false));
    }
    let t = match mode {
        BuildMode::Epigraph => {
            Some(lp.add_var("t", 0.0, f64::INFINITY, 1.0, false))
        }
        BuildMode::FixedTarget(_) => None,
    };

    // Half-duplex: a tower joins at most one transmission or reception per
    // channel, counting both endpoints of every candidate link.
    for k in 1..=net.len() {
        for m in 0..n_ch {
            let terms: Vec<(VarId, f64)> = keys
                .iter()
                .filter(|&&(i, j, mm)| mm == m && (i == k || j == k))
                .map(|key| (x[key], 1.0))
                .collect();
            if !terms.is_empty() {
                lp.add_row(format!("deg_{k}_{m}"), Sense::Le, 1.0, terms);
            }
        }
    }

    // Per-tower power budget across all channels and destinations.
    for &i in &non_fiber {
        let terms: Vec<(VarId, f64)> = keys
            .iter()
            .filter(|&&(ii, _, _)| ii == i)
            .map(|key| (p[key], 1.0))
            .collect();
        if !terms.is_empty() {
            lp.add_row(format!("pow_{i}"), Sense::Le, pmax, terms);
        }
    }

    // Piecewise-linear capacity: every link-channel rate sits under the
    // tangent family. The tangents overestimate capacity between their
    // touch points; the repair stage settles that bill after solving.
    for key in &keys {
        let &(i, j, m) = key;
        let g = gains.gain_linear(i, j, m);
        let link_cuts = tangent_cuts(g, pmax, n0, w, cfg.pwl_step_db);
        for (c, cut) in link_cuts.iter().enumerate() {
            lp.add_row(
                format!("cap_{i}_{j}_{m}_{c}"),
                Sense::Le,
                cut.intercept_bps,
                vec![(r[key], 1.0), (p[key], -cut.slope_bps_per_w)],
            );
        }
        cuts.insert(*key, link_cuts);
    }

    // Big-M activation: no power and no rate unless the link is scheduled.
    for key in &keys {
        let &(i, j, m) = key;
        lp.add_row(
            format!("actp_{i}_{j}_{m}"),
            Sense::Le,
            0.0,
            vec![(p[key], 1.0), (x[key], -pmax)],
        );
        lp.add_row(
            format!("actr_{i}_{j}_{m}"),
            Sense::Le,
            0.0,
            vec![(r[key], 1.0), (x[key], -v_big[key])],
        );
    }

    // Receiver protection: when any link into j is active on channel m,
    // every other transmitter k must keep its channel-m power below the
    // level that would exceed the interference threshold at j. Aggregated
    // per (k, j, m) using the degree row; the pairwise flag emits one row
    // per (protected link, transmitter) instead.
    let emitted = add_interference_rows(
        &mut lp, net, gains, cfg, &keys, &x, &p, thr_w, pmax,
    );
    if emitted == 0 && !keys.is_empty() {
        warnings.push(
            "interference threshold exceeds full-power coupling on every pair; no protection rows emitted"
                .into(),
        );
    }

    // Flow conservation at every non-fiber tower: outbound rate minus
    // inbound rate equals the tower's own injected rate.
    for &i in &non_fiber {
        let mut terms: Vec<(VarId, f64)> = Vec::new();
        for key in &keys {
            if key.0 == i {
                terms.push((r[key], 1.0));
            } else if key.1 == i {
                terms.push((r[key], -1.0));
            }
        }
        terms.push((r_inj[&i], -1.0));
        lp.add_row(format!("flow_{i}"), Sense::Eq, 0.0, terms);
    }

    // Network balance: everything injected lands on a fiber tower.
    {
        let mut terms: Vec<(VarId, f64)> = keys
            .iter()
            .filter(|&&(_, j, _)| net.is_fiber(j))
            .map(|key| (r[key], 1.0))
            .collect();
        for &i in &non_fiber {
            terms.push((r_inj[&i], -1.0));
        }
        lp.add_row("bal", Sense::Eq, 0.0, terms);
    }

    if let Some(t_var) = t {
        for &i in &non_fiber {
            lp.add_row(
                format!("epi_{i}"),
                Sense::Ge,
                0.0,
                vec![(r_inj[&i], 1.0), (t_var, -1.0)],
            );
        }
    }

    Ok(MilpProblem {
        lp,
        x,
        p,
        r,
        r_inj,
        t,
        cuts,
        u_big_w: pmax,
        v_big_bps: v_big,
        mode,
        warnings,
    })
}

#[allow(clippy::too_many_arguments)]
fn add_interference_rows(
    lp: &mut LpProblem,
    net: &Network,
    gains: &LinkGainTable,
    cfg: &ScenarioConfig,
    keys: &[LinkKey],
    x: &BTreeMap<LinkKey, VarId>,
    p: &BTreeMap<LinkKey, VarId>,
    thr_w: f64,
    pmax: f64,
) -> usize {
    let non_fiber = net.non_fiber_ids();
    let n_ch = net.channels_mhz.len();
    let mut emitted = 0usize;
    if !cfg.interference_pairwise {
        for &k in &non_fiber {
            for j in 1..=net.len() {
                if j == k {
                    continue;
                }
                for m in 0..n_ch {
                    let coupling = pmax - thr_w / gains.gain_linear(k, j, m);
                    if coupling <= 0.0 {
                        continue;
                    }
                    let mut terms: Vec<(VarId, f64)> = keys
                        .iter()
                        .filter(|&&(kk, _, mm)| kk == k && mm == m)
                        .map(|key| (p[key], 1.0))
                        .collect();
                    if terms.is_empty() {
                        continue;
                    }
                    let mut protected = 0usize;
                    for key in keys {
                        let &(i, jj, mm) = key;
                        if jj == j && mm == m && i != k {
                            terms.push((x[key], coupling));
                            protected += 1;
                        }
                    }
                    if protected == 0 {
                        continue;
                    }
                    lp.add_row(format!("intf_{k}_{j}_{m}"), Sense::Le, pmax, terms);
                    emitted += 1;
                }
            }
        }
    } else {
        for key in keys {
            let &(i, j, m) = key;
            for &k in &non_fiber {
                if k == i || k == j {
                    continue;
                }
                let coupling = pmax - thr_w / gains.gain_linear(k, j, m);
                if coupling <= 0.0 {
                    continue;
                }
                let mut terms: Vec<(VarId, f64)> = keys
                    .iter()
                    .filter(|&&(kk, _, mm)| kk == k && mm == m)
                    .map(|pkey| (p[pkey], 1.0))
                    .collect();
                if terms.is_empty() {
                    continue;
                }
                terms.push((x[key], coupling));
                lp.add_row(format!("intf_{k}_{i}_{j}_{m}"), Sense::Le, pmax, terms);
                emitted += 1;
            }
        }
    }
    emitted
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    /// Proven within the requested gap.
    Optimal,
    /// Limit hit with an incumbent; gap reported.
    Feasible,
    /// Search exhausted without any integer-feasible point.
    Infeasible,
    /// Limit hit before any incumbent was found.
    Unknown,
}

#[derive(Clone, Debug)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Incumbent objective in the problem's own sense.
    pub objective: f64,
    /// Best remaining relaxation bound.
    pub bound: f64,
    /// Relative gap between bound and incumbent.
    pub gap: f64,
    pub nodes: usize,
    pub values: Vec<f64>,
    pub log: String,
}

/// Solves the program by branch and bound under the configured limits.
pub fn branch_and_bound(
    m: &MilpProblem,
    cfg: &SolverConfig,
) -> Result<MilpSolution, LpError> {
    let opts = BbOptions {
        gap: cfg.gap,
        node_limit: cfg.node_limit.map(|n| n as usize),
        time_limit: Some(std::time::Duration::from_secs_f64(cfg.time_limit_s)),
        cutoff: None,
        target: None,
        workers: cfg.workers,
        log: cfg.log_nodes,
        initial: None,
    };
    let out = bb::solve_bb(&m.lp, &opts)?;
    Ok(milp_solution_from(out))
}

pub(crate) fn milp_solution_from(out: BbOutcome) -> MilpSolution {
    let status = match out.status {
        BbStatus::Optimal => MilpStatus::Optimal,
        BbStatus::TargetReached | BbStatus::LimitFeasible => MilpStatus::Feasible,
        BbStatus::Infeasible => MilpStatus::Infeasible,
        BbStatus::LimitNoSolution => MilpStatus::Unknown,
    };
    let gap = if out.values.is_empty() {
        f64::INFINITY
    } else {
        ((out.bound - out.objective) / out.objective.abs().max(1.0)).max(0.0)
    };
    MilpSolution {
        status,
        objective: out.objective,
        bound: out.bound,
        gap,
        nodes: out.nodes,
        values: out.values,
        log: out.log,
    }
}
