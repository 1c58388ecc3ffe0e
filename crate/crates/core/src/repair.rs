//! Post-solve repair and validation. The solver works against a linearized
//! outer approximation of link capacity, so its claimed rates can sit
//! slightly above what the allocated powers actually support. Repair clamps
//! every link to its exact capacity and walks the lost throughput back
//! through the routing tree; validation then re-checks the finished plan
//! against the real constraints with no linearization anywhere.

use serde::Serialize;
use thiserror::Error;

use crate::model::{Network, ScenarioConfig};
use crate::plan::Plan;
use crate::propagation::LinkGainTable;

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("rate reduction at tower {tower} could not be absorbed: {residual_bps} bps left with no inbound flow")]
    Unabsorbed { tower: usize, residual_bps: f64 },
    #[error("rate reduction cascaded deeper than the link count allows; the plan routes in a cycle")]
    CascadeDepth,
}

/// Clamps every link rate to the exact capacity of its allocated power and
/// propagates the lost rate through the routing. Each link's loss lands on
/// its transmitter as reduced injection (a tower pushed below zero
/// injection sheds the remainder onto its inbound links, largest first),
/// and on its receiver as reduced forwarding, cascading down to fiber.
pub fn repair_rates(plan: &Plan, gains: &LinkGainTable) -> Result<Plan, RepairError> {
    let mut out = plan.clone();
    let depth_cap = out.links.len() * 4 + 16;
    let mut order: Vec<usize> = (0..out.links.len()).collect();
    order.sort_by_key(|&ix| {
        let l = &out.links[ix];
        (l.from, l.to, l.channel)
    });
    for ix in order {
        let l = out.links[ix];
        let g = gains.gain_linear(l.from, l.to, l.channel);
        let exact =
            gains.channel_bw_hz * (1.0 + l.power_w * g / gains.noise_w).log2();
        let excess = l.rate_bps - exact;
        if excess > 0.0 {
            out.links[ix].rate_bps = exact;
            reduce_injection(&mut out, l.from, excess, depth_cap)?;
            reduce_forwarding(&mut out, l.to, excess, depth_cap)?;
        }
    }
    out.links
        .retain(|l| l.power_w > 1e-12 || l.rate_bps > 1e-9);
    out.min_rate_bps = out
        .injected_bps
        .values()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !out.min_rate_bps.is_finite() {
        out.min_rate_bps = 0.0;
    }
    out.pre_repair_min_rate_bps = plan.min_rate_bps.min(plan.pre_repair_min_rate_bps);
    Ok(out)
}

fn reduce_injection(
    plan: &mut Plan,
    tower: usize,
    amount_bps: f64,
    depth_left: usize,
) -> Result<(), RepairError> {
    if depth_left == 0 {
        return Err(RepairError::CascadeDepth);
    }
    let inj = plan.injected_bps.entry(tower).or_insert(0.0);
    *inj -= amount_bps;
    if *inj >= 0.0 {
        return Ok(());
    }
    let mut residual = -*inj;
    *inj = 0.0;
    loop {
        if residual <= 1e-9 {
            return Ok(());
        }
        let Some(ix) = plan
            .links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.to == tower && l.rate_bps > 0.0)
            .max_by(|(_, a), (_, b)| {
                a.rate_bps
                    .total_cmp(&b.rate_bps)
                    .then_with(|| (b.from, b.channel).cmp(&(a.from, a.channel)))
            })
            .map(|(ix, _)| ix)
        else {
            return Err(RepairError::Unabsorbed {
                tower,
                residual_bps: residual,
            });
        };
        let cut = residual.min(plan.links[ix].rate_bps);
        plan.links[ix].rate_bps -= cut;
        let upstream = plan.links[ix].from;
        reduce_injection(plan, upstream, cut, depth_left - 1)?;
        residual -= cut;
    }
}

fn reduce_forwarding(
    plan: &mut Plan,
    tower: usize,
    amount_bps: f64,
    depth_left: usize,
) -> Result<(), RepairError> {
    if depth_left == 0 {
        return Err(RepairError::CascadeDepth);
    }
    if !plan.injected_bps.contains_key(&tower) {
        return Ok(());
    }
    let mut residual = amount_bps;
    loop {
        if residual <= 1e-9 {
            return Ok(());
        }
        let Some(ix) = plan
            .links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.from == tower && l.rate_bps > 0.0)
            .max_by(|(_, a), (_, b)| {
                a.rate_bps
                    .total_cmp(&b.rate_bps)
                    .then_with(|| (b.to, b.channel).cmp(&(a.to, a.channel)))
            })
            .map(|(ix, _)| ix)
        else {
            return Err(RepairError::Unabsorbed {
                tower,
                residual_bps: residual,
            });
        };
        let cut = residual.min(plan.links[ix].rate_bps);
        plan.links[ix].rate_bps -= cut;
        let downstream = plan.links[ix].to;
        reduce_forwarding(plan, downstream, cut, depth_left - 1)?;
        residual -= cut;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyCheck {
    pub name: &'static str,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub families: Vec<FamilyCheck>,
    pub pass: bool,
    pub min_rate_bps: f64,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn family(&self, name: &str) -> Option<&FamilyCheck> {
        self.families.iter().find(|f| f.name == name)
    }
}

/// Checks a finished plan against the physical constraints: power budgets,
/// silent fiber towers, half-duplex scheduling, exact link capacities, flow
/// conservation, network balance, receiver protection, and nonnegativity.
pub fn verify_plan(
    plan: &Plan,
    net: &Network,
    gains: &LinkGainTable,
    cfg: &ScenarioConfig,
) -> ValidationReport {
    let mut families = Vec::new();
    let mut check = |name: &'static str, worst: f64, tol: f64| {
        families.push(FamilyCheck {
            name,
            worst_violation: worst,
            tolerance: tol,
            pass: worst <= tol,
        });
    };

    let mut worst = 0f64;
    for &i in &net.non_fiber_ids() {
        worst = worst.max(plan.total_power_w(i) - gains.pmax_w);
    }
    check("power_budget", worst, 1e-9);

    let worst = plan
        .links
        .iter()
        .filter(|l| net.is_fiber(l.from))
        .map(|l| l.power_w)
        .fold(0.0, f64::max);
    check("fiber_silent", worst, 0.0);

    let mut worst = 0f64;
    for k in 1..=net.len() {
        for m in 0..net.channels_mhz.len() {
            let uses = plan
                .links
                .iter()
                .filter(|l| l.channel == m && (l.from == k || l.to == k))
                .count();
            worst = worst.max(uses.saturating_sub(1) as f64);
        }
    }
    check("half_duplex", worst, 0.0);

    let mut worst = 0f64;
    for l in &plan.links {
        let g = gains.gain_linear(l.from, l.to, l.channel);
        let exact =
            gains.channel_bw_hz * (1.0 + l.power_w * g / gains.noise_w).log2();
        worst = worst.max(l.rate_bps - exact);
    }
    check("capacity", worst, 1.0);

    let mut worst = 0f64;
    for &i in &net.non_fiber_ids() {
        let out: f64 = plan
            .links
            .iter()
            .filter(|l| l.from == i)
            .map(|l| l.rate_bps)
            .sum();
        let inbound: f64 = plan
            .links
            .iter()
            .filter(|l| l.to == i)
            .map(|l| l.rate_bps)
            .sum();
        let inj = plan.injected_bps.get(&i).copied().unwrap_or(0.0);
        worst = worst.max((out - inbound - inj).abs());
    }
    check("flow_conservation", worst, 1.0);

    let into_fiber: f64 = plan
        .links
        .iter()
        .filter(|l| net.is_fiber(l.to))
        .map(|l| l.rate_bps)
        .sum();
    let injected: f64 = plan.injected_bps.values().sum();
    check("network_balance", (into_fiber - injected).abs(), 1.0);

    let thr = cfg.interference_threshold_w();
    let mut worst = 0f64;
    for l in &plan.links {
        for other in &plan.links {
            if other.channel != l.channel || other.from == l.from || other.from == l.to {
                continue;
            }
            let received = other.power_w * gains.gain_linear(other.from, l.to, l.channel);
            worst = worst.max(received - thr);
        }
    }
    check("interference", worst, 1e-15);

    let mut worst = 0f64;
    for l in &plan.links {
        worst = worst.max(-l.power_w).max(-l.rate_bps);
    }
    for inj in plan.injected_bps.values() {
        worst = worst.max(-inj);
    }
    check("nonnegativity", worst, 0.0);

    let pass = families.iter().all(|f| f.pass);
    ValidationReport {
        families,
        pass,
        min_rate_bps: plan.min_rate_bps,
    }
}
