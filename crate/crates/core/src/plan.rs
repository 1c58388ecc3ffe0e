//! A deployable plan: which links transmit, on which channel, at what
//! power, and how much traffic each tower injects. Extracted from a solved
//! variable vector and carried through repair and validation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::milp::MilpProblem;
use crate::model::Network;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PlanLink {
    pub from: usize,
    pub to: usize,
    /// Channel index into the scenario's channel list.
    pub channel: usize,
    pub channel_mhz: f64,
    pub power_w: f64,
    pub rate_bps: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Plan {
    pub links: Vec<PlanLink>,
    /// Injected rate per non-fiber tower id.
    pub injected_bps: BTreeMap<usize, f64>,
    pub min_rate_bps: f64,
    /// Minimum injected rate the solver claimed before rates were clamped
    /// to exact link capacities.
    pub pre_repair_min_rate_bps: f64,
}

const POWER_FLOOR_W: f64 = 1e-12;

impl Plan {
    /// Reads a plan out of a raw solution vector in the given program's
    /// variable layout. Scheduled links are kept even at zero power: the
    /// linearization lets them claim a little rate for free, and dropping
    /// them here would leave that rate orphaned in the flow balance. Repair
    /// clamps them to zero and strips them.
    pub fn from_values(prob: &MilpProblem, net: &Network, values: &[f64]) -> Plan {
        let mut links = Vec::new();
        for (&(i, j, m), &pv) in &prob.p {
            let p = values[pv.0];
            let scheduled = values[prob.x[&(i, j, m)].0] > 0.5;
            if p <= POWER_FLOOR_W && !scheduled {
                continue;
            }
            links.push(PlanLink {
                from: i,
                to: j,
                channel: m,
                channel_mhz: net.channels_mhz[m],
                power_w: p.max(0.0),
                rate_bps: values[prob.r[&(i, j, m)].0].max(0.0),
            });
        }
        let injected_bps: BTreeMap<usize, f64> = prob
            .r_inj
            .iter()
            .map(|(&tower, &v)| (tower, values[v.0].max(0.0)))
            .collect();
        let min_rate_bps = injected_bps
            .values()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let min_rate_bps = if min_rate_bps.is_finite() {
            min_rate_bps
        } else {
            0.0
        };
        Plan {
            links,
            injected_bps,
            min_rate_bps,
            pre_repair_min_rate_bps: min_rate_bps,
        }
    }

    pub fn total_power_w(&self, tower: usize) -> f64 {
        self.links
            .iter()
            .filter(|l| l.from == tower)
            .map(|l| l.power_w)
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}
