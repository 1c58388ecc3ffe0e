//! Construction heuristic: give every channel to a single tower, point that
//! tower at its best fiber site, and waterfill each tower's power budget
//! across the channels it owns. One transmitter per channel means no
//! co-channel interference and no relaying, so the resulting rates are
//! feasible for the full program and make a usable starting incumbent.

use std::collections::BTreeMap;

use crate::model::{candidate_links, Network};
use crate::propagation::LinkGainTable;

use super::MilpProblem;

#[derive(Clone, Copy, Debug)]
pub struct DirectLink {
    pub from: usize,
    pub to: usize,
    pub channel: usize,
    pub power_w: f64,
    pub rate_bps: f64,
}

#[derive(Clone, Debug)]
pub struct DirectPlan {
    /// Channel index to owning tower id; None when no tower can reach fiber
    /// on that channel.
    pub assignment: Vec<Option<usize>>,
    pub links: Vec<DirectLink>,
    pub rates_bps: BTreeMap<usize, f64>,
    pub min_rate_bps: f64,
}

const EXHAUSTIVE_LIMIT: u64 = 2_000_000;
const LOCAL_SEARCH_STEPS: u64 = 10_000;

pub fn direct_plan(
    net: &Network,
    gains: &LinkGainTable,
    min_snr_db: Option<f64>,
    seed: u64,
) -> DirectPlan {
    let towers = net.non_fiber_ids();
    assert!(!towers.is_empty(), "nothing to plan when every tower has fiber");
    let n_ch = net.channels_mhz.len();
    let pairs = candidate_links(net, gains, min_snr_db);

    // Best fiber destination and the matching 1/alpha per tower and channel.
    let mut dest = vec![vec![None::<(usize, f64)>; n_ch]; towers.len()];
    for (ti, &k) in towers.iter().enumerate() {
        for m in 0..n_ch {
            for &(i, j) in &pairs {
                if i != k || !net.is_fiber(j) {
                    continue;
                }
                let g = gains.gain_linear(k, j, m);
                if dest[ti][m].map_or(true, |(_, bg)| g > bg) {
                    dest[ti][m] = Some((j, g));
                }
            }
        }
    }
    let inv_alpha = |ti: usize, m: usize| -> Option<f64> {
        dest[ti][m].map(|(_, g)| gains.noise_w / g)
    };

    let domains: Vec<Vec<usize>> = (0..n_ch)
        .map(|m| (0..towers.len()).filter(|&ti| dest[ti][m].is_some()).collect())
        .collect();

    let space: u64 = domains
        .iter()
        .map(|d| d.len().max(1) as u64)
        .try_fold(1u64, |acc, k| acc.checked_mul(k))
        .unwrap_or(u64::MAX);

    let assign = if space <= EXHAUSTIVE_LIMIT {
        exhaustive_assignment(&towers, &domains, n_ch, gains, &inv_alpha)
    } else {
        greedy_assignment(&towers, &domains, n_ch, gains, &inv_alpha, seed)
    };

    finish_plan(gains, &towers, &dest, assign)
}

fn tower_rate(budget_w: f64, w_hz: f64, invs: &[f64]) -> f64 {
    waterfill(budget_w, invs)
        .iter()
        .zip(invs)
        .map(|(&p, &inv)| w_hz * (1.0 + p / inv).log2())
        .sum()
}

/// Splits a power budget across channels with noise-to-gain ratios `invs`,
/// favoring the strongest channels; weak ones can end up unpowered.
fn waterfill(budget_w: f64, invs: &[f64]) -> Vec<f64> {
    let n = invs.len();
    if n == 0 || budget_w <= 0.0 {
        return vec![0.0; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| invs[a].total_cmp(&invs[b]));
    for k in (1..=n).rev() {
        let s: f64 = order[..k].iter().map(|&i| invs[i]).sum();
        let mu = (budget_w + s) / k as f64;
        if mu > invs[order[k - 1]] {
            let mut p = vec![0.0; n];
            for &i in &order[..k] {
                p[i] = mu - invs[i];
            }
            let total: f64 = p.iter().sum();
            if total > 0.0 {
                let f = budget_w / total;
                for v in &mut p {
                    *v *= f;
                }
            }
            return p;
        }
    }
    vec![0.0; n]
}

fn eval_assignment(
    towers: &[usize],
    assign: &[Option<usize>],
    gains: &LinkGainTable,
    inv_alpha: &dyn Fn(usize, usize) -> Option<f64>,
) -> (f64, f64) {
    let mut min_rate = f64::INFINITY;
    let mut total = 0.0;
    let mut invs = Vec::new();
    for ti in 0..towers.len() {
        invs.clear();
        for (m, owner) in assign.iter().enumerate() {
            if *owner == Some(ti) {
                invs.push(inv_alpha(ti, m).unwrap());
            }
        }
        let rate = tower_rate(gains.pmax_w, gains.channel_bw_hz, &invs);
        min_rate = min_rate.min(rate);
        total += rate;
    }
    (min_rate, total)
}

fn exhaustive_assignment(
    towers: &[usize],
    domains: &[Vec<usize>],
    n_ch: usize,
    gains: &LinkGainTable,
    inv_alpha: &dyn Fn(usize, usize) -> Option<f64>,
) -> Vec<Option<usize>> {
    let mut counter = vec![0usize; n_ch];
    let mut best: Option<(f64, f64, Vec<Option<usize>>)> = None;
    loop {
        let assign: Vec<Option<usize>> = (0..n_ch)
            .map(|m| domains[m].get(counter[m]).copied().or(None))
            .collect();
        let (min_rate, total) = eval_assignment(towers, &assign, gains, inv_alpha);
        let improves = match &best {
            None => true,
            Some((bm, bt, _)) => min_rate > *bm || (min_rate == *bm && total > *bt),
        };
        if improves {
            best = Some((min_rate, total, assign));
        }
        let mut m = n_ch;
        loop {
            if m == 0 {
                return best.unwrap().2;
            }
            m -= 1;
            counter[m] += 1;
            if counter[m] < domains[m].len().max(1) {
                break;
            }
            counter[m] = 0;
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn greedy_assignment(
    towers: &[usize],
    domains: &[Vec<usize>],
    n_ch: usize,
    gains: &LinkGainTable,
    inv_alpha: &dyn Fn(usize, usize) -> Option<f64>,
    seed: u64,
) -> Vec<Option<usize>> {
    let mut assign: Vec<Option<usize>> = vec![None; n_ch];
    let mut rates = vec![0.0f64; towers.len()];
    let owned_invs = |assign: &[Option<usize>], ti: usize| -> Vec<f64> {
        assign
            .iter()
            .enumerate()
            .filter(|&(_, o)| *o == Some(ti))
            .map(|(m, _)| inv_alpha(ti, m).unwrap())
            .collect()
    };
    for m in 0..n_ch {
        let Some(&ti) = domains[m]
            .iter()
            .min_by(|&&a, &&b| rates[a].total_cmp(&rates[b]).then(a.cmp(&b)))
        else {
            continue;
        };
        assign[m] = Some(ti);
        rates[ti] = tower_rate(gains.pmax_w, gains.channel_bw_hz, &owned_invs(&assign, ti));
    }

    let (mut best_min, mut best_total) = eval_assignment(towers, &assign, gains, inv_alpha);
    let mut rng = seed;
    for _ in 0..LOCAL_SEARCH_STEPS {
        let m = (splitmix64(&mut rng) % n_ch as u64) as usize;
        if domains[m].is_empty() {
            continue;
        }
        let pick = domains[m][(splitmix64(&mut rng) % domains[m].len() as u64) as usize];
        if assign[m] == Some(pick) {
            continue;
        }
        let old = assign[m];
        assign[m] = Some(pick);
        let (min_rate, total) = eval_assignment(towers, &assign, gains, inv_alpha);
        if min_rate > best_min || (min_rate == best_min && total > best_total) {
            best_min = min_rate;
            best_total = total;
        } else {
            assign[m] = old;
        }
    }
    assign
}

fn finish_plan(
    gains: &LinkGainTable,
    towers: &[usize],
    dest: &[Vec<Option<(usize, f64)>>],
    assign: Vec<Option<usize>>,
) -> DirectPlan {
    let mut links = Vec::new();
    let mut rates_bps: BTreeMap<usize, f64> = towers.iter().map(|&k| (k, 0.0)).collect();
    for (ti, &k) in towers.iter().enumerate() {
        let owned: Vec<usize> = assign
            .iter()
            .enumerate()
            .filter(|&(_, o)| *o == Some(ti))
            .map(|(m, _)| m)
            .collect();
        let invs: Vec<f64> = owned
            .iter()
            .map(|&m| gains.noise_w / dest[ti][m].unwrap().1)
            .collect();
        let powers = waterfill(gains.pmax_w, &invs);
        for ((&m, &inv), &p) in owned.iter().zip(&invs).zip(&powers) {
            if p <= 0.0 {
                continue;
            }
            let rate = gains.channel_bw_hz * (1.0 + p / inv).log2();
            links.push(DirectLink {
                from: k,
                to: dest[ti][m].unwrap().0,
                channel: m,
                power_w: p,
                rate_bps: rate,
            });
            *rates_bps.get_mut(&k).unwrap() += rate;
        }
    }
    let min_rate_bps = rates_bps.values().copied().fold(f64::INFINITY, f64::min);
    let assignment = assign
        .iter()
        .map(|o| o.map(|ti| towers[ti]))
        .collect();
    DirectPlan {
        assignment,
        links,
        rates_bps,
        min_rate_bps,
    }
}

impl DirectPlan {
    /// Expands the plan into a full variable vector for the given program,
    /// suitable as a starting incumbent.
    pub fn lp_values(&self, m: &MilpProblem) -> Vec<f64> {
        let mut vals = vec![0.0; m.lp.num_vars()];
        let mut injected: BTreeMap<usize, f64> = BTreeMap::new();
        for l in &self.links {
            let key = (l.from, l.to, l.channel);
            vals[m.x[&key].0] = 1.0;
            vals[m.p[&key].0] = l.power_w;
            vals[m.r[&key].0] = l.rate_bps;
            *injected.entry(l.from).or_insert(0.0) += l.rate_bps;
        }
        let mut t_val = f64::INFINITY;
        for (&tower, &var) in &m.r_inj {
            let r = injected.get(&tower).copied().unwrap_or(0.0);
            vals[var.0] = r;
            t_val = t_val.min(r);
        }
        if let Some(t) = m.t {
            vals[t.0] = if t_val.is_finite() { t_val } else { 0.0 };
        }
        vals
    }
}
