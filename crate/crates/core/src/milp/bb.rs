//! Branch and bound over the LP relaxation. Best-bound node selection with
//! depth-first plunging, most-fractional branching, and conflict
//! propagation on packing rows. Warm-started dual simplex reoptimizes each
//! node after bound tightening.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::lp::{LpError, LpProblem, LpStatus, RowId, SimplexSolver, VarId, INT_TOL};

#[derive(Clone, Debug)]
pub struct BbOptions {
    /// Relative gap at which a node is not worth expanding.
    pub gap: f64,
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Known objective no node needs to beat; nodes bounded at or below
    /// are pruned from the start.
    pub cutoff: Option<f64>,
    /// Stop as soon as an incumbent reaches this objective.
    pub target: Option<f64>,
    pub workers: usize,
    pub log: bool,
    /// Feasible starting point (objective, values) if one is known.
    pub initial: Option<(f64, Vec<f64>)>,
}

impl Default for BbOptions {
    fn default() -> Self {
        BbOptions {
            gap: 1e-6,
            node_limit: None,
            time_limit: None,
            cutoff: None,
            target: None,
            workers: 1,
            log: false,
            initial: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BbStatus {
    Optimal,
    /// A limit stopped the search after at least one incumbent was found.
    LimitFeasible,
    /// A limit stopped the search before any integer point was found.
    LimitNoSolution,
    Infeasible,
    /// The target objective was reached.
    TargetReached,
}

#[derive(Clone, Debug)]
pub struct BbOutcome {
    pub status: BbStatus,
    /// Incumbent objective in the problem's own sense; meaningless when no
    /// incumbent exists.
    pub objective: f64,
    /// Best remaining relaxation bound in the problem's own sense.
    pub bound: f64,
    pub nodes: usize,
    pub values: Vec<f64>,
    pub log: String,
}

struct HeapNode {
    /// Parent relaxation objective, sign-flipped so larger is better.
    score: f64,
    seq: u64,
    depth: usize,
    fixings: Vec<(usize, bool)>,
}

impl PartialEq for HeapNode {
    fn eq(&self, other: &Self) -> bool {
        self.score == other.score && self.seq == other.seq
    }
}
impl Eq for HeapNode {}
impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapNode {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then(self.seq.cmp(&other.seq))
    }
}

struct Shared {
    heap: BinaryHeap<HeapNode>,
    inc_score: Option<f64>,
    inc_values: Vec<f64>,
    nodes: usize,
    seq: u64,
    active: usize,
    /// Relaxation scores of nodes currently being dived on.
    dive_scores: Vec<Option<f64>>,
    halt: Option<BbStatus>,
    log: String,
    error: Option<LpError>,
}

struct Search<'a> {
    lp: &'a LpProblem,
    opts: &'a BbOptions,
    sign: f64,
    int_vars: Vec<usize>,
    orig_bounds: Vec<(f64, f64)>,
    cliques: Vec<Vec<usize>>,
    var_cliques: Vec<Vec<usize>>,
    started: Instant,
    state: Mutex<Shared>,
    wake: Condvar,
}

pub fn solve_bb(lp: &LpProblem, opts: &BbOptions) -> Result<BbOutcome, LpError> {
    let sign = if lp.maximize { 1.0 } else { -1.0 };
    let int_vars: Vec<usize> = (0..lp.num_vars())
        .filter(|&j| lp.var(VarId(j)).integer)
        .collect();
    let orig_bounds: Vec<(f64, f64)> = (0..lp.num_vars())
        .map(|j| (lp.var(VarId(j)).lb, lp.var(VarId(j)).ub))
        .collect();
    let (cliques, var_cliques) = detect_cliques(lp);

    let workers = opts.workers.max(1);
    let mut shared = Shared {
        heap: BinaryHeap::new(),
        inc_score: None,
        inc_values: Vec::new(),
        nodes: 0,
        seq: 0,
        active: 0,
        dive_scores: vec![None; workers],
        halt: None,
        log: String::new(),
        error: None,
    };

    if let Some((_, vals)) = &opts.initial {
        if vals.len() == lp.num_vars()
            && lp.max_violation(vals) <= 1e-4
            && int_vars
                .iter()
                .all(|&j| (vals[j] - vals[j].round()).abs() <= INT_TOL)
        {
            let score = sign * lp.objective_value(vals);
            shared.inc_score = Some(score);
            shared.inc_values = vals.clone();
            if let Some(tgt) = opts.target {
                if score >= sign * tgt - 1e-12 {
                    shared.halt = Some(BbStatus::TargetReached);
                }
            }
            if opts.log {
                shared
                    .log
                    .push_str(&format!("start: injected incumbent {:.6e}\n", sign * score));
            }
        } else if opts.log {
            shared
                .log
                .push_str("start: supplied incumbent failed verification, ignored\n");
        }
    }

    shared.heap.push(HeapNode {
        score: f64::INFINITY,
        seq: 0,
        depth: 0,
        fixings: Vec::new(),
    });
    shared.seq = 1;

    let search = Search {
        lp,
        opts,
        sign,
        int_vars,
        orig_bounds,
        cliques,
        var_cliques,
        started: Instant::now(),
        state: Mutex::new(shared),
        wake: Condvar::new(),
    };

    if workers == 1 {
        worker_loop(&search, 0);
    } else {
        std::thread::scope(|scope| {
            for w in 0..workers {
                let s = &search;
                scope.spawn(move || worker_loop(s, w));
            }
        });
    }

    let shared = search.state.into_inner().unwrap();
    if let Some(err) = shared.error {
        return Err(err);
    }

    let have_inc = shared.inc_score.is_some();
    let status = match shared.halt {
        Some(s) => s,
        None if have_inc => BbStatus::Optimal,
        None => BbStatus::Infeasible,
    };
    let inc_score = shared.inc_score.unwrap_or(f64::NEG_INFINITY);
    let frontier = shared
        .heap
        .iter()
        .map(|n| n.score)
        .fold(f64::NEG_INFINITY, f64::max);
    let bound_score = match status {
        BbStatus::Optimal | BbStatus::TargetReached => inc_score.max(frontier),
        BbStatus::Infeasible => f64::NEG_INFINITY,
        _ => frontier.max(inc_score),
    };
    Ok(BbOutcome {
        status,
        objective: sign * inc_score,
        bound: sign * bound_score,
        nodes: shared.nodes,
        values: shared.inc_values,
        log: shared.log,
    })
}

/// Packing rows (sum of distinct binaries <= 1) give conflict cliques:
/// fixing one member to 1 forces the rest to 0.
fn detect_cliques(lp: &LpProblem) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut cliques = Vec::new();
    let mut var_cliques = vec![Vec::new(); lp.num_vars()];
    for i in 0..lp.num_rows() {
        let row = lp.row(RowId(i));
        if !matches!(row.sense, crate::lp::Sense::Le) || (row.rhs - 1.0).abs() > 1e-12 {
            continue;
        }
        if row.terms.len() < 2 {
            continue;
        }
        let all_binary = row.terms.iter().all(|&(v, c)| {
            let var = lp.var(v);
            (c - 1.0).abs() <= 1e-12 && var.integer && var.lb >= -1e-12 && var.ub <= 1.0 + 1e-12
        });
        if !all_binary {
            continue;
        }
        let id = cliques.len();
        let members: Vec<usize> = row.terms.iter().map(|&(v, _)| v.0).collect();
        for &j in &members {
            var_cliques[j].push(id);
        }
        cliques.push(members);
    }
    (cliques, var_cliques)
}

fn worker_loop(s: &Search<'_>, worker: usize) {
    let mut solver = SimplexSolver::new(s.lp);
    let mut guard = s.state.lock().unwrap();
    loop {
        if guard.halt.is_some() || guard.error.is_some() {
            break;
        }
        if let Some(limit) = s.opts.node_limit {
            if guard.nodes >= limit {
                guard.halt = Some(if guard.inc_score.is_some() {
                    BbStatus::LimitFeasible
                } else {
                    BbStatus::LimitNoSolution
                });
                break;
            }
        }
        if let Some(tl) = s.opts.time_limit {
            if s.started.elapsed() >= tl {
                guard.halt = Some(if guard.inc_score.is_some() {
                    BbStatus::LimitFeasible
                } else {
                    BbStatus::LimitNoSolution
                });
                break;
            }
        }
        let node = match guard.heap.pop() {
            Some(n) => {
                if prune_score(s, &guard, n.score) {
                    guard.heap.clear();
                    continue;
                }
                n
            }
            None => {
                if guard.active == 0 {
                    break;
                }
                guard = s.wake.wait(guard).unwrap();
                continue;
            }
        };
        guard.active += 1;
        guard.dive_scores[worker] = Some(node.score);
        drop(guard);

        let res = dive(s, worker, &mut solver, node);

        guard = s.state.lock().unwrap();
        guard.active -= 1;
        guard.dive_scores[worker] = None;
        if let Err(e) = res {
            if guard.error.is_none() {
                guard.error = Some(e);
            }
        }
        s.wake.notify_all();
    }
    drop(guard);
    s.wake.notify_all();
}

/// Processes a node and keeps descending into the preferred child until the
/// chain is pruned, integral, or infeasible. Siblings go on the heap.
fn dive(
    s: &Search<'_>,
    worker: usize,
    solver: &mut SimplexSolver,
    mut node: HeapNode,
) -> Result<(), LpError> {
    loop {
        let lp_result = solve_node(s, solver, &node.fixings)?;
        let (score, values) = {
            let mut guard = s.state.lock().unwrap();
            guard.nodes += 1;
            if s.opts.log && guard.nodes % 1000 == 0 {
                let line = format!(
                    "node {}: depth {} open {} incumbent {:?}\n",
                    guard.nodes,
                    node.depth,
                    guard.heap.len(),
                    guard.inc_score.map(|v| s.sign * v)
                );
                guard.log.push_str(&line);
            }
            match lp_result {
                None => return Ok(()),
                Some((score, values)) => {
                    if prune_score(s, &guard, score) {
                        return Ok(());
                    }
                    guard.dive_scores[worker] = Some(score);
                    (score, values)
                }
            }
        };

        let branch_var = most_fractional(&s.int_vars, &values);
        let Some((j, frac)) = branch_var else {
            let mut guard = s.state.lock().unwrap();
            if guard.inc_score.map_or(true, |best| score > best) {
                guard.inc_score = Some(score);
                guard.inc_values = values;
                if s.opts.log {
                    let line =
                        format!("node {}: incumbent {:.6e}\n", guard.nodes, s.sign * score);
                    guard.log.push_str(&line);
                }
                if let Some(tgt) = s.opts.target {
                    if score >= s.sign * tgt - 1e-12 {
                        guard.halt = Some(BbStatus::TargetReached);
                    }
                }
            }
            s.wake.notify_all();
            return Ok(());
        };

        let up_first = frac >= 0.5;
        let preferred = child_fixings(s, &node.fixings, j, up_first);
        let other = child_fixings(s, &node.fixings, j, !up_first);

        {
            let mut guard = s.state.lock().unwrap();
            if guard.halt.is_some() || guard.error.is_some() {
                return Ok(());
            }
            if let Some(fix) = other {
                let seq = guard.seq;
                guard.seq += 1;
                guard.heap.push(HeapNode {
                    score,
                    seq,
                    depth: node.depth + 1,
                    fixings: fix,
                });
                s.wake.notify_all();
            }
            match preferred {
                Some(fix) => {
                    node = HeapNode {
                        score,
                        seq: 0,
                        depth: node.depth + 1,
                        fixings: fix,
                    };
                }
                None => return Ok(()),
            }
            if let Some(limit) = s.opts.node_limit {
                if guard.nodes >= limit {
                    return Ok(());
                }
            }
            if let Some(tl) = s.opts.time_limit {
                if s.started.elapsed() >= tl {
                    return Ok(());
                }
            }
        }
    }
}

fn prune_score(s: &Search<'_>, guard: &Shared, score: f64) -> bool {
    let threshold = match (guard.inc_score, s.opts.cutoff) {
        (Some(inc), Some(cut)) => inc.max(s.sign * cut),
        (Some(inc), None) => inc,
        (None, Some(cut)) => s.sign * cut,
        (None, None) => return false,
    };
    score <= threshold + s.opts.gap * threshold.abs().max(1.0)
}

/// Extends the fixings with var j set to `up`, propagating packing-row
/// conflicts. None means the child is infeasible outright.
fn child_fixings(
    s: &Search<'_>,
    parent: &[(usize, bool)],
    j: usize,
    up: bool,
) -> Option<Vec<(usize, bool)>> {
    let mut fix = parent.to_vec();
    fix.push((j, up));
    if up {
        for &c in &s.var_cliques[j] {
            for &other in &s.cliques[c] {
                if other == j {
                    continue;
                }
                match parent.iter().find(|&&(v, _)| v == other) {
                    Some(&(_, true)) => return None,
                    Some(&(_, false)) => {}
                    None => {
                        if !fix.iter().any(|&(v, _)| v == other) {
                            fix.push((other, false));
                        }
                    }
                }
            }
        }
    }
    Some(fix)
}

fn most_fractional(int_vars: &[usize], values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for &j in int_vars {
        let v = values[j];
        let frac = v - v.floor();
        let dist = (frac - 0.5).abs();
        if (v - v.round()).abs() <= INT_TOL {
            continue;
        }
        match best {
            Some((_, _, d)) if dist >= d => {}
            _ => best = Some((j, frac, dist)),
        }
    }
    best.map(|(j, f, _)| (j, f))
}

/// Applies the node bounds and reoptimizes; retries once from scratch on a
/// numerical failure. Returns None when the node LP is infeasible.
fn solve_node(
    s: &Search<'_>,
    solver: &mut SimplexSolver,
    fixings: &[(usize, bool)],
) -> Result<Option<(f64, Vec<f64>)>, LpError> {
    apply_fixings(s, solver, fixings);
    let status = match solver.solve() {
        Ok(st) => st,
        Err(_) => {
            *solver = SimplexSolver::new(s.lp);
            apply_fixings(s, solver, fixings);
            solver.solve()?
        }
    };
    match status {
        LpStatus::Optimal => Ok(Some((s.sign * solver.objective(), solver.values()))),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(LpError::Invalid(
            "relaxation is unbounded; the integer program has no finite optimum".into(),
        )),
    }
}

fn apply_fixings(s: &Search<'_>, solver: &mut SimplexSolver, fixings: &[(usize, bool)]) {
    for &j in &s.int_vars {
        let (lb, ub) = s.orig_bounds[j];
        solver.set_var_bounds(VarId(j), lb, ub);
    }
    for &(j, up) in fixings {
        let v = if up { 1.0 } else { 0.0 };
        solver.set_var_bounds(VarId(j), v, v);
    }
}
