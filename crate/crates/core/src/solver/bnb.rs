//! LP-based branch-and-bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::model::{MilpModel, ModelError};
use super::simplex::{Basis, Engine, LpData, LpStatus};
use super::SolveOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
    TimeLimit,
    IterationLimit,
}

impl MilpStatus {
    /// Whether the search stopped on a limit rather than proving anything.
    pub fn hit_limit(self) -> bool {
        matches!(self, Self::NodeLimit | Self::TimeLimit | Self::IterationLimit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Incumbent objective, `+inf` when none was found.
    pub objective: f64,
    /// Incumbent values, empty when none was found.
    pub values: Vec<f64>,
    /// Proven lower bound on the optimum.
    pub best_bound: f64,
    pub root_bound: f64,
    /// Branch-and-bound nodes solved below the root.
    pub explored_nodes: usize,
    pub lp_iterations: usize,
}

impl MilpSolution {
    pub fn has_incumbent(&self) -> bool {
        !self.values.is_empty()
    }
}

struct Node {
    bound: f64,
    seq: usize,
    changes: Vec<(usize, f64, f64)>,
    basis: Rc<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Reversed so the max-heap pops the smallest bound, then the oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

/// Solve `model` to optimality (within `opts.relative_mip_gap`) or until a
/// limit is reached.
/// Nodes between rounding attempts.
const HEURISTIC_EVERY: usize = 16;

/// Nodes between diving attempts.
const DIVE_EVERY: usize = 64;

/// Fractional parts above which a rounding attempt rounds up, tried in turn.
const ROUNDING_THRESHOLDS: [f64; 3] = [1e-3, 0.1, 0.5];

/// Fix every integer column at `guess` (clamped to its current bounds), solve
/// the remaining LP and restore the bounds. Returns the objective and point
/// if the result is feasible within `tol`.
fn fix_and_solve(
    engine: &mut Engine,
    model: &MilpModel,
    ints: &[usize],
    guess: &[f64],
    tol: f64,
) -> Option<(f64, Vec<f64>)> {
    let saved: Vec<(f64, f64)> = ints.iter().map(|&k| (engine.lower[k], engine.upper[k])).collect();
    for (&k, &(lo, hi)) in ints.iter().zip(&saved) {
        let v = guess[k].clamp(lo, hi);
        engine.set_bounds(k, v, v);
    }
    let mut found = None;
    if engine.solve() == LpStatus::Optimal {
        let mut y = engine.values();
        for &k in ints {
            y[k] = y[k].round();
        }
        if model.max_violation(&y).0 <= tol {
            found = Some((model.objective_value(&y), y));
        }
    }
    for (&k, &(lo, hi)) in ints.iter().zip(&saved) {
        engine.set_bounds(k, lo, hi);
    }
    found
}

/// Fractional diving: repeatedly fix the fractional integer column closest
/// to an integer at its nearest value (the other side on infeasibility) and
/// re-solve, until the LP point is integral. Bounds are restored on return.
fn dive(
    engine: &mut Engine,
    model: &MilpModel,
    ints: &[usize],
    opts: &SolveOptions,
    cutoff: f64,
) -> Option<(f64, Vec<f64>)> {
    let saved: Vec<(f64, f64)> = ints.iter().map(|&k| (engine.lower[k], engine.upper[k])).collect();
    let tol = 10.0 * opts.feasibility_tol;
    let mut found = None;
    for _ in 0..=ints.len() {
        let x = engine.values();
        let mut pick: Option<(usize, f64)> = None;
        let mut closest = f64::INFINITY;
        for &k in ints {
            let f = x[k] - x[k].floor();
            let dist = f.min(1.0 - f);
            if dist > opts.integrality_tol && dist < closest {
                closest = dist;
                pick = Some((k, x[k]));
            }
        }
        let Some((j, v)) = pick else {
            let mut y = x;
            for &k in ints {
                y[k] = y[k].round();
            }
            found = if model.max_violation(&y).0 <= tol {
                Some((model.objective_value(&y), y))
            } else {
                fix_and_solve(engine, model, ints, &y, tol)
            };
            break;
        };
        let near = v.round();
        let far = if near > v { near - 1.0 } else { near + 1.0 };
        let (lo, hi) = (engine.lower[j], engine.upper[j]);
        let mut ok = false;
        for r in [near, far] {
            if r < lo || r > hi {
                continue;
            }
            engine.set_bounds(j, r, r);
            if engine.solve() == LpStatus::Optimal && engine.objective() < cutoff {
                ok = true;
                break;
            }
        }
        if !ok {
            engine.set_bounds(j, lo, hi);
            break;
        }
    }
    for (&k, &(lo, hi)) in ints.iter().zip(&saved) {
        engine.set_bounds(k, lo, hi);
    }
    found
}

pub fn solve_milp(model: &MilpModel, opts: &SolveOptions) -> Result<MilpSolution, ModelError> {
    model.check()?;
    let start = Instant::now();
    let lp = LpData::new(model);
    let mut engine = Engine::new(&lp, opts);
    let ints = model.integer_columns();

    let mut root_lo: Vec<f64> = model.columns.iter().map(|c| c.lower).collect();
    let mut root_hi: Vec<f64> = model.columns.iter().map(|c| c.upper).collect();
    let mut result = MilpSolution {
        status: MilpStatus::Infeasible,
        objective: f64::INFINITY,
        values: Vec::new(),
        best_bound: f64::INFINITY,
        root_bound: f64::INFINITY,
        explored_nodes: 0,
        lp_iterations: 0,
    };
    for &j in &ints {
        root_lo[j] = (root_lo[j] - opts.integrality_tol).ceil();
        root_hi[j] = (root_hi[j] + opts.integrality_tol).floor();
        if root_lo[j] > root_hi[j] {
            return Ok(result);
        }
        engine.set_bounds(j, root_lo[j], root_hi[j]);
    }

    let cutoff = |inc: f64| inc - opts.relative_mip_gap * inc.abs().max(1.0);
    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut seq = 0usize;
    let mut changed: Vec<usize> = Vec::new();
    let mut plunge: Option<Node> = Some(Node {
        bound: f64::NEG_INFINITY,
        seq,
        changes: Vec::new(),
        basis: Rc::new(engine.basis()),
    });
    let mut is_root = true;
    let mut limit: Option<MilpStatus> = None;

    loop {
        let node = match plunge.take() {
            Some(nd) => nd,
            None => match heap.pop() {
                Some(nd) => nd,
                None => break,
            },
        };
        if node.bound >= cutoff(result.objective) {
            continue;
        }
        if !is_root {
            if opts.node_limit.is_some_and(|l| result.explored_nodes >= l) {
                heap.push(node);
                limit = Some(MilpStatus::NodeLimit);
                break;
            }
            if opts.time_limit.is_some_and(|t| start.elapsed().as_secs_f64() >= t) {
                heap.push(node);
                limit = Some(MilpStatus::TimeLimit);
                break;
            }
            result.explored_nodes += 1;
        }

        for &j in &changed {
            engine.set_bounds(j, root_lo[j], root_hi[j]);
        }
        changed.clear();
        for &(j, lo, hi) in &node.changes {
            engine.set_bounds(j, lo, hi);
            changed.push(j);
        }
        if !is_root {
            engine.load_basis(&node.basis);
        }
        let status = engine.solve();
        let was_root = is_root;
        is_root = false;
        match status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if was_root {
                    result.status = MilpStatus::Unbounded;
                    result.best_bound = f64::NEG_INFINITY;
                    result.root_bound = f64::NEG_INFINITY;
                    result.lp_iterations = engine.iterations;
                    return Ok(result);
                }
                continue;
            }
            LpStatus::IterationLimit => {
                heap.push(node);
                limit = Some(MilpStatus::IterationLimit);
                break;
            }
            LpStatus::Optimal => {}
        }
        let obj = engine.objective();
        if was_root {
            result.root_bound = obj;
        }
        if obj >= cutoff(result.objective) {
            continue;
        }

        let mut branch: Option<(usize, f64)> = None;
        let mut best = (0u32, opts.integrality_tol);
        for &j in &ints {
            let v = engine.value(j);
            let f = v - v.floor();
            let dist = f.min(1.0 - f);
            if dist <= opts.integrality_tol {
                continue;
            }
            let key = (model.columns[j].priority, dist);
            if branch.is_none() || key.0 > best.0 || (key.0 == best.0 && key.1 > best.1) {
                best = key;
                branch = Some((j, v));
            }
        }

        let Some((j, v)) = branch else {
            let mut x = engine.values();
            for &k in &ints {
                x[k] = x[k].round();
            }
            let tol = 10.0 * opts.feasibility_tol;
            if model.max_violation(&x).0 <= tol {
                let val = model.objective_value(&x);
                if val < result.objective {
                    result.objective = val;
                    result.values = x;
                }
                continue;
            }
            if let Some((val, y)) = fix_and_solve(&mut engine, model, &ints, &x, tol) {
                if val < result.objective {
                    result.objective = val;
                    result.values = y;
                }
            }
            continue;
        };

        let basis = Rc::new(engine.basis());
        if was_root || result.explored_nodes % HEURISTIC_EVERY == 0 {
            let tol = 10.0 * opts.feasibility_tol;
            let x = engine.values();
            let mut found = None;
            for t in ROUNDING_THRESHOLDS {
                let guess: Vec<f64> = x.iter().map(|v| (v - t).ceil()).collect();
                found = fix_and_solve(&mut engine, model, &ints, &guess, tol);
                if found.is_some() {
                    break;
                }
            }
            if let Some((val, y)) = found {
                if val < result.objective {
                    result.objective = val;
                    result.values = y;
                }
            }
            if was_root || result.explored_nodes % DIVE_EVERY == 0 {
                if let Some((val, y)) = dive(&mut engine, model, &ints, opts, cutoff(result.objective)) {
                    if val < result.objective {
                        result.objective = val;
                        result.values = y;
                    }
                }
            }
            if obj >= cutoff(result.objective) {
                continue;
            }
        }
        let (lo, hi) = (engine.lower[j], engine.upper[j]);
        let mut down = node.changes.clone();
        down.push((j, lo, v.floor()));
        let mut up = node.changes;
        up.push((j, v.ceil(), hi));
        seq += 1;
        let down = Node {
            bound: obj,
            seq,
            changes: down,
            basis: basis.clone(),
        };
        seq += 1;
        let up = Node {
            bound: obj,
            seq,
            changes: up,
            basis,
        };
        let (first, second) = if v - v.floor() >= 0.5 { (up, down) } else { (down, up) };
        plunge = Some(first);
        heap.push(second);
    }

    // Incumbents are accepted with a loose tolerance after rounding, so
    // continuous columns can carry residue tied to integers rounded to zero.
    // Re-solve with the integers fixed to get a clean point.
    let accepted = result.objective;
    if result.has_incumbent() {
        for &j in &ints {
            engine.set_bounds(j, root_lo[j], root_hi[j]);
        }
        if let Some((val, y)) = fix_and_solve(&mut engine, model, &ints, &result.values, opts.feasibility_tol) {
            result.objective = val;
            result.values = y;
        }
    }

    result.lp_iterations = engine.iterations;
    let open_bound = heap
        .iter()
        .map(|nd| nd.bound)
        .chain(plunge.iter().map(|nd| nd.bound))
        .fold(f64::INFINITY, f64::min);
    match limit {
        Some(status) => {
            result.status = status;
            result.best_bound = open_bound.min(accepted);
            if result.root_bound == f64::INFINITY && !result.has_incumbent() {
                result.best_bound = f64::NEG_INFINITY;
            }
        }
        None => {
            if result.has_incumbent() {
                result.status = MilpStatus::Optimal;
                result.best_bound = accepted.min(result.objective);
            }
        }
    }
    Ok(result)
}
