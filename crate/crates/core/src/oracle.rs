//! Exhaustive reference solvers for small instances.
//!
//! These are deliberately naive: they enumerate integral shipment splits over
//! explicit path lists and price each split directly. They are used to check
//! the MILP pipeline and are never called by it.

use serde::Serialize;
use thiserror::Error;

use crate::model::{BuildError, ModelParams, ScenarioData};
use crate::network::{enumerate_paths, Mode, Network, NetworkError, NodeKind, Path, PathSets};
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("search space of {size} assignments exceeds the cap of {cap}")]
    SearchSpaceTooLarge { size: f64, cap: f64 },
    #[error("{origin} -> {destination} has {count} paths, above the cap of {cap}")]
    TooManyPaths {
        origin: String,
        destination: String,
        count: usize,
        cap: usize,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Build(#[from] BuildError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub max_paths_per_od: usize,
    /// Upper bound on the product of per-demand split counts.
    pub max_assignments: f64,
    /// Filter factor of the path sets whose deadline rows the MILP carries.
    /// Routing itself may use any simple path.
    pub filter_factor: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_paths_per_od: 12,
            max_assignments: 5e6,
            filter_factor: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandAssignment {
    /// Index into the network's demand records.
    pub demand: usize,
    pub origin: String,
    pub destination: String,
    pub commodity: String,
    /// Paths with a positive shipment count.
    pub routes: Vec<(Path, u64)>,
    pub unmet: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub best_cost: f64,
    pub assignment: Vec<DemandAssignment>,
    /// Number of split combinations priced.
    pub explored: u64,
}

/// One admissible split of a single demand.
struct Split {
    counts: Vec<u64>,
    unmet: u64,
    cost: f64,
    /// Shipments per network link.
    link_load: Vec<(usize, f64)>,
    /// Net transferred shipments per terminal, in absolute value.
    terminal_load: Vec<(usize, f64)>,
}

struct DemandOptions {
    demand: usize,
    paths: Vec<Path>,
    options: Vec<Split>,
}

fn binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn compositions(total: u64, parts: usize, out: &mut Vec<Vec<u64>>, cur: &mut Vec<u64>) {
    if parts == 1 {
        cur.push(total);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    for n in (0..=total).rev() {
        cur.push(n);
        compositions(total - n, parts - 1, out, cur);
        cur.pop();
    }
}

/// Price one split of demand `k` across `paths` with the cheapest indicator
/// setting, or `None` if the split violates a per-demand rule.
fn price_split(
    net: &Network,
    k: usize,
    paths: &[Path],
    deadline_paths: &[Path],
    counts: &[u64],
    unmet: u64,
    sd: &ScenarioData,
    penalty: f64,
) -> Option<Split> {
    let dem = &net.demands()[k];
    let mut load = vec![0u64; net.links().len()];
    // Net highway shipments out of each node.
    let mut hw_net = vec![0i64; net.nodes().len()];
    for (p, &n) in paths.iter().zip(counts) {
        if n == 0 {
            continue;
        }
        for &l in &p.links {
            load[l] += n;
            if net.link(l).mode == Mode::Highway {
                let (u, v) = net.endpoints(l).expect("valid link");
                hw_net[u] += n as i64;
                hw_net[v] -= n as i64;
            }
        }
    }
    for (l, &n) in load.iter().enumerate() {
        if n > 0 && net.link(l).mode == Mode::Highway {
            if let Some(r) = net.reverse_link(l) {
                if net.link(r).mode == Mode::Highway && load[r] > 0 {
                    return None;
                }
            }
        }
    }
    let used_term = |s: usize| net.node(s).is_terminal() && hw_net[s] != 0;
    for p in deadline_paths {
        let mut lhs = 0.0;
        for &l in &p.links {
            if load[l] > 0 {
                lhs += sd.link_time[l];
            }
        }
        for &v in &p.nodes {
            if used_term(v) {
                lhs += sd.terminal_time[v];
            }
        }
        if lhs > dem.deadline + 1e-9 {
            return None;
        }
    }
    let mut cost = penalty * unmet as f64;
    let mut link_load = Vec::new();
    for (l, &n) in load.iter().enumerate() {
        if n > 0 {
            cost += n as f64 * net.link_cost(l, &dem.commodity);
            link_load.push((l, n as f64));
        }
    }
    let mut terminal_load = Vec::new();
    for s in net.terminals() {
        if used_term(s) {
            let n = hw_net[s].unsigned_abs() as f64;
            cost += n * net.transfer_cost(s, &dem.commodity);
            terminal_load.push((s, n));
        }
    }
    Some(Split {
        counts: counts.to_vec(),
        unmet,
        cost,
        link_load,
        terminal_load,
    })
}

/// Minimum total cost over all integral splits of every demand's shipments
/// across its simple paths, including leaving shipments unmet at the
/// penalty.
///
/// Capacities, deadlines and transfer costs are evaluated with the same
/// conventions as the MILP: a link counts toward a deadline once any
/// shipment of the demand uses it, a terminal counts once the demand's net
/// highway flow there is nonzero, and transfers are charged on that net
/// flow. A demand may not use both directions of a highway link pair, and
/// only highway intersections can send or receive shipments.
pub fn oracle_route(
    net: &Network,
    scenario: &Scenario,
    params: &ModelParams,
    config: &OracleConfig,
) -> Result<OracleResult, OracleError> {
    let sd = ScenarioData::new(net, scenario)?;
    let deadline_sets = PathSets::for_demands(net, config.filter_factor)?;
    let mut demands = Vec::new();
    let mut size = 1.0f64;
    for (k, dem) in net.demands().iter().enumerate() {
        if dem.shipments == 0 {
            continue;
        }
        let o = net.require_node(dem.origin())?;
        let t = net.require_node(dem.destination())?;
        let routable = net.node(o).kind == NodeKind::HighwayIntersection
            && net.node(t).kind == NodeKind::HighwayIntersection;
        let paths = if routable {
            enumerate_paths(net, dem.origin(), dem.destination(), f64::INFINITY)?.paths
        } else {
            Vec::new()
        };
        if paths.len() > config.max_paths_per_od {
            return Err(OracleError::TooManyPaths {
                origin: dem.origin().into(),
                destination: dem.destination().into(),
                count: paths.len(),
                cap: config.max_paths_per_od,
            });
        }
        let d = dem.shipments;
        size *= binomial(d + paths.len() as u64, paths.len() as u64);
        if size > config.max_assignments {
            return Err(OracleError::SearchSpaceTooLarge {
                size,
                cap: config.max_assignments,
            });
        }
        let deadline_paths = &deadline_sets.get(o, t).expect("set per demand").paths;
        let mut splits = Vec::new();
        compositions(d, paths.len() + 1, &mut splits, &mut Vec::new());
        let options = splits
            .iter()
            .filter_map(|c| {
                let (counts, unmet) = c.split_at(paths.len());
                price_split(net, k, &paths, deadline_paths, counts, unmet[0], &sd, params.penalty)
            })
            .collect();
        demands.push(DemandOptions { demand: k, paths, options });
    }

    // Cheapest option of every demand suffix, for pruning.
    let mut tail_min = vec![0.0; demands.len() + 1];
    for i in (0..demands.len()).rev() {
        let m = demands[i].options.iter().map(|o| o.cost).fold(f64::INFINITY, f64::min);
        tail_min[i] = tail_min[i + 1] + m;
    }

    struct Search<'a> {
        demands: &'a [DemandOptions],
        tail_min: &'a [f64],
        link_cap: &'a [f64],
        term_cap: &'a [f64],
        link_load: Vec<f64>,
        term_load: Vec<f64>,
        chosen: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
        explored: u64,
    }

    impl Search<'_> {
        fn go(&mut self, i: usize, cost: f64) {
            if let Some((b, _)) = &self.best {
                if cost + self.tail_min[i] >= *b - 1e-9 * b.abs().max(1.0) {
                    return;
                }
            }
            if i == self.demands.len() {
                self.best = Some((cost, self.chosen.clone()));
                return;
            }
            for (j, opt) in self.demands[i].options.iter().enumerate() {
                self.explored += 1;
                let fits = opt.link_load.iter().all(|&(l, n)| self.link_load[l] + n <= self.link_cap[l] + 1e-9)
                    && opt.terminal_load.iter().all(|&(s, n)| self.term_load[s] + n <= self.term_cap[s] + 1e-9);
                if !fits {
                    continue;
                }
                for &(l, n) in &opt.link_load {
                    self.link_load[l] += n;
                }
                for &(s, n) in &opt.terminal_load {
                    self.term_load[s] += n;
                }
                self.chosen.push(j);
                self.go(i + 1, cost + opt.cost);
                self.chosen.pop();
                for &(l, n) in &opt.link_load {
                    self.link_load[l] -= n;
                }
                for &(s, n) in &opt.terminal_load {
                    self.term_load[s] -= n;
                }
            }
        }
    }

    let mut search = Search {
        demands: &demands,
        tail_min: &tail_min,
        link_cap: &sd.link_capacity,
        term_cap: &sd.terminal_capacity,
        link_load: vec![0.0; net.links().len()],
        term_load: vec![0.0; net.nodes().len()],
        chosen: Vec::new(),
        best: None,
        explored: 0,
    };
    search.go(0, 0.0);
    let explored = search.explored;
    // Leaving everything unmet always fits, so a best assignment exists.
    let (best_cost, chosen) = search.best.expect("all-unmet assignment is feasible");
    let assignment = demands
        .iter()
        .zip(chosen)
        .map(|(d, j)| {
            let opt = &d.options[j];
            let dem = &net.demands()[d.demand];
            DemandAssignment {
                demand: d.demand,
                origin: dem.origin().into(),
                destination: dem.destination().into(),
                commodity: dem.commodity.clone(),
                routes: d
                    .paths
                    .iter()
                    .zip(&opt.counts)
                    .filter(|(_, &n)| n > 0)
                    .map(|(p, &n)| (p.clone(), n))
                    .collect(),
                unmet: opt.unmet,
            }
        })
        .collect();
    Ok(OracleResult {
        best_cost,
        assignment,
        explored,
    })
}

#[derive(Clone)]
struct Label {
    node: usize,
    mode: Option<Mode>,
    cost: f64,
    time: f64,
    links: Vec<usize>,
    visited: Vec<bool>,
}

impl Label {
    fn dominates(&self, other: &Label) -> bool {
        self.cost <= other.cost
            && self.time <= other.time
            && self.visited.iter().zip(&other.visited).all(|(&a, &b)| !a || b)
    }
}

/// Cheapest simple path for one shipment of `commodity` from `od.0` to
/// `od.1` whose scenario time is within `deadline`, ignoring capacities.
///
/// Cost is link unit costs plus the transfer cost at every terminal where
/// the mode changes; time is link times plus processing time at those
/// terminals. Returns `None` when no path meets the deadline.
pub fn oracle_cheapest_path(
    net: &Network,
    scenario: &Scenario,
    od: (&str, &str),
    commodity: &str,
    deadline: f64,
) -> Result<Option<(Path, f64)>, OracleError> {
    let sd = ScenarioData::new(net, scenario)?;
    let o = net.require_node(od.0)?;
    let t = net.require_node(od.1)?;
    if o == t
        || net.node(o).kind != NodeKind::HighwayIntersection
        || net.node(t).kind != NodeKind::HighwayIntersection
    {
        return Ok(None);
    }
    let n = net.nodes().len();
    let mut start_visited = vec![false; n];
    start_visited[o] = true;
    let mut pending = vec![Label {
        node: o,
        mode: None,
        cost: 0.0,
        time: 0.0,
        links: Vec::new(),
        visited: start_visited,
    }];
    // Non-dominated labels per (node, arriving mode).
    let slot = |v: usize, m: Option<Mode>| {
        2 * v
            + match m {
                Some(Mode::Rail) => 1,
                _ => 0,
            }
    };
    let mut kept: Vec<Vec<Label>> = vec![Vec::new(); 2 * n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    while let Some(lab) = pending.pop() {
        if lab.node == t {
            if best.as_ref().is_none_or(|(_, c)| lab.cost < *c) {
                best = Some((lab.links.clone(), lab.cost));
            }
            continue;
        }
        if best.as_ref().is_some_and(|(_, c)| lab.cost >= *c) {
            continue;
        }
        for &l in net.outgoing(lab.node) {
            let Some((_, w)) = net.endpoints(l) else { continue };
            if lab.visited[w] {
                continue;
            }
            let link = net.link(l);
            if !link.mode.allows(net.node(w).kind) {
                continue;
            }
            let mut cost = lab.cost + net.link_cost(l, commodity);
            let mut time = lab.time + sd.link_time[l];
            if let Some(m) = lab.mode {
                if m != link.mode {
                    if !net.node(lab.node).is_terminal() {
                        continue;
                    }
                    cost += net.transfer_cost(lab.node, commodity);
                    time += sd.terminal_time[lab.node];
                }
            }
            if time > deadline + 1e-9 {
                continue;
            }
            let mut visited = lab.visited.clone();
            visited[w] = true;
            let mut links = lab.links.clone();
            links.push(l);
            let next = Label {
                node: w,
                mode: Some(link.mode),
                cost,
                time,
                links,
                visited,
            };
            let bucket = &mut kept[slot(w, next.mode)];
            if bucket.iter().any(|b| b.dominates(&next)) {
                continue;
            }
            bucket.retain(|b| !next.dominates(b));
            bucket.push(next.clone());
            pending.push(next);
        }
    }
    Ok(best.map(|(links, cost)| (Path::from_links(net, links).expect("links chain"), cost)))
}
