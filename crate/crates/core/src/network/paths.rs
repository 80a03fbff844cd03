use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::Serialize;

use super::{Mode, Network, NetworkError, NodeKind};

/// Paths longer than this multiple of the shortest OD length are dropped.
pub const DEFAULT_FILTER_FACTOR: f64 = 5.0;

const PATH_LIMIT: usize = 250_000;

/// A simple directed path, stored as node and link indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Path {
    pub nodes: Vec<usize>,
    pub links: Vec<usize>,
    /// Miles.
    pub total_length: f64,
    /// Terminals at which consecutive links change mode, in path order.
    pub terminals_visited: Vec<usize>,
}

impl Path {
    /// Build a path from its link sequence. Returns `None` if the links do not
    /// chain or reference dangling endpoints.
    pub fn from_links(net: &Network, links: Vec<usize>) -> Option<Self> {
        let first = *links.first()?;
        let (start, _) = net.endpoints(first)?;
        let mut nodes = vec![start];
        let mut terminals_visited = Vec::new();
        let mut total_length = 0.0;
        let mut prev_mode: Option<Mode> = None;
        for &l in &links {
            let (u, v) = net.endpoints(l)?;
            if *nodes.last()? != u {
                return None;
            }
            let mode = net.link(l).mode;
            if let Some(pm) = prev_mode {
                if pm != mode && net.node(u).is_terminal() {
                    terminals_visited.push(u);
                }
            }
            prev_mode = Some(mode);
            total_length += net.link(l).length;
            nodes.push(v);
        }
        Some(Self {
            nodes,
            links,
            total_length,
            terminals_visited,
        })
    }

    pub fn origin(&self) -> usize {
        self.nodes[0]
    }

    pub fn destination(&self) -> usize {
        *self.nodes.last().expect("path has nodes")
    }

    pub fn node_ids<'a>(&self, net: &'a Network) -> Vec<&'a str> {
        self.nodes.iter().map(|&n| net.node(n).id.as_str()).collect()
    }

    /// Dash-joined node ids, e.g. `1-3-5-8`.
    pub fn label(&self, net: &Network) -> String {
        self.node_ids(net).join("-")
    }

    /// Checks the structural path rules: links chain head to tail, no node
    /// repeats, link modes are compatible with their endpoints and mode
    /// changes happen only at terminals.
    pub fn is_valid(&self, net: &Network) -> bool {
        if self.links.is_empty() || self.nodes.len() != self.links.len() + 1 {
            return false;
        }
        let mut seen = vec![false; net.nodes().len()];
        for &n in &self.nodes {
            if n >= seen.len() || seen[n] {
                return false;
            }
            seen[n] = true;
        }
        for (i, &l) in self.links.iter().enumerate() {
            if l >= net.links().len() {
                return false;
            }
            let Some((u, v)) = net.endpoints(l) else {
                return false;
            };
            if u != self.nodes[i] || v != self.nodes[i + 1] {
                return false;
            }
            let mode = net.link(l).mode;
            if !mode.allows(net.node(u).kind) || !mode.allows(net.node(v).kind) {
                return false;
            }
            if i > 0 {
                let prev = net.link(self.links[i - 1]).mode;
                if prev != mode && net.node(u).kind != NodeKind::IntermodalTerminal {
                    return false;
                }
            }
        }
        true
    }
}

/// All filtered paths for one OD pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSet {
    pub origin: usize,
    pub destination: usize,
    /// Shortest OD length in miles.
    pub min_length: f64,
    pub filter_factor: f64,
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Path sets keyed by (origin index, destination index).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathSets {
    sets: BTreeMap<(usize, usize), PathSet>,
}

impl PathSets {
    /// Enumerate paths for every OD pair that carries a demand record.
    pub fn for_demands(net: &Network, filter_factor: f64) -> Result<Self, NetworkError> {
        let mut sets = BTreeMap::new();
        for d in net.demands() {
            let o = net.require_node(d.origin())?;
            let t = net.require_node(d.destination())?;
            if let std::collections::btree_map::Entry::Vacant(e) = sets.entry((o, t)) {
                e.insert(enumerate_paths(net, d.origin(), d.destination(), filter_factor)?);
            }
        }
        Ok(Self { sets })
    }

    pub fn insert(&mut self, set: PathSet) {
        self.sets.insert((set.origin, set.destination), set);
    }

    pub fn get(&self, origin: usize, destination: usize) -> Option<&PathSet> {
        self.sets.get(&(origin, destination))
    }

    pub fn iter(&self) -> impl Iterator<Item = &PathSet> {
        self.sets.values()
    }

    pub fn total_paths(&self) -> usize {
        self.sets.values().map(PathSet::len).sum()
    }
}

#[derive(PartialEq)]
struct QueueItem(f64, usize);

impl Eq for QueueItem {}

impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest distance in miles from every node to `target`.
fn lengths_to(net: &Network, target: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; net.nodes().len()];
    let mut heap = BinaryHeap::new();
    dist[target] = 0.0;
    heap.push(QueueItem(0.0, target));
    while let Some(QueueItem(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &l in net.incoming(v) {
            let Some((u, _)) = net.endpoints(l) else { continue };
            let nd = d + net.link(l).length;
            if nd < dist[u] {
                dist[u] = nd;
                heap.push(QueueItem(nd, u));
            }
        }
    }
    dist
}

/// Shortest OD length in miles, `None` when disconnected.
pub fn shortest_length(net: &Network, origin: usize, destination: usize) -> Option<f64> {
    let d = lengths_to(net, destination)[origin];
    d.is_finite().then_some(d)
}

/// Every simple directed path from `origin` to `destination` whose length is
/// at most `filter_factor` times the shortest OD length, ordered
/// lexicographically by node index sequence.
pub fn enumerate_paths(
    net: &Network,
    origin: &str,
    destination: &str,
    filter_factor: f64,
) -> Result<PathSet, NetworkError> {
    let o = net.require_node(origin)?;
    let t = net.require_node(destination)?;
    if o == t {
        return Err(NetworkError::SameEndpoints(origin.to_string()));
    }
    let to_target = lengths_to(net, t);
    let min_length = to_target[o];
    if !min_length.is_finite() {
        return Err(NetworkError::NoPath(origin.to_string(), destination.to_string()));
    }
    let limit = filter_factor * min_length;
    let slack = 1e-9 * limit.abs().max(1.0);

    let mut paths = Vec::new();
    let mut on_path = vec![false; net.nodes().len()];
    let mut links: Vec<usize> = Vec::new();
    // Explicit DFS stack of (node, next outgoing slot, length so far).
    let mut stack: Vec<(usize, usize, f64)> = vec![(o, 0, 0.0)];
    on_path[o] = true;
    while let Some(top) = stack.last_mut() {
        let (v, slot, len) = *top;
        let out = net.outgoing(v);
        if slot >= out.len() {
            on_path[v] = false;
            stack.pop();
            links.pop();
            continue;
        }
        top.1 += 1;
        let l = out[slot];
        let Some((_, w)) = net.endpoints(l) else { continue };
        if on_path[w] {
            continue;
        }
        let next_len = len + net.link(l).length;
        if next_len + to_target[w] > limit + slack {
            continue;
        }
        if let (Some(&prev), true) = (links.last(), net.node(v).kind != NodeKind::IntermodalTerminal) {
            if net.link(prev).mode != net.link(l).mode {
                continue;
            }
        }
        links.push(l);
        if w == t {
            if paths.len() >= PATH_LIMIT {
                return Err(NetworkError::TooManyPaths {
                    origin: origin.to_string(),
                    destination: destination.to_string(),
                    limit: PATH_LIMIT,
                });
            }
            paths.push(Path::from_links(net, links.clone()).expect("dfs links chain"));
            links.pop();
            continue;
        }
        on_path[w] = true;
        stack.push((w, 0, next_len));
    }
    paths.sort_by(|a, b| a.nodes.cmp(&b.nodes).then_with(|| a.links.cmp(&b.links)));
    Ok(PathSet {
        origin: o,
        destination: t,
        min_length,
        filter_factor,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{CapacityRange, CostRates, Link, Node};

    fn cap() -> CapacityRange {
        CapacityRange::fixed(100.0)
    }

    fn diamond() -> Network {
        let nodes = ["A", "B", "C", "D"].iter().map(|&n| Node::highway(n)).collect();
        let links = vec![
            Link::new("ab", "A", "B", Mode::Highway, 5.0, 1.0, cap()),
            Link::new("bd", "B", "D", Mode::Highway, 5.0, 1.0, cap()),
            Link::new("ac", "A", "C", Mode::Highway, 30.0, 1.0, cap()),
            Link::new("cd", "C", "D", Mode::Highway, 30.0, 1.0, cap()),
        ];
        Network::new(nodes, links, vec![], vec![], CostRates::default())
    }

    #[test]
    fn single_link_has_one_path() {
        let nodes = vec![Node::highway("A"), Node::highway("B")];
        let links = vec![Link::new("ab", "A", "B", Mode::Highway, 3.0, 1.0, cap())];
        let net = Network::new(nodes, links, vec![], vec![], CostRates::default());
        let set = enumerate_paths(&net, "A", "B", 5.0).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.paths[0].node_ids(&net), vec!["A", "B"]);
    }

    #[test]
    fn diamond_filter_drops_long_branch() {
        let net = diamond();
        let set = enumerate_paths(&net, "A", "D", 5.0).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.paths[0].label(&net), "A-B-D");
        let all = enumerate_paths(&net, "A", "D", 6.0).unwrap();
        assert_eq!(all.len(), 2);
    }

    #[test]
    fn disconnected_pair_is_no_path() {
        let net = diamond();
        let err = enumerate_paths(&net, "D", "A", 5.0).unwrap_err();
        assert!(matches!(err, NetworkError::NoPath(..)));
    }

    #[test]
    fn mode_change_recorded_at_terminal() {
        let nodes = vec![
            Node::highway("h1"),
            Node::terminal("s", 2.0, cap()),
            Node::terminal("s2", 2.0, cap()),
            Node::highway("h2"),
        ];
        let links = vec![
            Link::new("a", "h1", "s", Mode::Highway, 1.0, 1.0, cap()),
            Link::new("b", "s", "s2", Mode::Rail, 1.0, 1.0, cap()),
            Link::new("c", "s2", "h2", Mode::Highway, 1.0, 1.0, cap()),
        ];
        let net = Network::new(nodes, links, vec![], vec![], CostRates::default());
        let set = enumerate_paths(&net, "h1", "h2", 5.0).unwrap();
        assert_eq!(set.paths[0].terminals_visited, vec![1, 2]);
        assert!(set.paths[0].is_valid(&net));
    }
}
