#![allow(dead_code)]

use freight_routing::network::{CapacityRange, CostRates, DemandRecord, Link, Mode, Network, Node, NodeKind, PathSets};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random instance with at most 6 nodes, 8 links, 2 commodities and small
/// integer capacities. Retries until every demand has a path and no OD has
/// more than 12 simple paths.
pub fn tiny_instance(seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(net) = try_tiny(&mut rng) {
            return net;
        }
    }
}

fn cap<R: Rng>(rng: &mut R) -> CapacityRange {
    if rng.random_bool(0.4) {
        CapacityRange::unbounded()
    } else {
        CapacityRange::fixed(rng.random_range(0..=6) as f64)
    }
}

fn try_tiny<R: Rng>(rng: &mut R) -> Option<Network> {
    let n = rng.random_range(4..=6);
    let mut terminals = 0;
    let mut nodes = vec![Node::highway("n0"), Node::highway("n1")];
    for i in 2..n {
        let id = format!("n{i}");
        let r: f64 = rng.random();
        nodes.push(if terminals < 2 || r < 0.4 {
            terminals += 1;
            Node::terminal(id, rng.random_range(1..=3) as f64, cap(rng))
        } else if r < 0.5 {
            Node::rail(id)
        } else {
            Node::highway(id)
        });
    }
    let m = rng.random_range(6..=8);
    let mut links: Vec<Link> = Vec::new();
    let mut tries = 0;
    let add = |links: &mut Vec<Link>, rng: &mut R, u: usize, v: usize, mode: Mode| {
        let length = rng.random_range(10..=100) as f64;
        let (speed, tag) = if mode == Mode::Highway { (50.0, "h") } else { (25.0, "r") };
        links.push(Link::new(
            format!("{tag}{u}-{v}"),
            nodes[u].id.clone(),
            nodes[v].id.clone(),
            mode,
            length,
            length / speed,
            cap(rng),
        ));
    };
    // Usually seed an intermodal route n0 -> T -> T' -> n1.
    if rng.random_bool(0.7) {
        add(&mut links, rng, 0, 2, Mode::Highway);
        add(&mut links, rng, 2, 3, Mode::Rail);
        add(&mut links, rng, 3, 1, Mode::Highway);
    }
    while links.len() < m && tries < 200 {
        tries += 1;
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v {
            continue;
        }
        let rail_ok = Mode::Rail.allows(nodes[u].kind) && Mode::Rail.allows(nodes[v].kind);
        let mode = if rail_ok && rng.random_bool(0.7) { Mode::Rail } else { Mode::Highway };
        if !mode.allows(nodes[u].kind) || !mode.allows(nodes[v].kind) {
            continue;
        }
        if links.iter().any(|l| l.from == nodes[u].id && l.to == nodes[v].id) {
            continue;
        }
        add(&mut links, rng, u, v, mode);
    }
    let commodities: Vec<String> = (0..rng.random_range(1..=2)).map(|k| format!("c{k}")).collect();
    let highway: Vec<usize> = (0..n).filter(|&i| nodes[i].kind == NodeKind::HighwayIntersection).collect();
    let mut demands = vec![DemandRecord::new("n0", "n1", commodities[0].clone(), rng.random_range(1..=5), 0.0)];
    if rng.random_bool(0.6) {
        let o = highway[rng.random_range(0..highway.len())];
        let t = highway[rng.random_range(0..highway.len())];
        if o != t {
            let k = commodities[rng.random_range(0..commodities.len())].clone();
            demands.push(DemandRecord::new(nodes[o].id.clone(), nodes[t].id.clone(), k, rng.random_range(1..=5), 0.0));
        }
    }
    let net = Network::new(nodes, links, commodities, demands.clone(), CostRates::default());
    let sets = PathSets::for_demands(&net, f64::INFINITY).ok()?;
    if sets.iter().any(|s| s.len() > 12) {
        return None;
    }
    // Deadline between the fastest and 2.5 times the fastest path time.
    for d in &mut demands {
        let o = net.node_idx(d.origin()).unwrap();
        let t = net.node_idx(d.destination()).unwrap();
        let fastest = sets
            .get(o, t)?
            .paths
            .iter()
            .map(|p| {
                let links: f64 = p.links.iter().map(|&l| net.link(l).base_travel_time).sum();
                let terms: f64 = p.terminals_visited.iter().map(|&s| net.node(s).base_processing_time.unwrap()).sum();
                links + terms
            })
            .fold(f64::INFINITY, f64::min);
        d.deadline = (fastest * rng.random_range(1.0..2.5) * 100.0).round() / 100.0;
    }
    Some(net.with_demands(demands))
}
