//! Road-rail intermodal network: nodes, directed links, commodities and
//! origin-destination demands, plus the cost and time derivations used by
//! the routing model.

mod paths;
mod validate;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path as FsPath;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scenario::Scenario;

pub use paths::{enumerate_paths, shortest_length, Path, PathSet, PathSets, DEFAULT_FILTER_FACTOR};
pub use validate::{validate_network, Issue, IssueCode, ValidationReport};

/// Default truck rate, money per mile per shipment.
pub const DEFAULT_HIGHWAY_RATE: f64 = 1.67;
/// Default rail rate, money per mile per shipment.
pub const DEFAULT_RAIL_RATE: f64 = 0.60;
/// Default transfer cost at a terminal, money per shipment.
pub const DEFAULT_TRANSFER_COST: f64 = 70.0;

/// JSON text of the bundled 15-node test network.
pub const HYPOTHETICAL15_JSON: &str = include_str!("../../examples/hypothetical15.json");

/// The bundled 15-node road-rail network with its demand table.
///
/// Topology and demands follow a published test case, but link lengths,
/// times, capacity ranges and terminal parameters are assumed values, not
/// measured data.
pub fn hypothetical15() -> Network {
    Network::from_json(HYPOTHETICAL15_JSON).expect("bundled network parses")
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("origin and destination are the same node `{0}`")]
    SameEndpoints(String),
    #[error("no path from `{0}` to `{1}`")]
    NoPath(String, String),
    #[error("path enumeration from `{origin}` to `{destination}` exceeded {limit} paths")]
    TooManyPaths {
        origin: String,
        destination: String,
        limit: usize,
    },
    #[error("scenario has no realization for `{0}`")]
    MissingRealization(String),
    #[error("failed to read network: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse network: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    HighwayIntersection,
    RailJunction,
    IntermodalTerminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Highway,
    Rail,
}

impl Mode {
    /// Whether a link of this mode may touch a node of `kind`.
    pub fn allows(self, kind: NodeKind) -> bool {
        match (self, kind) {
            (_, NodeKind::IntermodalTerminal) => true,
            (Mode::Highway, NodeKind::HighwayIntersection) => true,
            (Mode::Rail, NodeKind::RailJunction) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Highway => f.write_str("highway"),
            Mode::Rail => f.write_str("rail"),
        }
    }
}

/// Closed capacity interval in shipments per period. An upper end of
/// `f64::INFINITY` (written as `null` in JSON) means uncapacitated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityRange {
    pub low: f64,
    pub high: f64,
}

impl CapacityRange {
    pub fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub fn fixed(value: f64) -> Self {
        Self::new(value, value)
    }

    pub fn unbounded() -> Self {
        Self::new(f64::INFINITY, f64::INFINITY)
    }

    pub fn is_valid(&self) -> bool {
        !self.low.is_nan() && !self.high.is_nan() && self.low >= 0.0 && self.low <= self.high
    }
}

impl Serialize for CapacityRange {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let enc = |v: f64| if v.is_finite() { Some(v) } else { None };
        [enc(self.low), enc(self.high)].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CapacityRange {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [low, high] = <[Option<f64>; 2]>::deserialize(deserializer)?;
        Ok(Self {
            low: low.unwrap_or(f64::INFINITY),
            high: high.unwrap_or(f64::INFINITY),
        })
    }
}

/// Unit cost that is either the same for every commodity or listed per
/// commodity id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CommodityCosts {
    Uniform(f64),
    PerCommodity(BTreeMap<String, f64>),
}

impl CommodityCosts {
    pub fn get(&self, commodity: &str) -> Option<f64> {
        match self {
            CommodityCosts::Uniform(v) => Some(*v),
            CommodityCosts::PerCommodity(map) => map.get(commodity).copied(),
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            CommodityCosts::Uniform(v) => vec![*v],
            CommodityCosts::PerCommodity(map) => map.values().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer_cost_per_commodity: Option<CommodityCosts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_processing_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_range: Option<CapacityRange>,
}

impl Node {
    pub fn highway(id: impl Into<String>) -> Self {
        Self::plain(id, NodeKind::HighwayIntersection)
    }

    pub fn rail(id: impl Into<String>) -> Self {
        Self::plain(id, NodeKind::RailJunction)
    }

    pub fn terminal(id: impl Into<String>, processing_time: f64, capacity: CapacityRange) -> Self {
        Self {
            id: id.into(),
            kind: NodeKind::IntermodalTerminal,
            transfer_cost_per_commodity: None,
            base_processing_time: Some(processing_time),
            capacity_range: Some(capacity),
        }
    }

    fn plain(id: impl Into<String>, kind: NodeKind) -> Self {
        Self {
            id: id.into(),
            kind,
            transfer_cost_per_commodity: None,
            base_processing_time: None,
            capacity_range: None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.kind == NodeKind::IntermodalTerminal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: String,
    pub from: String,
    pub to: String,
    pub mode: Mode,
    /// Miles.
    pub length: f64,
    /// Hours.
    pub base_travel_time: f64,
    pub capacity_range: CapacityRange,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_cost_per_commodity: Option<CommodityCosts>,
}

impl Link {
    pub fn new(
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        mode: Mode,
        length: f64,
        base_travel_time: f64,
        capacity_range: CapacityRange,
    ) -> Self {
        Self {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            mode,
            length,
            base_travel_time,
            capacity_range,
            unit_cost_per_commodity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandRecord {
    /// (origin node id, destination node id).
    pub od: (String, String),
    pub commodity: String,
    pub shipments: u64,
    /// Delivery deadline in hours.
    pub deadline: f64,
}

impl DemandRecord {
    pub fn new(
        origin: impl Into<String>,
        destination: impl Into<String>,
        commodity: impl Into<String>,
        shipments: u64,
        deadline: f64,
    ) -> Self {
        Self {
            od: (origin.into(), destination.into()),
            commodity: commodity.into(),
            shipments,
            deadline,
        }
    }

    pub fn origin(&self) -> &str {
        &self.od.0
    }

    pub fn destination(&self) -> &str {
        &self.od.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRates {
    /// Money per mile per shipment by truck.
    pub highway: f64,
    /// Money per mile per shipment by rail.
    pub rail: f64,
    /// Default money per shipment transferred at a terminal.
    pub transfer: f64,
}

impl Default for CostRates {
    fn default() -> Self {
        Self {
            highway: DEFAULT_HIGHWAY_RATE,
            rail: DEFAULT_RAIL_RATE,
            transfer: DEFAULT_TRANSFER_COST,
        }
    }
}

impl CostRates {
    pub fn rate(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Highway => self.highway,
            Mode::Rail => self.rail,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    nodes: Vec<Node>,
    links: Vec<Link>,
    #[serde(default)]
    commodities: Vec<String>,
    #[serde(default)]
    demands: Vec<DemandRecord>,
    #[serde(default)]
    cost_rates: CostRates,
}

/// The intermodal network. Fields are read-only after construction so the
/// id lookup tables stay in sync; a network may be structurally invalid (see
/// [`validate_network`]) and still be constructed and serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "NetworkDoc", into = "NetworkDoc")]
pub struct Network {
    nodes: Vec<Node>,
    links: Vec<Link>,
    commodities: Vec<String>,
    demands: Vec<DemandRecord>,
    cost_rates: CostRates,
    node_index: HashMap<String, usize>,
    link_index: HashMap<String, usize>,
    /// Endpoint indices per link; `None` when an endpoint id is dangling.
    endpoints: Vec<Option<(usize, usize)>>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

impl From<NetworkDoc> for Network {
    fn from(doc: NetworkDoc) -> Self {
        Network::new(doc.nodes, doc.links, doc.commodities, doc.demands, doc.cost_rates)
    }
}

impl From<Network> for NetworkDoc {
    fn from(net: Network) -> Self {
        NetworkDoc {
            nodes: net.nodes,
            links: net.links,
            commodities: net.commodities,
            demands: net.demands,
            cost_rates: net.cost_rates,
        }
    }
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.links == other.links
            && self.commodities == other.commodities
            && self.demands == other.demands
            && self.cost_rates == other.cost_rates
    }
}

impl Network {
    pub fn new(
        nodes: Vec<Node>,
        links: Vec<Link>,
        commodities: Vec<String>,
        demands: Vec<DemandRecord>,
        cost_rates: CostRates,
    ) -> Self {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            node_index.entry(n.id.clone()).or_insert(i);
        }
        let mut link_index = HashMap::with_capacity(links.len());
        for (i, l) in links.iter().enumerate() {
            link_index.entry(l.id.clone()).or_insert(i);
        }
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut incoming = vec![Vec::new(); nodes.len()];
        let endpoints = links
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let ends = (node_index.get(&l.from).copied(), node_index.get(&l.to).copied());
                match ends {
                    (Some(u), Some(v)) => {
                        outgoing[u].push(i);
                        incoming[v].push(i);
                        Some((u, v))
                    }
                    _ => None,
                }
            })
            .collect();
        Self {
            nodes,
            links,
            commodities,
            demands,
            cost_rates,
            node_index,
            link_index,
            endpoints,
            outgoing,
            incoming,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self, NetworkError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn commodities(&self) -> &[String] {
        &self.commodities
    }

    pub fn demands(&self) -> &[DemandRecord] {
        &self.demands
    }

    pub fn cost_rates(&self) -> &CostRates {
        &self.cost_rates
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn link(&self, idx: usize) -> &Link {
        &self.links[idx]
    }

    pub fn node_idx(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn link_idx(&self, id: &str) -> Option<usize> {
        self.link_index.get(id).copied()
    }

    pub fn require_node(&self, id: &str) -> Result<usize, NetworkError> {
        self.node_idx(id).ok_or_else(|| NetworkError::UnknownNode(id.to_string()))
    }

    /// Endpoint node indices of a link, `None` if either endpoint is dangling.
    pub fn endpoints(&self, link: usize) -> Option<(usize, usize)> {
        self.endpoints[link]
    }

    pub fn outgoing(&self, node: usize) -> &[usize] {
        &self.outgoing[node]
    }

    pub fn incoming(&self, node: usize) -> &[usize] {
        &self.incoming[node]
    }

    /// Indices of all intermodal terminals, in node order.
    pub fn terminals(&self) -> Vec<usize> {
        self.nodes_of_kind(NodeKind::IntermodalTerminal)
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].kind == kind).collect()
    }

    /// Link indices of one mode, in link order.
    pub fn links_of_mode(&self, mode: Mode) -> Vec<usize> {
        (0..self.links.len()).filter(|&i| self.links[i].mode == mode).collect()
    }

    /// The link running opposite to `link` in the same mode, if any.
    pub fn reverse_link(&self, link: usize) -> Option<usize> {
        let (u, v) = self.endpoints(link)?;
        let mode = self.links[link].mode;
        self.outgoing[v]
            .iter()
            .copied()
            .find(|&l| self.endpoints[l].map(|(_, t)| t) == Some(u) && self.links[l].mode == mode)
    }

    /// A copy of this network with a different demand table.
    pub fn with_demands(&self, demands: Vec<DemandRecord>) -> Self {
        Network::new(
            self.nodes.clone(),
            self.links.clone(),
            self.commodities.clone(),
            demands,
            self.cost_rates,
        )
    }

    /// A copy of this network with every link and terminal capacity range
    /// replaced.
    pub fn with_capacities(&self, capacity: CapacityRange) -> Self {
        let nodes = self
            .nodes
            .iter()
            .cloned()
            .map(|mut n| {
                if n.is_terminal() {
                    n.capacity_range = Some(capacity);
                }
                n
            })
            .collect();
        let links = self
            .links
            .iter()
            .cloned()
            .map(|mut l| {
                l.capacity_range = capacity;
                l
            })
            .collect();
        Network::new(nodes, links, self.commodities.clone(), self.demands.clone(), self.cost_rates)
    }

    pub fn with_cost_rates(&self, rates: CostRates) -> Self {
        Network::new(
            self.nodes.clone(),
            self.links.clone(),
            self.commodities.clone(),
            self.demands.clone(),
            rates,
        )
    }

    /// Unit cost of moving one shipment of `commodity` along `link`.
    pub fn link_cost(&self, link: usize, commodity: &str) -> f64 {
        link_unit_cost(&self.links[link], commodity, &self.cost_rates)
    }

    /// Unit cost of transferring one shipment of `commodity` at a terminal.
    pub fn transfer_cost(&self, node: usize, commodity: &str) -> f64 {
        self.nodes[node]
            .transfer_cost_per_commodity
            .as_ref()
            .and_then(|c| c.get(commodity))
            .unwrap_or(self.cost_rates.transfer)
    }

    /// Total demanded shipments across all records.
    pub fn total_shipments(&self) -> u64 {
        self.demands.iter().map(|d| d.shipments).sum()
    }
}

/// Cost per shipment on `link`: the explicit per-commodity override when one
/// is listed, otherwise the mode rate times the link length.
pub fn link_unit_cost(link: &Link, commodity: &str, rates: &CostRates) -> f64 {
    link.unit_cost_per_commodity
        .as_ref()
        .and_then(|c| c.get(commodity))
        .unwrap_or_else(|| rates.rate(link.mode) * link.length)
}

/// Travel time along `path` under `scenario`: link times plus the processing
/// time at every terminal where the path changes mode.
pub fn path_time(net: &Network, path: &Path, scenario: &Scenario) -> Result<f64, NetworkError> {
    let mut total = 0.0;
    for &l in &path.links {
        let id = &net.link(l).id;
        total += scenario
            .link_time
            .get(id)
            .copied()
            .ok_or_else(|| NetworkError::MissingRealization(id.clone()))?;
    }
    for &s in &path.terminals_visited {
        let id = &net.node(s).id;
        total += scenario
            .terminal_time
            .get(id)
            .copied()
            .ok_or_else(|| NetworkError::MissingRealization(id.clone()))?;
    }
    Ok(total)
}

pub(crate) fn commodity_cost_values(costs: &Option<CommodityCosts>) -> Vec<f64> {
    costs.as_ref().map(CommodityCosts::values).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hw(len: f64) -> Link {
        Link::new("l", "a", "b", Mode::Highway, len, 1.0, CapacityRange::fixed(10.0))
    }

    #[test]
    fn highway_rate_times_length() {
        let rates = CostRates::default();
        assert!((link_unit_cost(&hw(100.0), "k", &rates) - 167.0).abs() < 1e-9);
    }

    #[test]
    fn rail_rate_times_length() {
        let rates = CostRates::default();
        let mut l = hw(100.0);
        l.mode = Mode::Rail;
        assert!((link_unit_cost(&l, "k", &rates) - 60.0).abs() < 1e-9);
    }

    #[test]
    fn zero_length_costs_nothing() {
        assert_eq!(link_unit_cost(&hw(0.0), "k", &CostRates::default()), 0.0);
    }

    #[test]
    fn override_beats_rate() {
        let mut l = hw(100.0);
        l.unit_cost_per_commodity =
            Some(CommodityCosts::PerCommodity(BTreeMap::from([("k".to_string(), 3.5)])));
        let rates = CostRates::default();
        assert_eq!(link_unit_cost(&l, "k", &rates), 3.5);
        assert!((link_unit_cost(&l, "other", &rates) - 167.0).abs() < 1e-9);
    }

    #[test]
    fn capacity_range_json_uses_null_for_infinity() {
        let r = CapacityRange::new(5.0, f64::INFINITY);
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(text, "[5.0,null]");
        let back: CapacityRange = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn reverse_link_matches_mode() {
        let nodes = vec![
            Node::terminal("a", 1.0, CapacityRange::fixed(5.0)),
            Node::terminal("b", 1.0, CapacityRange::fixed(5.0)),
        ];
        let cap = CapacityRange::fixed(1.0);
        let links = vec![
            Link::new("ab", "a", "b", Mode::Highway, 1.0, 1.0, cap),
            Link::new("ba_r", "b", "a", Mode::Rail, 1.0, 1.0, cap),
            Link::new("ba", "b", "a", Mode::Highway, 1.0, 1.0, cap),
        ];
        let net = Network::new(nodes, links, vec![], vec![], CostRates::default());
        assert_eq!(net.reverse_link(0), Some(2));
        assert_eq!(net.reverse_link(1), None);
    }

    #[test]
    fn bundled_network_is_clean() {
        let net = hypothetical15();
        let report = validate_network(&net);
        assert!(report.is_valid(), "{:?}", report.errors);
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
        assert_eq!(net.nodes().len(), 15);
        assert_eq!(net.terminals().len(), 4);
        assert_eq!(net.demands().len(), 17);
        assert_eq!(net.total_shipments(), 634);
    }
}
