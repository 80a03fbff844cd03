use std::collections::HashSet;

use serde::Serialize;

use super::{commodity_cost_values, shortest_length, Network, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueCode {
    DuplicateId,
    TerminalFields,
    InvalidCapacity,
    InvalidTime,
    InvalidLength,
    InvalidCost,
    DanglingEndpoint,
    SelfLoop,
    ModeEndpointMismatch,
    UnknownCommodity,
    InvalidDemand,
    DisconnectedDemand,
    EmptyDemand,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::DuplicateId => "duplicate id",
            IssueCode::TerminalFields => "terminal fields",
            IssueCode::InvalidCapacity => "invalid capacity",
            IssueCode::InvalidTime => "invalid time",
            IssueCode::InvalidLength => "invalid length",
            IssueCode::InvalidCost => "invalid cost",
            IssueCode::DanglingEndpoint => "dangling endpoint",
            IssueCode::SelfLoop => "self loop",
            IssueCode::ModeEndpointMismatch => "mode/endpoint mismatch",
            IssueCode::UnknownCommodity => "unknown commodity",
            IssueCode::InvalidDemand => "invalid demand",
            IssueCode::DisconnectedDemand => "disconnected demand",
            IssueCode::EmptyDemand => "empty demand",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub code: IssueCode,
    pub message: String,
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code.as_str(), self.message)
    }
}

/// Hard errors and soft warnings found in a network.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, code: IssueCode, message: String) {
        self.errors.push(Issue { code, message });
    }

    fn warn(&mut self, code: IssueCode, message: String) {
        self.warnings.push(Issue { code, message });
    }
}

fn bad_number(v: f64) -> bool {
    !v.is_finite() || v < 0.0
}

pub fn validate_network(net: &Network) -> ValidationReport {
    let mut report = ValidationReport::default();

    let rates = net.cost_rates();
    for (name, v) in [("highway", rates.highway), ("rail", rates.rail), ("transfer", rates.transfer)] {
        if bad_number(v) {
            report.error(IssueCode::InvalidCost, format!("cost rate `{name}` is {v}"));
        }
    }

    let mut seen = HashSet::new();
    for node in net.nodes() {
        if !seen.insert(node.id.as_str()) {
            report.error(IssueCode::DuplicateId, format!("node `{}` defined twice", node.id));
        }
        let has_terminal_fields = node.transfer_cost_per_commodity.is_some()
            || node.base_processing_time.is_some()
            || node.capacity_range.is_some();
        if node.is_terminal() {
            match (node.base_processing_time, node.capacity_range) {
                (Some(t), Some(cap)) => {
                    if !(t.is_finite() && t > 0.0) {
                        report.error(
                            IssueCode::InvalidTime,
                            format!("terminal `{}` processing time {t}", node.id),
                        );
                    }
                    if !cap.is_valid() {
                        report.error(
                            IssueCode::InvalidCapacity,
                            format!("terminal `{}` capacity [{}, {}]", node.id, cap.low, cap.high),
                        );
                    }
                }
                _ => report.error(
                    IssueCode::TerminalFields,
                    format!("terminal `{}` needs base_processing_time and capacity_range", node.id),
                ),
            }
            if commodity_cost_values(&node.transfer_cost_per_commodity).into_iter().any(bad_number) {
                report.error(IssueCode::InvalidCost, format!("terminal `{}` transfer cost", node.id));
            }
        } else if has_terminal_fields {
            report.error(
                IssueCode::TerminalFields,
                format!("non-terminal node `{}` carries terminal fields", node.id),
            );
        }
    }

    let mut seen = HashSet::new();
    for (i, link) in net.links().iter().enumerate() {
        if !seen.insert(link.id.as_str()) {
            report.error(IssueCode::DuplicateId, format!("link `{}` defined twice", link.id));
        }
        match net.endpoints(i) {
            None => {
                let missing = if net.node_idx(&link.from).is_none() { &link.from } else { &link.to };
                report.error(
                    IssueCode::DanglingEndpoint,
                    format!("link `{}` references unknown node `{missing}`", link.id),
                );
            }
            Some((u, v)) => {
                if u == v {
                    report.error(IssueCode::SelfLoop, format!("link `{}` starts and ends at `{}`", link.id, link.from));
                }
                let (ku, kv) = (net.node(u).kind, net.node(v).kind);
                if !link.mode.allows(ku) || !link.mode.allows(kv) {
                    report.error(
                        IssueCode::ModeEndpointMismatch,
                        format!("{} link `{}` joins {ku:?} `{}` and {kv:?} `{}`", link.mode, link.id, link.from, link.to),
                    );
                }
            }
        }
        if bad_number(link.length) {
            report.error(IssueCode::InvalidLength, format!("link `{}` length {}", link.id, link.length));
        }
        if !(link.base_travel_time.is_finite() && link.base_travel_time > 0.0) {
            report.error(
                IssueCode::InvalidTime,
                format!("link `{}` travel time {}", link.id, link.base_travel_time),
            );
        }
        if !link.capacity_range.is_valid() {
            report.error(
                IssueCode::InvalidCapacity,
                format!(
                    "link `{}` capacity [{}, {}]",
                    link.id, link.capacity_range.low, link.capacity_range.high
                ),
            );
        }
        if commodity_cost_values(&link.unit_cost_per_commodity).into_iter().any(bad_number) {
            report.error(IssueCode::InvalidCost, format!("link `{}` unit cost", link.id));
        }
    }

    let mut commodities = HashSet::new();
    for k in net.commodities() {
        if !commodities.insert(k.as_str()) {
            report.error(IssueCode::DuplicateId, format!("commodity `{k}` listed twice"));
        }
    }

    let mut keys = HashSet::new();
    for d in net.demands() {
        let (o, t) = (d.origin(), d.destination());
        let label = format!("{o}->{t} commodity {}", d.commodity);
        if !commodities.contains(d.commodity.as_str()) {
            report.error(IssueCode::UnknownCommodity, format!("demand {label} uses an unlisted commodity"));
        }
        if !keys.insert((o, t, d.commodity.as_str())) {
            report.error(IssueCode::DuplicateId, format!("demand {label} listed twice"));
        }
        if !(d.deadline.is_finite() && d.deadline > 0.0) {
            report.error(IssueCode::InvalidDemand, format!("demand {label} deadline {}", d.deadline));
        }
        if o == t {
            report.error(IssueCode::InvalidDemand, format!("demand {label} has identical endpoints"));
            continue;
        }
        let (Some(oi), Some(ti)) = (net.node_idx(o), net.node_idx(t)) else {
            report.error(IssueCode::DanglingEndpoint, format!("demand {label} references an unknown node"));
            continue;
        };
        if net.node(oi).kind != NodeKind::HighwayIntersection || net.node(ti).kind != NodeKind::HighwayIntersection {
            report.error(
                IssueCode::InvalidDemand,
                format!("demand {label} must start and end at highway intersections"),
            );
        }
        if d.shipments == 0 {
            report.warn(IssueCode::EmptyDemand, format!("demand {label} has zero shipments"));
        }
        if shortest_length(net, oi, ti).is_none() {
            report.warn(IssueCode::DisconnectedDemand, format!("no path serves demand {label}"));
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{CapacityRange, CostRates, DemandRecord, Link, Mode, Node};

    fn cap() -> CapacityRange {
        CapacityRange::new(10.0, 20.0)
    }

    #[test]
    fn minimal_network_is_valid() {
        let net = Network::new(
            vec![Node::highway("a"), Node::highway("b")],
            vec![Link::new("ab", "a", "b", Mode::Highway, 10.0, 1.0, cap())],
            vec!["k".into()],
            vec![DemandRecord::new("a", "b", "k", 3, 10.0)],
            CostRates::default(),
        );
        let r = validate_network(&net);
        assert!(r.errors.is_empty(), "{:?}", r.errors);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn dangling_endpoint_is_one_error() {
        let net = Network::new(
            vec![Node::highway("a"), Node::highway("b")],
            vec![Link::new("ab", "a", "zz", Mode::Highway, 10.0, 1.0, cap())],
            vec![],
            vec![],
            CostRates::default(),
        );
        let r = validate_network(&net);
        assert_eq!(r.errors.len(), 1);
        assert_eq!(r.errors[0].code.as_str(), "dangling endpoint");
    }

    #[test]
    fn highway_between_rail_junctions_is_mismatch() {
        let net = Network::new(
            vec![Node::rail("a"), Node::rail("b")],
            vec![Link::new("ab", "a", "b", Mode::Highway, 10.0, 1.0, cap())],
            vec![],
            vec![],
            CostRates::default(),
        );
        let r = validate_network(&net);
        assert_eq!(r.errors.len(), 1);
        assert_eq!(r.errors[0].code.as_str(), "mode/endpoint mismatch");
    }

    #[test]
    fn terminal_fields_on_highway_node_rejected() {
        let mut n = Node::highway("a");
        n.base_processing_time = Some(1.0);
        let net = Network::new(vec![n], vec![], vec![], vec![], CostRates::default());
        let r = validate_network(&net);
        assert_eq!(r.errors[0].code, IssueCode::TerminalFields);
    }

    #[test]
    fn disconnected_demand_warns() {
        let net = Network::new(
            vec![Node::highway("a"), Node::highway("b")],
            vec![Link::new("ba", "b", "a", Mode::Highway, 10.0, 1.0, cap())],
            vec!["k".into()],
            vec![DemandRecord::new("a", "b", "k", 3, 10.0)],
            CostRates::default(),
        );
        let r = validate_network(&net);
        assert!(r.errors.is_empty());
        assert_eq!(r.warnings[0].code, IssueCode::DisconnectedDemand);
    }

    #[test]
    fn inverted_capacity_rejected() {
        let net = Network::new(
            vec![Node::highway("a"), Node::highway("b")],
            vec![Link::new("ab", "a", "b", Mode::Highway, 10.0, 1.0, CapacityRange::new(5.0, 1.0))],
            vec![],
            vec![],
            CostRates::default(),
        );
        assert_eq!(validate_network(&net).errors[0].code, IssueCode::InvalidCapacity);
    }
}
