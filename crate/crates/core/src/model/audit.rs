//! Direct evaluation of the routing constraints at a point, including the
//! bilinear terminal-selection and absolute-value transfer forms that the
//! MILP only represents through their linearizations.

use serde::{Deserialize, Serialize};

use crate::network::{Mode, Network, NodeKind, PathSets};
use crate::scenario::Scenario;

use super::build::deadline_lhs;
use super::{BlockValues, BuildError, Layout, ModelParams, ScenarioData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    HighwayConservation,
    OdBalance,
    LinkIndicator,
    AntiParallel,
    RailConservation,
    TerminalConservation,
    /// Rail net flow times (1 - Y) must vanish.
    TerminalSelection,
    /// F equals the absolute highway net flow at the terminal.
    TransferAmount,
    TransferSandwich,
    Deadline,
    HighwayLinking,
    RailLinking,
    HighwayCapacity,
    RailCapacity,
    TerminalCapacity,
    Shortfall,
    Bounds,
    Integrality,
    Binary,
    OriginReentry,
    TerminalCoupling,
    TransferEnvelope,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::HighwayConservation => "highway-conservation",
            Family::OdBalance => "od-balance",
            Family::LinkIndicator => "link-indicator",
            Family::AntiParallel => "anti-parallel",
            Family::RailConservation => "rail-conservation",
            Family::TerminalConservation => "terminal-conservation",
            Family::TerminalSelection => "terminal-selection",
            Family::TransferAmount => "transfer-amount",
            Family::TransferSandwich => "transfer-sandwich",
            Family::Deadline => "deadline",
            Family::HighwayLinking => "highway-linking",
            Family::RailLinking => "rail-linking",
            Family::HighwayCapacity => "highway-capacity",
            Family::RailCapacity => "rail-capacity",
            Family::TerminalCapacity => "terminal-capacity",
            Family::Shortfall => "shortfall",
            Family::Bounds => "bounds",
            Family::Integrality => "integrality",
            Family::Binary => "binary",
            Family::OriginReentry => "origin-reentry",
            Family::TerminalCoupling => "terminal-coupling",
            Family::TransferEnvelope => "transfer-envelope",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub family: Family,
    /// Demand record index, `None` for capacity rows.
    pub demand: Option<usize>,
    pub element: String,
    pub magnitude: f64,
}

struct Checker {
    tol: f64,
    out: Vec<Violation>,
}

impl Checker {
    fn check(&mut self, family: Family, demand: Option<usize>, element: &str, magnitude: f64) {
        if magnitude > self.tol || magnitude.is_nan() {
            self.out.push(Violation {
                family,
                demand,
                element: element.to_string(),
                magnitude,
            });
        }
    }

    fn le(&mut self, family: Family, demand: Option<usize>, element: &str, lhs: f64, rhs: f64) {
        self.check(family, demand, element, lhs - rhs);
    }

    fn eq(&mut self, family: Family, demand: Option<usize>, element: &str, lhs: f64, rhs: f64) {
        self.check(family, demand, element, (lhs - rhs).abs());
    }
}

/// Check one scenario's assignment. `blocks` holds the values of every
/// demand with positive shipments; missing demands count as all zero, which
/// leaves their shortfall row violated.
pub fn audit_solution(
    net: &Network,
    paths: &PathSets,
    scenario: &Scenario,
    params: &ModelParams,
    blocks: &[BlockValues],
) -> Result<Vec<Violation>, BuildError> {
    let sd = ScenarioData::new(net, scenario)?;
    let layout = Layout::new(net);
    let mut c = Checker {
        tol: params.audit_tol,
        out: Vec::new(),
    };
    let eps = params.epsilon;
    let hw_pos = |l: usize| layout.highway_pos(l);
    let rail_pos = |l: usize| layout.rail_pos(l);

    let mut seen = vec![false; net.demands().len()];
    for b in blocks {
        seen[b.demand] = true;
    }
    for (k, dem) in net.demands().iter().enumerate() {
        if dem.shipments > 0 && !seen[k] {
            c.check(Family::Shortfall, Some(k), "destination", dem.shipments as f64);
        }
    }

    for b in blocks {
        let k = Some(b.demand);
        let dem = &net.demands()[b.demand];
        let d = dem.shipments as f64;
        let (Some(o), Some(t)) = (net.node_idx(dem.origin()), net.node_idx(dem.destination())) else {
            return Err(BuildError::UnknownNode(format!("{}/{}", dem.origin(), dem.destination())));
        };
        let flow_of = |l: usize| -> f64 {
            match net.link(l).mode {
                Mode::Highway => b.flow[hw_pos(l).expect("highway")],
                Mode::Rail => b.rail_flow[rail_pos(l).expect("rail")],
            }
        };
        let net_out = |v: usize, mode: Mode| -> f64 {
            let out: f64 = net.outgoing(v).iter().filter(|&&l| net.link(l).mode == mode).map(|&l| flow_of(l)).sum();
            let inn: f64 = net.incoming(v).iter().filter(|&&l| net.link(l).mode == mode).map(|&l| flow_of(l)).sum();
            out - inn
        };
        let hw_sum = |ls: &[usize]| -> f64 {
            ls.iter().filter(|&&l| net.link(l).mode == Mode::Highway).map(|&l| flow_of(l)).sum()
        };

        // Bounds and integrality.
        for (p, &l) in layout.highway.iter().enumerate() {
            let id = &net.link(l).id;
            let (xv, dv) = (b.flow[p], b.link_use[p]);
            c.check(Family::Bounds, k, id, (-xv).max(xv - 1.0));
            c.check(Family::Binary, k, id, dv.min(1.0 - dv).max(-dv).max(dv - 1.0));
            c.le(Family::LinkIndicator, k, id, xv, dv);
            c.le(Family::HighwayLinking, k, id, eps * dv, xv);
            c.le(Family::HighwayLinking, k, id, xv, dv);
            if let Some(r) = net.reverse_link(l).filter(|&r| net.link(r).mode == Mode::Highway) {
                c.le(Family::AntiParallel, k, id, xv + b.link_use[hw_pos(r).expect("highway")], 1.0);
            }
        }
        for (p, &l) in layout.rail.iter().enumerate() {
            let id = &net.link(l).id;
            let (xv, dv) = (b.rail_flow[p], b.rail_use[p]);
            c.check(Family::Bounds, k, id, (-xv).max(xv - 1.0));
            c.check(Family::Binary, k, id, dv.min(1.0 - dv).max(-dv).max(dv - 1.0));
            c.le(Family::RailLinking, k, id, eps * dv, xv);
            c.le(Family::RailLinking, k, id, xv, dv);
        }
        let u = b.shortfall;
        c.check(Family::Bounds, k, "shortfall", -u);
        if params.integer_shortfall {
            c.check(Family::Integrality, k, "shortfall", (u - u.round()).abs());
        }

        for &i in &net.nodes_of_kind(NodeKind::HighwayIntersection) {
            let id = &net.node(i).id;
            let v = net_out(i, Mode::Highway);
            if i == o {
                c.le(Family::HighwayConservation, k, id, v, 1.0);
            } else if i == t {
                c.le(Family::HighwayConservation, k, id, -1.0, v);
            } else {
                c.eq(Family::HighwayConservation, k, id, v, 0.0);
            }
        }
        let out_o = hw_sum(net.outgoing(o));
        let in_o = hw_sum(net.incoming(o));
        let in_t = hw_sum(net.incoming(t));
        c.eq(Family::OdBalance, k, "od", out_o, in_t);
        // Scaled by the big-M so the magnitude is in flow units.
        c.check(Family::OriginReentry, k, "origin", in_o - out_o / params.big_m);
        for &i in &net.nodes_of_kind(NodeKind::RailJunction) {
            c.eq(Family::RailConservation, k, &net.node(i).id, net_out(i, Mode::Rail), 0.0);
        }
        for (p, &s) in layout.terminals.iter().enumerate() {
            let id = &net.node(s).id;
            let (hw, rl) = (net_out(s, Mode::Highway), net_out(s, Mode::Rail));
            let (f, y) = (b.transfer[p], b.terminal_use[p]);
            c.check(Family::Bounds, k, id, (-f).max(f - 1.0));
            c.check(Family::Binary, k, id, y.min(1.0 - y).max(-y).max(y - 1.0));
            c.eq(Family::TerminalConservation, k, id, hw + rl, 0.0);
            c.check(Family::TerminalSelection, k, id, (rl * (1.0 - y)).abs());
            c.eq(Family::TransferAmount, k, id, f, hw.abs());
            c.le(Family::TransferSandwich, k, id, eps * y, f);
            c.le(Family::TransferSandwich, k, id, f, y);
            let xi = if params.tighten_big_m { 1.0 } else { params.big_m };
            c.check(Family::TerminalCoupling, k, id, rl.abs() - xi * y);
            c.check(Family::TransferEnvelope, k, id, hw.abs() - f);
        }
        if let Some(set) = paths.get(o, t) {
            for (p, path) in set.paths.iter().enumerate() {
                let lhs = deadline_lhs(net, &layout, path, &sd, b);
                c.le(Family::Deadline, k, &format!("p{p}"), lhs, dem.deadline);
            }
        }
        c.eq(Family::Shortfall, k, "destination", d * (1.0 - in_t), u);
    }

    // Capacities, in shipments.
    let shipments = |b: &BlockValues| net.demands()[b.demand].shipments as f64;
    for (p, &l) in layout.highway.iter().enumerate() {
        let load: f64 = blocks.iter().map(|b| shipments(b) * b.flow[p]).sum();
        c.le(Family::HighwayCapacity, None, &net.link(l).id, load, sd.link_capacity[l]);
    }
    for (p, &l) in layout.rail.iter().enumerate() {
        let load: f64 = blocks.iter().map(|b| shipments(b) * b.rail_flow[p]).sum();
        c.le(Family::RailCapacity, None, &net.link(l).id, load, sd.link_capacity[l]);
    }
    for (p, &s) in layout.terminals.iter().enumerate() {
        let load: f64 = blocks.iter().map(|b| shipments(b) * b.transfer[p]).sum();
        c.le(Family::TerminalCapacity, None, &net.node(s).id, load, sd.terminal_capacity[s]);
    }
    Ok(c.out)
}
