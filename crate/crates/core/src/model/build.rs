use crate::network::{Mode, Network, NodeKind, PathSets};
use crate::scenario::Scenario;
use crate::solver::{MilpModel, Sense};

use super::{BuildError, Family, Layout, ModelParams, ScenarioData, VarKey, VarKind, VariableMap};

/// Capacity row bookkeeping, used to re-target rows per scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CapacityRow {
    Link { scenario: usize, link: usize, row: usize },
    Terminal { scenario: usize, node: usize, row: usize },
}

/// Build the extensive form over `scenarios`.
pub fn build_smifr(
    net: &Network,
    paths: &PathSets,
    scenarios: &[Scenario],
    params: &ModelParams,
) -> Result<(MilpModel, VariableMap), BuildError> {
    let weights = params.weights(net, scenarios.len())?;
    let data = scenarios
        .iter()
        .map(|s| ScenarioData::new(net, s))
        .collect::<Result<Vec<_>, _>>()?;
    let (mut model, map, _) = assemble(net, paths, &data, &weights, params, true)?;
    if params.integer_shortfall && params.aggregate_shortfall {
        for w in 0..data.len() {
            let shortfalls: Vec<usize> = map
                .blocks
                .iter()
                .filter(|b| b.scenario == w)
                .map(|b| b.start + map.layout.offset(VarKind::Shortfall).expect("shortfall in layout"))
                .collect();
            if shortfalls.len() < 2 {
                continue;
            }
            let total: f64 = shortfalls.iter().map(|&j| model.columns[j].upper).sum();
            let s = model.add_column(format!("Utot[w{w}]"), 0.0, 0.0, total, true);
            model.columns[s].priority = 1;
            let mut coefs: Vec<(usize, f64)> = shortfalls.into_iter().map(|j| (j, 1.0)).collect();
            coefs.push((s, -1.0));
            model.add_row(format!("shortfall-total[w{w}]"), coefs, Sense::Eq, 0.0);
        }
    }
    Ok((model, map))
}

fn row_name(family: Family, elem: &str, demand: usize, scenario: usize) -> String {
    format!("{}[{elem},d{demand},w{scenario}]", family.as_str())
}

pub(crate) fn assemble(
    net: &Network,
    paths: &PathSets,
    data: &[ScenarioData],
    weights: &[f64],
    params: &ModelParams,
    with_deadlines: bool,
) -> Result<(MilpModel, VariableMap, Vec<CapacityRow>), BuildError> {
    let layout = Layout::new(net);
    let width = layout.width();

    struct Od {
        demand: usize,
        origin: usize,
        destination: usize,
    }
    let mut ods = Vec::new();
    for (k, d) in net.demands().iter().enumerate() {
        if d.shipments == 0 {
            continue;
        }
        let origin = net.node_idx(d.origin()).ok_or_else(|| BuildError::UnknownNode(d.origin().into()))?;
        let destination = net
            .node_idx(d.destination())
            .ok_or_else(|| BuildError::UnknownNode(d.destination().into()))?;
        if paths.get(origin, destination).is_none_or(|p| p.is_empty()) {
            return Err(BuildError::EmptyPathSet {
                origin: d.origin().into(),
                destination: d.destination().into(),
            });
        }
        ods.push(Od {
            demand: k,
            origin,
            destination,
        });
    }
    let columns = ods.len() * data.len() * width;
    if columns > params.max_columns {
        return Err(BuildError::DimensionOverflow {
            columns,
            cap: params.max_columns,
        });
    }
    let pairs: Vec<(usize, usize)> = (0..data.len())
        .flat_map(|w| ods.iter().map(move |o| (w, o.demand)))
        .collect();
    let map = VariableMap::new(layout, &pairs);
    let layout = &map.layout;

    let mut model = MilpModel::new("smifr");
    for (b, &(w, k)) in pairs.iter().enumerate() {
        let dem = &net.demands()[k];
        let d = dem.shipments as f64;
        let wt = weights[w];
        for off in 0..width {
            let kind = layout.kind_at(off);
            let key = VarKey {
                kind,
                demand: k,
                scenario: w,
            };
            let (cost, upper, integer) = match kind {
                VarKind::Flow(l) | VarKind::RailFlow(l) => (wt * d * net.link_cost(l, &dem.commodity), 1.0, false),
                VarKind::Transfer(s) => (wt * d * net.transfer_cost(s, &dem.commodity), 1.0, false),
                VarKind::Shortfall => (wt * params.penalty, d, params.integer_shortfall),
                _ => (0.0, 1.0, true),
            };
            let j = model.add_column(key.to_string(), cost, 0.0, upper, integer);
            debug_assert_eq!(j, b * width + off);
        }
    }

    let hw_links = |v: usize, out: bool| -> Vec<usize> {
        let ls = if out { net.outgoing(v) } else { net.incoming(v) };
        ls.iter().copied().filter(|&l| net.link(l).mode == Mode::Highway).collect()
    };
    let rail_links = |v: usize, out: bool| -> Vec<usize> {
        let ls = if out { net.outgoing(v) } else { net.incoming(v) };
        ls.iter().copied().filter(|&l| net.link(l).mode == Mode::Rail).collect()
    };
    let highway_nodes = net.nodes_of_kind(NodeKind::HighwayIntersection);
    let rail_nodes = net.nodes_of_kind(NodeKind::RailJunction);
    let eps = params.epsilon;
    let xi_coupling = if params.tighten_big_m { 1.0 } else { params.big_m };
    let mut capacity_rows = Vec::new();

    for (w, sd) in data.iter().enumerate() {
        for od in &ods {
            let (k, o, t) = (od.demand, od.origin, od.destination);
            let b = map.block(k, w).expect("block exists");
            let col = |kind: VarKind| b.start + layout.offset(kind).expect("kind in layout");
            let x = |l: usize| col(VarKind::Flow(l));
            let xr = |l: usize| col(VarKind::RailFlow(l));
            let dem = &net.demands()[k];
            let d = dem.shipments as f64;
            let push = |model: &mut MilpModel, fam: Family, elem: &str, coefs: Vec<(usize, f64)>, sense: Sense, rhs: f64| {
                if !coefs.is_empty() {
                    model.add_row(row_name(fam, elem, k, w), coefs, sense, rhs);
                }
            };
            let net_flow = |v: usize, xf: &dyn Fn(usize) -> usize, rail: bool| -> Vec<(usize, f64)> {
                let (outs, ins) = if rail {
                    (rail_links(v, true), rail_links(v, false))
                } else {
                    (hw_links(v, true), hw_links(v, false))
                };
                outs.iter()
                    .map(|&l| (xf(l), 1.0))
                    .chain(ins.iter().map(|&l| (xf(l), -1.0)))
                    .collect()
            };

            for &i in &highway_nodes {
                let coefs = net_flow(i, &x, false);
                let (sense, rhs) = if i == o {
                    (Sense::Le, 1.0)
                } else if i == t {
                    (Sense::Ge, -1.0)
                } else {
                    (Sense::Eq, 0.0)
                };
                push(&mut model, Family::HighwayConservation, &net.node(i).id, coefs, sense, rhs);
            }
            let balance: Vec<(usize, f64)> = hw_links(o, true)
                .iter()
                .map(|&l| (x(l), 1.0))
                .chain(hw_links(t, false).iter().map(|&l| (x(l), -1.0)))
                .collect();
            push(&mut model, Family::OdBalance, "od", balance, Sense::Eq, 0.0);
            for &l in &layout.highway {
                if let Some(r) = net.reverse_link(l) {
                    if net.link(r).mode == Mode::Highway {
                        let coefs = vec![(x(l), 1.0), (col(VarKind::LinkUse(r)), 1.0)];
                        push(&mut model, Family::AntiParallel, &net.link(l).id, coefs, Sense::Le, 1.0);
                    }
                }
            }
            let reentry: Vec<(usize, f64)> = hw_links(o, true)
                .iter()
                .map(|&l| (x(l), 1.0))
                .chain(hw_links(o, false).iter().map(|&l| (x(l), -params.big_m)))
                .collect();
            push(&mut model, Family::OriginReentry, "origin", reentry, Sense::Ge, 0.0);
            for &i in &rail_nodes {
                let coefs = net_flow(i, &xr, true);
                push(&mut model, Family::RailConservation, &net.node(i).id, coefs, Sense::Eq, 0.0);
            }
            for &s in &layout.terminals {
                let id = &net.node(s).id;
                let hw = net_flow(s, &x, false);
                let rl = net_flow(s, &xr, true);
                let y = col(VarKind::TerminalUse(s));
                let f = col(VarKind::Transfer(s));
                let mut both = hw.clone();
                both.extend_from_slice(&rl);
                push(&mut model, Family::TerminalConservation, id, both, Sense::Eq, 0.0);
                if !rl.is_empty() {
                    let mut lo = rl.clone();
                    lo.push((y, xi_coupling));
                    push(&mut model, Family::TerminalCoupling, &format!("{id}:lo"), lo, Sense::Ge, 0.0);
                    let mut hi = rl;
                    hi.push((y, -xi_coupling));
                    push(&mut model, Family::TerminalCoupling, &format!("{id}:hi"), hi, Sense::Le, 0.0);
                }
                let mut lo = hw.clone();
                lo.push((f, 1.0));
                push(&mut model, Family::TransferEnvelope, &format!("{id}:lo"), lo, Sense::Ge, 0.0);
                let mut hi = hw;
                hi.push((f, -1.0));
                push(&mut model, Family::TransferEnvelope, &format!("{id}:hi"), hi, Sense::Le, 0.0);
                push(&mut model, Family::TransferSandwich, &format!("{id}:lo"), vec![(y, eps), (f, -1.0)], Sense::Le, 0.0);
                push(&mut model, Family::TransferSandwich, &format!("{id}:hi"), vec![(f, 1.0), (y, -1.0)], Sense::Le, 0.0);
            }
            for &l in &layout.highway {
                let id = &net.link(l).id;
                let dl = col(VarKind::LinkUse(l));
                push(&mut model, Family::HighwayLinking, &format!("{id}:lo"), vec![(dl, eps), (x(l), -1.0)], Sense::Le, 0.0);
                push(&mut model, Family::HighwayLinking, &format!("{id}:hi"), vec![(x(l), 1.0), (dl, -1.0)], Sense::Le, 0.0);
            }
            for &l in &layout.rail {
                let id = &net.link(l).id;
                let dl = col(VarKind::RailUse(l));
                push(&mut model, Family::RailLinking, &format!("{id}:lo"), vec![(dl, eps), (xr(l), -1.0)], Sense::Le, 0.0);
                push(&mut model, Family::RailLinking, &format!("{id}:hi"), vec![(xr(l), 1.0), (dl, -1.0)], Sense::Le, 0.0);
            }
            if with_deadlines {
                let set = paths.get(o, t).expect("checked above");
                for (p, path) in set.paths.iter().enumerate() {
                    let (coefs, full) = deadline_row(net, layout, path, sd, &col);
                    if params.prune_deadline_rows && full <= dem.deadline {
                        continue;
                    }
                    push(&mut model, Family::Deadline, &format!("p{p}"), coefs, Sense::Le, dem.deadline);
                }
            }
            let mut short: Vec<(usize, f64)> = hw_links(t, false).iter().map(|&l| (x(l), d)).collect();
            short.push((col(VarKind::Shortfall), 1.0));
            push(&mut model, Family::Shortfall, "destination", short, Sense::Eq, d);
        }

        // Capacity rows across all blocks of this scenario.
        let blocks: Vec<_> = map.blocks.iter().filter(|b| b.scenario == w).copied().collect();
        let add_cap = |model: &mut MilpModel, fam: Family, id: &str, kind: &dyn Fn(usize) -> VarKind, e: usize, cap: f64| -> Option<usize> {
            if !cap.is_finite() || blocks.is_empty() {
                return None;
            }
            let coefs = blocks
                .iter()
                .map(|b| {
                    let d = net.demands()[b.demand].shipments as f64;
                    (b.start + layout.offset(kind(e)).expect("kind in layout"), d)
                })
                .collect();
            Some(model.add_row(format!("{}[{id},w{w}]", fam.as_str()), coefs, Sense::Le, cap))
        };
        for &l in &layout.highway {
            if let Some(row) = add_cap(&mut model, Family::HighwayCapacity, &net.link(l).id, &VarKind::Flow, l, sd.link_capacity[l]) {
                capacity_rows.push(CapacityRow::Link { scenario: w, link: l, row });
            }
        }
        for &l in &layout.rail {
            if let Some(row) = add_cap(&mut model, Family::RailCapacity, &net.link(l).id, &VarKind::RailFlow, l, sd.link_capacity[l]) {
                capacity_rows.push(CapacityRow::Link { scenario: w, link: l, row });
            }
        }
        for &s in &layout.terminals {
            if let Some(row) = add_cap(
                &mut model,
                Family::TerminalCapacity,
                &net.node(s).id,
                &VarKind::Transfer,
                s,
                sd.terminal_capacity[s],
            ) {
                capacity_rows.push(CapacityRow::Terminal { scenario: w, node: s, row });
            }
        }
    }
    Ok((model, map, capacity_rows))
}

/// Coefficients of the deadline row for `path` and its left-hand side with
/// every indicator at 1.
fn deadline_row(
    net: &Network,
    layout: &Layout,
    path: &crate::network::Path,
    sd: &ScenarioData,
    col: &dyn Fn(VarKind) -> usize,
) -> (Vec<(usize, f64)>, f64) {
    let mut coefs = Vec::new();
    let mut full = 0.0;
    for &l in &path.links {
        let t = sd.link_time[l];
        full += t;
        let kind = match net.link(l).mode {
            Mode::Highway => VarKind::LinkUse(l),
            Mode::Rail => VarKind::RailUse(l),
        };
        coefs.push((col(kind), t));
    }
    for &v in &path.nodes {
        if layout.terminal_pos(v).is_some() {
            let t = sd.terminal_time[v];
            full += t;
            coefs.push((col(VarKind::TerminalUse(v)), t));
        }
    }
    (coefs, full)
}

/// Time of `path` with indicators taken from a block's values.
pub(crate) fn deadline_lhs(net: &Network, layout: &Layout, path: &crate::network::Path, sd: &ScenarioData, values: &super::BlockValues) -> f64 {
    let mut lhs = 0.0;
    for &l in &path.links {
        let ind = match net.link(l).mode {
            Mode::Highway => values.link_use[layout.highway_pos(l).expect("highway link")],
            Mode::Rail => values.rail_use[layout.rail_pos(l).expect("rail link")],
        };
        lhs += ind * sd.link_time[l];
    }
    for &v in &path.nodes {
        if let Some(p) = layout.terminal_pos(v) {
            lhs += values.terminal_use[p] * sd.terminal_time[v];
        }
    }
    lhs
}
