//! Recourse: cost a frozen routing structure under new scenarios.
//!
//! The indicators (link use, rail use, terminal use) are fixed at the
//! candidate's values and substituted out, rows left with one column become
//! bounds, and the remaining LP is re-solved per scenario from the previous
//! basis with only capacities and column bounds changing. A demand whose
//! frozen structure breaks its deadline under a scenario is shed there: its
//! indicators drop to zero and all its shipments are penalized.

use serde::{Deserialize, Serialize};

use crate::network::{Network, PathSets};
use crate::scenario::Scenario;
use crate::solver::{LpStatus, MilpModel, Row, SolveOptions};
use crate::solver::simplex::{Engine, LpData};

use super::build::deadline_lhs;
use super::{assemble, BlockValues, BuildError, CapacityRow, Layout, ModelParams, ScenarioData, VarKind, VariableMap};

/// Frozen indicator values of one demand block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrozenBlock {
    pub demand: usize,
    pub link_use: Vec<bool>,
    pub rail_use: Vec<bool>,
    pub terminal_use: Vec<bool>,
}

/// The routing structure of a candidate solution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Structure {
    pub blocks: Vec<FrozenBlock>,
}

impl Structure {
    pub fn from_blocks(values: &[BlockValues]) -> Self {
        let on = |v: &[f64]| v.iter().map(|&x| x > 0.5).collect();
        Self {
            blocks: values
                .iter()
                .map(|b| FrozenBlock {
                    demand: b.demand,
                    link_use: on(&b.link_use),
                    rail_use: on(&b.rail_use),
                    terminal_use: on(&b.terminal_use),
                })
                .collect(),
        }
    }

    pub fn from_solution(map: &VariableMap, values: &[f64], scenario: usize) -> Self {
        Self::from_blocks(&map.scenario_values(values, scenario))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseOutcome {
    pub cost: f64,
    /// Unsatisfied shipments.
    pub unmet: f64,
    /// The LP had no solution; the cost is the full penalty.
    pub infeasible: bool,
    /// Demand records shed for a deadline violation.
    pub shed: Vec<usize>,
    pub blocks: Vec<BlockValues>,
}

struct BlockInfo {
    demand: usize,
    shipments: f64,
    frozen: BlockValues,
    /// Reduced columns of the block other than the shortfall.
    cols: Vec<usize>,
}

enum CapTarget {
    Row { row: usize, constant: f64 },
    Constant(f64),
}

/// A candidate's recourse LP, ready to be solved for many scenarios.
pub struct RecourseEvaluator<'a> {
    net: &'a Network,
    paths: &'a PathSets,
    layout: Layout,
    full: MilpModel,
    map: VariableMap,
    reduced: MilpModel,
    /// Full column of each reduced column.
    full_of: Vec<usize>,
    blocks: Vec<BlockInfo>,
    caps: Vec<(CapacityRow, CapTarget)>,
    template_infeasible: bool,
    total_penalty: f64,
    total_shipments: f64,
}

const TEMPLATE_CAPACITY: f64 = 1e30;
const FEAS_TOL: f64 = 1e-9;

impl<'a> RecourseEvaluator<'a> {
    /// `replay` fixes the flow fractions too (from the given block values)
    /// instead of re-optimizing them.
    pub fn new(
        net: &'a Network,
        paths: &'a PathSets,
        params: &ModelParams,
        structure: &Structure,
        replay: Option<&[BlockValues]>,
    ) -> Result<Self, BuildError> {
        let params = ModelParams {
            integer_shortfall: false,
            scenario_weights: None,
            ..params.clone()
        };
        let n_nodes = net.nodes().len();
        let template = ScenarioData {
            link_capacity: vec![TEMPLATE_CAPACITY; net.links().len()],
            link_time: vec![1.0; net.links().len()],
            terminal_capacity: vec![TEMPLATE_CAPACITY; n_nodes],
            terminal_time: vec![1.0; n_nodes],
        };
        let (full, map, cap_rows) = assemble(net, paths, &[template], &[1.0], &params, false)?;
        let layout = map.layout.clone();
        let width = layout.width();

        // Fixed values of the indicator columns.
        let mut fixed: Vec<Option<f64>> = vec![None; full.num_cols()];
        let mut lower: Vec<f64> = full.columns.iter().map(|c| c.lower).collect();
        let mut upper: Vec<f64> = full.columns.iter().map(|c| c.upper).collect();
        let mut frozen_values = Vec::new();
        for b in &map.blocks {
            let mut fv = BlockValues::zeros(&layout, b.demand);
            if let Some(fb) = structure.blocks.iter().find(|f| f.demand == b.demand) {
                let as_f = |v: &[bool]| v.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect::<Vec<_>>();
                fv.link_use = as_f(&fb.link_use);
                fv.rail_use = as_f(&fb.rail_use);
                fv.terminal_use = as_f(&fb.terminal_use);
            }
            if let Some(rv) = replay.and_then(|r| r.iter().find(|v| v.demand == b.demand)) {
                fv.flow.clone_from(&rv.flow);
                fv.rail_flow.clone_from(&rv.rail_flow);
                fv.transfer.clone_from(&rv.transfer);
            }
            let vals = fv.to_vec();
            for off in 0..width {
                let j = b.start + off;
                let kind = layout.kind_at(off);
                if kind.is_indicator() {
                    fixed[j] = Some(vals[off]);
                } else if replay.is_some() && kind != VarKind::Shortfall {
                    lower[j] = vals[off];
                    upper[j] = vals[off];
                }
            }
            frozen_values.push(fv);
        }

        let mut reduced = MilpModel::new("recourse");
        let mut red_of = vec![usize::MAX; full.num_cols()];
        let mut full_of = Vec::new();
        for (j, c) in full.columns.iter().enumerate() {
            if fixed[j].is_none() {
                red_of[j] = reduced.add_column(c.name.clone(), c.cost, lower[j], upper[j], false);
                full_of.push(j);
            }
        }
        reduced.objective_offset = full
            .columns
            .iter()
            .zip(&fixed)
            .map(|(c, f)| f.map_or(0.0, |v| c.cost * v))
            .sum();

        let mut cap_of_row = vec![None; full.num_rows()];
        for (k, cr) in cap_rows.iter().enumerate() {
            let row = match *cr {
                CapacityRow::Link { row, .. } | CapacityRow::Terminal { row, .. } => row,
            };
            cap_of_row[row] = Some(k);
        }
        let mut caps: Vec<Option<(CapacityRow, CapTarget)>> = (0..cap_rows.len()).map(|_| None).collect();
        let mut template_infeasible = false;
        for (i, row) in full.rows.iter().enumerate() {
            let mut constant = 0.0;
            let mut coefs = Vec::new();
            for &(j, a) in &row.coefs {
                match fixed[j] {
                    Some(v) => constant += a * v,
                    None => coefs.push((red_of[j], a)),
                }
            }
            let (lo, hi) = row.bounds();
            let (lo, hi) = (lo - constant, hi - constant);
            if let Some(k) = cap_of_row[i] {
                let target = if coefs.is_empty() {
                    CapTarget::Constant(constant)
                } else {
                    let r = reduced.rows.len();
                    reduced.rows.push(Row {
                        name: row.name.clone(),
                        coefs,
                        sense: row.sense,
                        rhs: row.rhs - constant,
                        range: row.range,
                    });
                    CapTarget::Row { row: r, constant }
                };
                caps[k] = Some((cap_rows[k], target));
                continue;
            }
            match coefs.len() {
                0 => {
                    if lo > FEAS_TOL || hi < -FEAS_TOL {
                        template_infeasible = true;
                    }
                }
                1 => {
                    let (j, a) = coefs[0];
                    let (mut l, mut u) = if a > 0.0 { (lo / a, hi / a) } else { (hi / a, lo / a) };
                    let col = &mut reduced.columns[j];
                    l = l.max(col.lower);
                    u = u.min(col.upper);
                    if l > u + FEAS_TOL {
                        template_infeasible = true;
                    }
                    if l > u {
                        u = l;
                    }
                    col.lower = l;
                    col.upper = u;
                }
                _ => {
                    reduced.rows.push(Row {
                        name: row.name.clone(),
                        coefs,
                        sense: row.sense,
                        rhs: row.rhs - constant,
                        range: row.range,
                    });
                }
            }
        }

        let blocks = map
            .blocks
            .iter()
            .zip(frozen_values)
            .map(|(b, frozen)| {
                let u = b.start + width - 1;
                let cols = (b.start..u).filter(|&j| fixed[j].is_none()).map(|j| red_of[j]).collect();
                BlockInfo {
                    demand: b.demand,
                    shipments: net.demands()[b.demand].shipments as f64,
                    frozen,
                    cols,
                }
            })
            .collect::<Vec<_>>();
        let total_shipments: f64 = blocks.iter().map(|b| b.shipments).sum();
        Ok(Self {
            net,
            paths,
            layout,
            full,
            map,
            reduced,
            full_of,
            blocks,
            caps: caps.into_iter().map(|c| c.expect("every capacity row seen")).collect(),
            template_infeasible,
            total_penalty: params.penalty * total_shipments,
            total_shipments,
        })
    }

    /// Number of columns and rows of the reduced LP.
    pub fn reduced_size(&self) -> (usize, usize) {
        (self.reduced.num_cols(), self.reduced.num_rows())
    }

    fn shed_outcome(&self) -> RecourseOutcome {
        RecourseOutcome {
            cost: self.total_penalty,
            unmet: self.total_shipments,
            infeasible: true,
            shed: Vec::new(),
            blocks: self
                .blocks
                .iter()
                .map(|b| {
                    let mut v = BlockValues::zeros(&self.layout, b.demand);
                    v.shortfall = b.shipments;
                    v
                })
                .collect(),
        }
    }

    /// Evaluate every scenario in order, warm-starting each LP from the
    /// previous one.
    pub fn evaluate(&self, scenarios: &[Scenario], opts: &SolveOptions) -> Result<Vec<RecourseOutcome>, BuildError> {
        let lp = LpData::new(&self.reduced);
        let mut engine = Engine::new(&lp, opts);
        let mut out = Vec::with_capacity(scenarios.len());
        for sc in scenarios {
            let sd = ScenarioData::new(self.net, sc)?;
            out.push(self.evaluate_one(&mut engine, &sd));
        }
        Ok(out)
    }

    fn evaluate_one(&self, engine: &mut Engine<'_>, sd: &ScenarioData) -> RecourseOutcome {
        if self.template_infeasible {
            return self.shed_outcome();
        }
        let mut shed = Vec::new();
        for (bi, b) in self.blocks.iter().enumerate() {
            let dem = &self.net.demands()[b.demand];
            let o = self.net.node_idx(dem.origin()).expect("checked at build");
            let t = self.net.node_idx(dem.destination()).expect("checked at build");
            let late = self.paths.get(o, t).is_some_and(|set| {
                set.paths
                    .iter()
                    .any(|p| deadline_lhs(self.net, &self.layout, p, sd, &b.frozen) > dem.deadline + FEAS_TOL)
            });
            for &j in &b.cols {
                let c = &self.reduced.columns[j];
                if late {
                    engine.set_bounds(j, 0.0, 0.0);
                } else {
                    engine.set_bounds(j, c.lower, c.upper);
                }
            }
            if late {
                shed.push(bi);
            }
        }
        for (cr, target) in &self.caps {
            let cap = match *cr {
                CapacityRow::Link { link, .. } => sd.link_capacity[link],
                CapacityRow::Terminal { node, .. } => sd.terminal_capacity[node],
            };
            match *target {
                CapTarget::Row { row, constant } => engine.set_row_bounds(row, f64::NEG_INFINITY, cap - constant),
                CapTarget::Constant(c) => {
                    if c > cap + FEAS_TOL {
                        return self.shed_outcome();
                    }
                }
            }
        }
        if engine.solve() != LpStatus::Optimal {
            return self.shed_outcome();
        }
        let mut full = vec![0.0; self.full.num_cols()];
        for (bi, b) in self.blocks.iter().enumerate() {
            let start = self.map.blocks[bi].start;
            if !shed.contains(&bi) {
                let vals = b.frozen.to_vec();
                for (off, v) in vals.iter().enumerate() {
                    if self.layout.kind_at(off).is_indicator() {
                        full[start + off] = *v;
                    }
                }
            }
        }
        for (r, &j) in self.full_of.iter().enumerate() {
            full[j] = engine.value(r);
        }
        let blocks = self.map.scenario_values(&full, 0);
        RecourseOutcome {
            cost: self.full.objective_value(&full),
            unmet: blocks.iter().map(|b| b.shortfall).sum::<f64>() + 0.0,
            infeasible: false,
            shed: shed.iter().map(|&bi| self.blocks[bi].demand).collect(),
            blocks,
        }
    }
}
