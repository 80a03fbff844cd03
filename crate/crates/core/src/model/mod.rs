//! The linearized stochastic routing MILP.
//!
//! One block of columns is created for every demand record with positive
//! shipments and every scenario. Within a block the columns are laid out as
//!
//! ```text
//! X (highway links) | Xr (rail links) | F (terminals) | D (highway links) | Dr (rail links) | Y (terminals) | U
//! ```
//!
//! so a block has `2(|Ah| + |Ar| + |S|) + 1` columns and blocks are ordered
//! scenario-major, then by demand record.
//!
//! Rows per block, assuming every node touches at least one link of the
//! mode its conservation row is written for:
//!
//! | family | rows |
//! |---|---|
//! | highway conservation | `|H|` |
//! | OD balance | 1 |
//! | anti-parallel | highway links whose reverse link exists |
//! | origin re-entry | 1 |
//! | rail conservation | `|R|` |
//! | terminal conservation | `|S|` |
//! | terminal coupling | `2|S|` |
//! | transfer envelope | `2|S|` |
//! | transfer sandwich | `2|S|` |
//! | highway linking | `2|Ah|` |
//! | rail linking | `2|Ar|` |
//! | deadline | `|P|`, minus paths whose full time meets the deadline when pruning is on |
//! | shortfall | 1 |
//!
//! and per scenario one capacity row for each highway link, rail link and
//! terminal with finite capacity.
//!
//! With an integer shortfall and at least two blocks in a scenario,
//! [`build_smifr`] appends one more integer column per scenario after all
//! blocks, `Utot[w]`, tied to the sum of the scenario's `U` columns by an
//! equality row. It leaves the feasible set unchanged and carries a higher
//! branching priority: when several commodities compete for one bottleneck
//! the relaxation can spread a fractional shortfall over them in many
//! equivalent ways, and branching on the total settles that at once.

mod audit;
mod build;
mod recourse;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Mode, Network, NodeKind};
use crate::scenario::Scenario;

pub use audit::{audit_solution, Family, Violation};
pub use build::build_smifr;
pub(crate) use build::{assemble, CapacityRow};
pub use recourse::{FrozenBlock, RecourseEvaluator, RecourseOutcome, Structure};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("no paths from `{origin}` to `{destination}`")]
    EmptyPathSet { origin: String, destination: String },
    #[error("model would have {columns} columns, above the cap of {cap}")]
    DimensionOverflow { columns: usize, cap: usize },
    #[error("scenario `{scenario}` has no realization for `{element}`")]
    MissingRealization { scenario: String, element: String },
    #[error("at least one scenario is required")]
    NoScenarios,
    #[error("demand endpoint `{0}` is not a network node")]
    UnknownNode(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    /// Cost per unsatisfied shipment.
    pub penalty: f64,
    /// Big-M of the origin re-entry rows and, untightened, of the terminal
    /// coupling rows.
    pub big_m: f64,
    /// Minimum fraction on a used link or terminal.
    pub epsilon: f64,
    /// Scenario probabilities; uniform when absent.
    pub scenario_weights: Option<Vec<f64>>,
    /// Keep the shortfall columns integer. Off gives a continuous shortfall.
    pub integer_shortfall: bool,
    /// Use 1 instead of `big_m` in the terminal coupling rows; the rail net
    /// flow of a fraction can never exceed 1 in magnitude.
    pub tighten_big_m: bool,
    /// Skip deadline rows that hold even with every indicator on the path
    /// set to 1.
    pub prune_deadline_rows: bool,
    /// Add the per-scenario total shortfall column described in the module
    /// docs.
    pub aggregate_shortfall: bool,
    pub max_columns: usize,
    /// Tolerance used by the solution audit.
    pub audit_tol: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            penalty: 10_000.0,
            big_m: 1e6,
            epsilon: 1e-4,
            scenario_weights: None,
            integer_shortfall: true,
            tighten_big_m: true,
            prune_deadline_rows: true,
            aggregate_shortfall: true,
            max_columns: 500_000,
            audit_tol: 1e-6,
        }
    }
}

impl ModelParams {
    /// Check the parameters and return the scenario weights to use.
    pub fn weights(&self, net: &Network, scenarios: usize) -> Result<Vec<f64>, BuildError> {
        let bad = |m: String| Err(BuildError::InvalidParams(m));
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return bad(format!("penalty must be positive, got {}", self.penalty));
        }
        if !(self.big_m >= net.links().len() as f64) || !self.big_m.is_finite() {
            return bad(format!("big-M {} is below the link count {}", self.big_m, net.links().len()));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("epsilon must lie in (0, 1], got {}", self.epsilon));
        }
        if scenarios == 0 {
            return Err(BuildError::NoScenarios);
        }
        match &self.scenario_weights {
            None => Ok(vec![1.0 / scenarios as f64; scenarios]),
            Some(w) => {
                if w.len() != scenarios {
                    return bad(format!("{} weights for {} scenarios", w.len(), scenarios));
                }
                if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                    return bad("weights must be nonnegative".into());
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("weights sum to {total}, not 1"));
                }
                Ok(w.clone())
            }
        }
    }
}

/// Scenario realizations indexed by link and node position.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioData {
    pub link_capacity: Vec<f64>,
    pub link_time: Vec<f64>,
    /// Entries for non-terminal nodes are unused.
    pub terminal_capacity: Vec<f64>,
    pub terminal_time: Vec<f64>,
}

impl ScenarioData {
    pub fn new(net: &Network, sc: &Scenario) -> Result<Self, BuildError> {
        let missing = |element: &str| BuildError::MissingRealization {
            scenario: sc.id.clone(),
            element: element.to_string(),
        };
        let mut link_capacity = Vec::with_capacity(net.links().len());
        let mut link_time = Vec::with_capacity(net.links().len());
        for l in net.links() {
            link_capacity.push(*sc.link_capacity.get(&l.id).ok_or_else(|| missing(&l.id))?);
            link_time.push(*sc.link_time.get(&l.id).ok_or_else(|| missing(&l.id))?);
        }
        let mut terminal_capacity = vec![0.0; net.nodes().len()];
        let mut terminal_time = vec![0.0; net.nodes().len()];
        for s in net.terminals() {
            let id = &net.node(s).id;
            terminal_capacity[s] = *sc.terminal_capacity.get(id).ok_or_else(|| missing(id))?;
            terminal_time[s] = *sc.terminal_time.get(id).ok_or_else(|| missing(id))?;
        }
        Ok(Self {
            link_capacity,
            link_time,
            terminal_capacity,
            terminal_time,
        })
    }
}

const NONE: usize = usize::MAX;

/// Positions of links and terminals inside a block.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub highway: Vec<usize>,
    pub rail: Vec<usize>,
    pub terminals: Vec<usize>,
    hw_pos: Vec<usize>,
    rail_pos: Vec<usize>,
    term_pos: Vec<usize>,
}

impl Layout {
    pub fn new(net: &Network) -> Self {
        let highway = net.links_of_mode(Mode::Highway);
        let rail = net.links_of_mode(Mode::Rail);
        let terminals = net.nodes_of_kind(NodeKind::IntermodalTerminal);
        let mut hw_pos = vec![NONE; net.links().len()];
        let mut rail_pos = vec![NONE; net.links().len()];
        let mut term_pos = vec![NONE; net.nodes().len()];
        for (p, &l) in highway.iter().enumerate() {
            hw_pos[l] = p;
        }
        for (p, &l) in rail.iter().enumerate() {
            rail_pos[l] = p;
        }
        for (p, &s) in terminals.iter().enumerate() {
            term_pos[s] = p;
        }
        Self {
            highway,
            rail,
            terminals,
            hw_pos,
            rail_pos,
            term_pos,
        }
    }

    pub fn width(&self) -> usize {
        2 * (self.highway.len() + self.rail.len() + self.terminals.len()) + 1
    }

    pub fn highway_pos(&self, link: usize) -> Option<usize> {
        self.hw_pos.get(link).copied().filter(|&p| p != NONE)
    }

    pub fn rail_pos(&self, link: usize) -> Option<usize> {
        self.rail_pos.get(link).copied().filter(|&p| p != NONE)
    }

    pub fn terminal_pos(&self, node: usize) -> Option<usize> {
        self.term_pos.get(node).copied().filter(|&p| p != NONE)
    }

    /// Offset of a variable inside its block.
    pub fn offset(&self, kind: VarKind) -> Option<usize> {
        let (nh, nr, ns) = (self.highway.len(), self.rail.len(), self.terminals.len());
        match kind {
            VarKind::Flow(l) => self.highway_pos(l),
            VarKind::RailFlow(l) => self.rail_pos(l).map(|p| nh + p),
            VarKind::Transfer(s) => self.terminal_pos(s).map(|p| nh + nr + p),
            VarKind::LinkUse(l) => self.highway_pos(l).map(|p| nh + nr + ns + p),
            VarKind::RailUse(l) => self.rail_pos(l).map(|p| 2 * nh + nr + ns + p),
            VarKind::TerminalUse(s) => self.terminal_pos(s).map(|p| 2 * (nh + nr) + ns + p),
            VarKind::Shortfall => Some(self.width() - 1),
        }
    }

    fn kind_at(&self, offset: usize) -> VarKind {
        let (nh, nr, ns) = (self.highway.len(), self.rail.len(), self.terminals.len());
        let mut o = offset;
        if o < nh {
            return VarKind::Flow(self.highway[o]);
        }
        o -= nh;
        if o < nr {
            return VarKind::RailFlow(self.rail[o]);
        }
        o -= nr;
        if o < ns {
            return VarKind::Transfer(self.terminals[o]);
        }
        o -= ns;
        if o < nh {
            return VarKind::LinkUse(self.highway[o]);
        }
        o -= nh;
        if o < nr {
            return VarKind::RailUse(self.rail[o]);
        }
        o -= nr;
        if o < ns {
            return VarKind::TerminalUse(self.terminals[o]);
        }
        VarKind::Shortfall
    }
}

/// What a column means. Link and terminal payloads are network indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    /// Fraction on a highway link.
    Flow(usize),
    /// Fraction on a rail link.
    RailFlow(usize),
    /// Fraction transferred at a terminal.
    Transfer(usize),
    /// Unsatisfied shipments.
    Shortfall,
    /// Terminal selection indicator.
    TerminalUse(usize),
    /// Highway link indicator.
    LinkUse(usize),
    /// Rail link indicator.
    RailUse(usize),
}

impl VarKind {
    pub fn symbol(self) -> &'static str {
        match self {
            VarKind::Flow(_) => "X",
            VarKind::RailFlow(_) => "Xr",
            VarKind::Transfer(_) => "F",
            VarKind::Shortfall => "U",
            VarKind::TerminalUse(_) => "Y",
            VarKind::LinkUse(_) => "D",
            VarKind::RailUse(_) => "Dr",
        }
    }

    pub fn is_indicator(self) -> bool {
        matches!(self, VarKind::TerminalUse(_) | VarKind::LinkUse(_) | VarKind::RailUse(_))
    }
}

/// A column's semantic tuple: variable kind, demand record index, scenario
/// index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarKey {
    pub kind: VarKind,
    pub demand: usize,
    pub scenario: usize,
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[", self.kind.symbol())?;
        match self.kind {
            VarKind::Flow(e) | VarKind::RailFlow(e) | VarKind::LinkUse(e) | VarKind::RailUse(e) => {
                write!(f, "l{e},")?
            }
            VarKind::Transfer(s) | VarKind::TerminalUse(s) => write!(f, "n{s},")?,
            VarKind::Shortfall => {}
        }
        write!(f, "d{},w{}]", self.demand, self.scenario)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockRef {
    pub demand: usize,
    pub scenario: usize,
    pub start: usize,
}

/// Bidirectional map between column numbers and [`VarKey`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableMap {
    pub layout: Layout,
    pub blocks: Vec<BlockRef>,
    index: BTreeMap<(usize, usize), usize>,
}

impl VariableMap {
    pub(crate) fn new(layout: Layout, pairs: &[(usize, usize)]) -> Self {
        let w = layout.width();
        let blocks: Vec<BlockRef> = pairs
            .iter()
            .enumerate()
            .map(|(b, &(scenario, demand))| BlockRef {
                demand,
                scenario,
                start: b * w,
            })
            .collect();
        let index = blocks.iter().enumerate().map(|(b, r)| ((r.scenario, r.demand), b)).collect();
        Self { layout, blocks, index }
    }

    /// Columns covered by blocks. [`build_smifr`] may append more after them.
    pub fn num_columns(&self) -> usize {
        self.blocks.len() * self.layout.width()
    }

    pub fn block(&self, demand: usize, scenario: usize) -> Option<&BlockRef> {
        self.index.get(&(scenario, demand)).map(|&b| &self.blocks[b])
    }

    pub fn column(&self, key: VarKey) -> Option<usize> {
        let b = self.block(key.demand, key.scenario)?;
        Some(b.start + self.layout.offset(key.kind)?)
    }

    pub fn key(&self, column: usize) -> Option<VarKey> {
        let w = self.layout.width();
        let b = self.blocks.get(column / w)?;
        Some(VarKey {
            kind: self.layout.kind_at(column % w),
            demand: b.demand,
            scenario: b.scenario,
        })
    }

    /// Values of every block of `scenario`.
    pub fn scenario_values(&self, values: &[f64], scenario: usize) -> Vec<BlockValues> {
        self.blocks
            .iter()
            .filter(|b| b.scenario == scenario)
            .map(|b| BlockValues::from_slice(&self.layout, b.demand, &values[b.start..b.start + self.layout.width()]))
            .collect()
    }
}

/// Values of one block, indexed by layout position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockValues {
    pub demand: usize,
    pub flow: Vec<f64>,
    pub rail_flow: Vec<f64>,
    pub transfer: Vec<f64>,
    pub link_use: Vec<f64>,
    pub rail_use: Vec<f64>,
    pub terminal_use: Vec<f64>,
    pub shortfall: f64,
}

impl BlockValues {
    pub fn zeros(layout: &Layout, demand: usize) -> Self {
        let (nh, nr, ns) = (layout.highway.len(), layout.rail.len(), layout.terminals.len());
        Self {
            demand,
            flow: vec![0.0; nh],
            rail_flow: vec![0.0; nr],
            transfer: vec![0.0; ns],
            link_use: vec![0.0; nh],
            rail_use: vec![0.0; nr],
            terminal_use: vec![0.0; ns],
            shortfall: 0.0,
        }
    }

    pub fn from_slice(layout: &Layout, demand: usize, v: &[f64]) -> Self {
        let (nh, nr, ns) = (layout.highway.len(), layout.rail.len(), layout.terminals.len());
        let mut at = 0;
        // `+ 0.0` turns solver-produced negative zeros into plain zeros.
        let mut take = |k: usize| {
            let s: Vec<f64> = v[at..at + k].iter().map(|x| x + 0.0).collect();
            at += k;
            s
        };
        let flow = take(nh);
        let rail_flow = take(nr);
        let transfer = take(ns);
        let link_use = take(nh);
        let rail_use = take(nr);
        let terminal_use = take(ns);
        Self {
            demand,
            flow,
            rail_flow,
            transfer,
            link_use,
            rail_use,
            terminal_use,
            shortfall: v[at] + 0.0,
        }
    }

    /// Values in block column order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for part in [&self.flow, &self.rail_flow, &self.transfer, &self.link_use, &self.rail_use, &self.terminal_use] {
            v.extend_from_slice(part);
        }
        v.push(self.shortfall);
        v
    }
}
