//! Bounded-variable revised simplex.
//!
//! Every row `lo <= a·x <= hi` gets a logical `s = -a·x` with bounds
//! `[-hi, -lo]`, so the constraint matrix is `[A I]` with right-hand side 0
//! and the all-logical basis is the identity. The dual simplex (dual
//! steepest edge pricing, bound flipping ratio test with Harris tolerances)
//! does the heavy lifting; a primal simplex cleans up whenever the basis is
//! primal feasible but not dual feasible.

use serde::{Deserialize, Serialize};

use super::lu::BasisFactor;
use super::model::MilpModel;
use super::SolveOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// Basis descriptor: `head[i]` is the variable basic in position `i`;
/// `status` covers structurals `0..n` then logicals `n..n+m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub head: Vec<usize>,
    pub status: Vec<VarStatus>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    /// Row multipliers `y` with reduced costs `c - Aᵀy`.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
}

/// Sparse row-scaled copy of a model in computational form.
pub(crate) struct LpData {
    pub m: usize,
    pub n: usize,
    cstart: Vec<usize>,
    crow: Vec<usize>,
    cval: Vec<f64>,
    rstart: Vec<usize>,
    rcol: Vec<usize>,
    rval: Vec<f64>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    row_scale: Vec<f64>,
    pub offset: f64,
}

impl LpData {
    pub fn new(model: &MilpModel) -> Self {
        let n = model.num_cols();
        let m = model.num_rows();
        let mut row_scale = Vec::with_capacity(m);
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        let mut cost = Vec::with_capacity(n + m);
        for c in &model.columns {
            lower.push(c.lower);
            upper.push(c.upper);
            cost.push(c.cost);
        }
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (i, row) in model.rows.iter().enumerate() {
            merged.clear();
            merged.extend(row.coefs.iter().copied().filter(|&(_, a)| a != 0.0));
            merged.sort_by_key(|&(j, _)| j);
            merged.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            let big = merged.iter().fold(0.0f64, |acc, &(_, a)| acc.max(a.abs()));
            let sc = if big > 0.0 { (-big.log2().round()).exp2() } else { 1.0 };
            row_scale.push(sc);
            for &(j, a) in merged.iter() {
                if a != 0.0 {
                    triplets.push((i, j, a * sc));
                }
            }
            let (lo, hi) = row.bounds();
            lower.push(-hi * sc);
            upper.push(-lo * sc);
            cost.push(0.0);
        }
        let mut cstart = vec![0usize; n + 1];
        for &(_, j, _) in &triplets {
            cstart[j + 1] += 1;
        }
        for j in 0..n {
            cstart[j + 1] += cstart[j];
        }
        let mut fill = cstart.clone();
        let mut crow = vec![0; triplets.len()];
        let mut cval = vec![0.0; triplets.len()];
        for &(i, j, a) in &triplets {
            crow[fill[j]] = i;
            cval[fill[j]] = a;
            fill[j] += 1;
        }
        let mut rstart = vec![0usize; m + 1];
        for &(i, _, _) in &triplets {
            rstart[i + 1] += 1;
        }
        for i in 0..m {
            rstart[i + 1] += rstart[i];
        }
        let rcol = triplets.iter().map(|t| t.1).collect();
        let rval = triplets.iter().map(|t| t.2).collect();
        Self {
            m,
            n,
            cstart,
            crow,
            cval,
            rstart,
            rcol,
            rval,
            cost,
            lower,
            upper,
            row_scale,
            offset: model.objective_offset,
        }
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            (self.cstart[j]..self.cstart[j + 1]).map(|k| (self.crow[k], self.cval[k])).collect()
        } else {
            vec![(j - self.n, 1.0)]
        }
    }

    /// `y · a_j`.
    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            (self.cstart[j]..self.cstart[j + 1]).map(|k| self.cval[k] * y[self.crow[k]]).sum()
        } else {
            y[j - self.n]
        }
    }

    /// `rhs += scale * a_j`.
    fn add_column(&self, j: usize, scale: f64, rhs: &mut [f64]) {
        if j < self.n {
            for k in self.cstart[j]..self.cstart[j + 1] {
                rhs[self.crow[k]] += scale * self.cval[k];
            }
        } else {
            rhs[j - self.n] += scale;
        }
    }

    /// Logical bounds for row `i` given original activity bounds.
    pub fn logical_bounds(&self, i: usize, lo: f64, hi: f64) -> (f64, f64) {
        let sc = self.row_scale[i];
        (-hi * sc, -lo * sc)
    }
}

#[derive(Clone, Copy)]
struct Tol {
    primal: f64,
    dual: f64,
    pivot: f64,
}

enum Phase {
    Done,
    Infeasible,
    Unbounded,
    Limit,
    /// Numerical drift: go round the driver loop again.
    Restart,
}

pub(crate) struct Engine<'a> {
    lp: &'a LpData,
    tol: Tol,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    cost: Vec<f64>,
    cost_shifted: bool,
    head: Vec<usize>,
    pos: Vec<usize>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    d: Vec<f64>,
    y: Vec<f64>,
    dse: Vec<f64>,
    factor: BasisFactor,
    factored: bool,
    refactor_interval: usize,
    pub iterations: usize,
    iteration_limit: usize,
    degenerate_limit: usize,
    degenerate: usize,
}

const NONE: usize = usize::MAX;

fn default_status(lo: f64, hi: f64, dj: f64) -> VarStatus {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            if dj >= 0.0 {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            }
        }
        (true, false) => VarStatus::AtLower,
        (false, true) => VarStatus::AtUpper,
        (false, false) => VarStatus::Free,
    }
}

impl<'a> Engine<'a> {
    pub fn new(lp: &'a LpData, opts: &SolveOptions) -> Self {
        let (m, n) = (lp.m, lp.n);
        let mut e = Self {
            lp,
            tol: Tol {
                primal: opts.feasibility_tol,
                dual: opts.optimality_tol,
                pivot: 1e-9,
            },
            lower: lp.lower.clone(),
            upper: lp.upper.clone(),
            cost: lp.cost.clone(),
            cost_shifted: false,
            head: (n..n + m).collect(),
            pos: vec![NONE; n + m],
            status: vec![VarStatus::Basic; n + m],
            x: vec![0.0; n + m],
            d: vec![0.0; n + m],
            y: vec![0.0; m],
            dse: vec![1.0; m],
            factor: BasisFactor::empty(m),
            factored: false,
            refactor_interval: opts.refactor_interval.max(1),
            iterations: 0,
            iteration_limit: opts.iteration_limit,
            degenerate_limit: opts.degenerate_pivot_limit,
            degenerate: 0,
        };
        for i in 0..m {
            e.pos[n + i] = i;
        }
        for j in 0..n {
            e.status[j] = default_status(e.lower[j], e.upper[j], e.cost[j]);
            e.x[j] = e.nonbasic_value(j);
        }
        e
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lower[j],
            VarStatus::AtUpper => self.upper[j],
            VarStatus::Free => 0.0,
            VarStatus::Basic => self.x[j],
        }
    }

    /// Change the bounds of structural `j`, keeping a nonbasic variable on
    /// the same side where possible.
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lower[j] = lo;
        self.upper[j] = hi;
        if self.status[j] != VarStatus::Basic {
            let keep = match self.status[j] {
                VarStatus::AtLower => lo.is_finite(),
                VarStatus::AtUpper => hi.is_finite(),
                _ => false,
            };
            if !keep {
                self.status[j] = default_status(lo, hi, self.d[j]);
            }
            self.x[j] = self.nonbasic_value(j);
        }
    }

    /// Change the activity bounds of row `i` (original units).
    pub fn set_row_bounds(&mut self, i: usize, lo: f64, hi: f64) {
        let j = self.lp.n + i;
        let (l, u) = self.lp.logical_bounds(i, lo, hi);
        self.lower[j] = l;
        self.upper[j] = u;
        if self.status[j] != VarStatus::Basic {
            self.status[j] = default_status(l, u, self.d[j]);
            self.x[j] = self.nonbasic_value(j);
        }
    }

    pub fn basis(&self) -> Basis {
        Basis {
            head: self.head.clone(),
            status: self.status.clone(),
        }
    }

    pub fn load_basis(&mut self, basis: &Basis) {
        let (m, n) = (self.lp.m, self.lp.n);
        if basis.head.len() != m || basis.status.len() != n + m {
            return;
        }
        self.head.clone_from(&basis.head);
        self.status.clone_from(&basis.status);
        self.pos.iter_mut().for_each(|p| *p = NONE);
        for (i, &j) in self.head.iter().enumerate() {
            self.pos[j] = i;
            self.status[j] = VarStatus::Basic;
        }
        for j in 0..n + m {
            if self.pos[j] == NONE {
                if self.status[j] == VarStatus::Basic {
                    self.status[j] = default_status(self.lower[j], self.upper[j], 0.0);
                }
                let ok = match self.status[j] {
                    VarStatus::AtLower => self.lower[j].is_finite(),
                    VarStatus::AtUpper => self.upper[j].is_finite(),
                    VarStatus::Free => !self.lower[j].is_finite() && !self.upper[j].is_finite(),
                    VarStatus::Basic => false,
                };
                if !ok {
                    self.status[j] = default_status(self.lower[j], self.upper[j], 0.0);
                }
                self.x[j] = self.nonbasic_value(j);
            }
        }
        self.dse.iter_mut().for_each(|w| *w = 1.0);
        self.factored = false;
    }

    fn refactor(&mut self) {
        let (m, n) = (self.lp.m, self.lp.n);
        loop {
            let cols: Vec<Vec<(usize, f64)>> = self.head.iter().map(|&j| self.lp.column(j)).collect();
            match self.factor.factor(cols) {
                Ok(()) => break,
                Err(sing) => {
                    for (p, r) in sing.pairs {
                        let old = self.head[p];
                        let new = n + r;
                        debug_assert!(self.pos[new] == NONE);
                        self.head[p] = new;
                        self.pos[old] = NONE;
                        self.pos[new] = p;
                        self.status[new] = VarStatus::Basic;
                        let (lo, hi, v) = (self.lower[old], self.upper[old], self.x[old]);
                        self.status[old] = match (lo.is_finite(), hi.is_finite()) {
                            (true, true) => {
                                if (v - lo).abs() <= (hi - v).abs() {
                                    VarStatus::AtLower
                                } else {
                                    VarStatus::AtUpper
                                }
                            }
                            _ => default_status(lo, hi, 0.0),
                        };
                        self.x[old] = self.nonbasic_value(old);
                        self.dse[p] = 1.0;
                    }
                    let _ = m;
                }
            }
        }
        self.factored = true;
        self.compute_primal();
        self.compute_dual();
    }

    fn compute_primal(&mut self) {
        let (m, n) = (self.lp.m, self.lp.n);
        let mut rhs = self.factor.take_work();
        for j in 0..n + m {
            if self.pos[j] == NONE && self.x[j] != 0.0 {
                self.lp.add_column(j, -self.x[j], &mut rhs);
            }
        }
        let mut xb = vec![0.0; m];
        self.factor.ftran(&mut rhs, &mut xb);
        self.factor.give_work(rhs);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = xb[p];
        }
    }

    fn compute_dual(&mut self) {
        let (m, n) = (self.lp.m, self.lp.n);
        let mut cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        let mut y = std::mem::take(&mut self.y);
        self.factor.btran(&mut cb, &mut y);
        for j in 0..n + m {
            self.d[j] = if self.pos[j] == NONE {
                self.cost[j] - self.lp.dot_column(j, &y)
            } else {
                0.0
            };
        }
        self.y = y;
    }

    fn ftran_column(&mut self, j: usize) -> Vec<f64> {
        let mut rhs = self.factor.take_work();
        self.lp.add_column(j, 1.0, &mut rhs);
        let mut out = vec![0.0; self.lp.m];
        self.factor.ftran(&mut rhs, &mut out);
        self.factor.give_work(rhs);
        out
    }

    /// Row `r` of `B^{-1}` (by row index) and the pivot row `ρ [A I]` over
    /// all variables.
    fn pivot_row(&mut self, r: usize) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.lp.m, self.lp.n);
        let mut e = vec![0.0; m];
        e[r] = 1.0;
        let mut rho = vec![0.0; m];
        self.factor.btran(&mut e, &mut rho);
        let mut alpha = vec![0.0; n + m];
        for (i, &ri) in rho.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            for k in self.lp.rstart[i]..self.lp.rstart[i + 1] {
                alpha[self.lp.rcol[k]] += ri * self.lp.rval[k];
            }
            alpha[n + i] = ri;
        }
        (rho, alpha)
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lower[j] - self.tol.primal {
            self.lower[j] - v
        } else if v > self.upper[j] + self.tol.primal {
            v - self.upper[j]
        } else {
            0.0
        }
    }

    fn dual_infeasibility(&self, j: usize) -> f64 {
        let dj = self.d[j];
        match self.status[j] {
            VarStatus::Basic => 0.0,
            _ if self.lower[j] == self.upper[j] => 0.0,
            VarStatus::AtLower => (-dj).max(0.0),
            VarStatus::AtUpper => dj.max(0.0),
            VarStatus::Free => dj.abs(),
        }
    }

    fn max_primal_infeasibility(&self) -> f64 {
        self.head.iter().map(|&j| self.infeasibility(j)).fold(0.0, f64::max)
    }

    fn max_dual_infeasibility(&self) -> f64 {
        (0..self.x.len()).map(|j| self.dual_infeasibility(j)).fold(0.0, f64::max)
    }

    /// Make the nonbasic set dual feasible: boxed variables move to the
    /// bound matching their reduced cost, others get their cost shifted.
    fn make_dual_feasible(&mut self) {
        let mut moved = false;
        for j in 0..self.x.len() {
            if self.dual_infeasibility(j) <= self.tol.dual {
                continue;
            }
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_finite() && hi.is_finite() {
                self.status[j] = if self.d[j] >= 0.0 {
                    VarStatus::AtLower
                } else {
                    VarStatus::AtUpper
                };
                self.x[j] = self.nonbasic_value(j);
                moved = true;
            } else {
                self.cost[j] -= self.d[j];
                self.d[j] = 0.0;
                self.cost_shifted = true;
            }
        }
        if moved {
            self.compute_primal();
        }
    }

    fn restore_costs(&mut self) {
        if self.cost_shifted {
            self.cost.clone_from(&self.lp.cost);
            self.cost_shifted = false;
            self.compute_dual();
        }
    }

    pub fn solve(&mut self) -> LpStatus {
        self.degenerate = 0;
        if !self.factored || self.factor.num_etas() > 0 {
            self.refactor();
        } else {
            self.compute_primal();
            self.compute_dual();
        }
        for _round in 0..6 {
            self.make_dual_feasible();
            match self.dual_phase() {
                Phase::Infeasible => {
                    self.restore_costs();
                    return LpStatus::Infeasible;
                }
                Phase::Limit => {
                    self.restore_costs();
                    return LpStatus::IterationLimit;
                }
                Phase::Unbounded => unreachable!(),
                Phase::Done | Phase::Restart => {}
            }
            self.restore_costs();
            match self.primal_phase() {
                Phase::Unbounded => return LpStatus::Unbounded,
                Phase::Limit => return LpStatus::IterationLimit,
                Phase::Infeasible => unreachable!(),
                Phase::Done | Phase::Restart => {}
            }
            self.refactor();
            if self.max_primal_infeasibility() == 0.0 && self.max_dual_infeasibility() <= self.tol.dual {
                return LpStatus::Optimal;
            }
        }
        if self.max_primal_infeasibility() <= 10.0 * self.tol.primal
            && self.max_dual_infeasibility() <= 10.0 * self.tol.dual
        {
            LpStatus::Optimal
        } else {
            LpStatus::IterationLimit
        }
    }

    fn maybe_refactor(&mut self) -> bool {
        if self.factor.num_etas() >= self.refactor_interval {
            self.refactor();
            true
        } else {
            false
        }
    }

    fn dual_phase(&mut self) -> Phase {
        let (m, n) = (self.lp.m, self.lp.n);
        loop {
            if self.iterations >= self.iteration_limit {
                return Phase::Limit;
            }
            if self.maybe_refactor() && self.max_dual_infeasibility() > self.tol.dual {
                self.make_dual_feasible();
            }
            let bland = self.degenerate > self.degenerate_limit;
            // Leaving row.
            let mut r = NONE;
            let mut best = 0.0;
            for p in 0..m {
                let j = self.head[p];
                let inf = self.infeasibility(j);
                if inf <= 0.0 {
                    continue;
                }
                if bland {
                    if r == NONE || j < self.head[r] {
                        r = p;
                    }
                } else {
                    let score = inf * inf / self.dse[p];
                    if score > best {
                        best = score;
                        r = p;
                    }
                }
            }
            if r == NONE {
                return Phase::Done;
            }
            let leaving = self.head[r];
            let to_lower = self.x[leaving] < self.lower[leaving];
            let dir = if to_lower { -1.0 } else { 1.0 };
            let target = if to_lower { self.lower[leaving] } else { self.upper[leaving] };
            let slope = (self.x[leaving] - target).abs();

            let (rho, alpha) = self.pivot_row(r);
            let Some((q, theta, flips)) = self.dual_ratio(&alpha, dir, slope, bland) else {
                return Phase::Infeasible;
            };
            self.iterations += 1;

            // Dual update.
            if theta != 0.0 {
                for j in 0..n + m {
                    if self.pos[j] == NONE {
                        let a = alpha[j];
                        if a != 0.0 {
                            self.d[j] -= theta * dir * a;
                        }
                    }
                }
                self.degenerate = 0;
            } else {
                self.degenerate += 1;
            }
            self.d[leaving] = -dir * theta;
            self.d[q] = 0.0;

            // Bound flips.
            if !flips.is_empty() {
                let mut rhs = self.factor.take_work();
                for &j in &flips {
                    let (old, new_status) = match self.status[j] {
                        VarStatus::AtLower => (self.lower[j], VarStatus::AtUpper),
                        _ => (self.upper[j], VarStatus::AtLower),
                    };
                    self.status[j] = new_status;
                    self.x[j] = self.nonbasic_value(j);
                    self.lp.add_column(j, -(self.x[j] - old), &mut rhs);
                }
                let mut dx = vec![0.0; m];
                self.factor.ftran(&mut rhs, &mut dx);
                self.factor.give_work(rhs);
                for p in 0..m {
                    self.x[self.head[p]] += dx[p];
                }
            }

            // Primal step.
            let col = self.ftran_column(q);
            let arq = col[r];
            if arq.abs() < self.tol.pivot || (arq - alpha[q]).abs() > 1e-6 * (1.0 + arq.abs()) {
                // Inconsistent pivot: refactor and retry this iteration.
                self.refactor();
                self.make_dual_feasible();
                continue;
            }
            let theta_p = (self.x[leaving] - target) / arq;
            self.x[q] += theta_p;
            for p in 0..m {
                if col[p] != 0.0 {
                    self.x[self.head[p]] -= theta_p * col[p];
                }
            }
            self.x[leaving] = target;

            // Steepest-edge weights.
            let wr = self.dse[r];
            let mut tau_rhs = rho.clone();
            let mut tau = vec![0.0; m];
            self.factor.ftran(&mut tau_rhs, &mut tau);
            for p in 0..m {
                if p == r || col[p] == 0.0 {
                    continue;
                }
                let ratio = col[p] / arq;
                let w = self.dse[p] - 2.0 * ratio * tau[p] + ratio * ratio * wr;
                self.dse[p] = w.max(1e-4);
            }
            self.dse[r] = (wr / (arq * arq)).max(1e-4);

            // Basis change.
            self.status[leaving] = if to_lower { VarStatus::AtLower } else { VarStatus::AtUpper };
            self.pos[leaving] = NONE;
            self.status[q] = VarStatus::Basic;
            self.pos[q] = r;
            self.head[r] = q;
            self.factor.update(r, &col);
        }
    }

    /// Bound flipping ratio test with Harris tolerances. Returns the
    /// entering variable, the dual step and the variables to flip.
    fn dual_ratio(&self, alpha: &[f64], dir: f64, slope: f64, bland: bool) -> Option<(usize, f64, Vec<usize>)> {
        struct Cand {
            j: usize,
            at: f64,
            ratio: f64,
            harris: f64,
        }
        let tol_d = self.tol.dual;
        let mut cands = Vec::new();
        for (j, &a) in alpha.iter().enumerate() {
            if self.pos[j] != NONE || a.abs() < self.tol.pivot || self.lower[j] == self.upper[j] {
                continue;
            }
            let at = dir * a;
            let dj = self.d[j];
            let ok = match self.status[j] {
                VarStatus::AtLower => at > 0.0,
                VarStatus::AtUpper => at < 0.0,
                VarStatus::Free => true,
                VarStatus::Basic => false,
            };
            if !ok {
                continue;
            }
            let (ratio, harris) = if self.status[j] == VarStatus::Free {
                (dj.abs() / at.abs(), (dj.abs() + tol_d) / at.abs())
            } else if at > 0.0 {
                (dj / at, (dj + tol_d) / at)
            } else {
                (dj / at, (dj - tol_d) / at)
            };
            cands.push(Cand {
                j,
                at,
                ratio: ratio.max(0.0),
                harris: harris.max(0.0),
            });
        }
        let mut slope = slope;
        let mut flips = Vec::new();
        let tol_p = self.tol.primal;
        loop {
            if cands.is_empty() {
                return None;
            }
            let hmax = cands.iter().map(|c| c.harris).fold(f64::INFINITY, f64::min);
            let (group, rest): (Vec<Cand>, Vec<Cand>) = cands.into_iter().partition(|c| c.ratio <= hmax);
            let dec: f64 = group
                .iter()
                .map(|c| (self.upper[c.j] - self.lower[c.j]) * c.at.abs())
                .sum();
            if dec.is_finite() && slope - dec > tol_p {
                if rest.is_empty() {
                    return None;
                }
                slope -= dec;
                flips.extend(group.iter().map(|c| c.j));
                cands = rest;
                continue;
            }
            let pick = if bland {
                let min_ratio = group.iter().map(|c| c.ratio).fold(f64::INFINITY, f64::min);
                group
                    .iter()
                    .filter(|c| c.ratio <= min_ratio + 1e-12)
                    .min_by_key(|c| c.j)
                    .expect("group nonempty")
            } else {
                group
                    .iter()
                    .max_by(|a, b| a.at.abs().total_cmp(&b.at.abs()).then(b.j.cmp(&a.j)))
                    .expect("group nonempty")
            };
            return Some((pick.j, pick.ratio, flips));
        }
    }

    fn primal_phase(&mut self) -> Phase {
        let (m, n) = (self.lp.m, self.lp.n);
        loop {
            if self.iterations >= self.iteration_limit {
                return Phase::Limit;
            }
            if self.maybe_refactor() && self.max_primal_infeasibility() > 0.0 {
                return Phase::Restart;
            }
            let bland = self.degenerate > self.degenerate_limit;
            let mut q = NONE;
            let mut best = self.tol.dual;
            for j in 0..n + m {
                let inf = self.dual_infeasibility(j);
                if inf > self.tol.dual {
                    if bland {
                        q = j;
                        break;
                    }
                    if inf > best {
                        best = inf;
                        q = j;
                    }
                }
            }
            if q == NONE {
                return Phase::Done;
            }
            let dir = match self.status[q] {
                VarStatus::AtLower => 1.0,
                VarStatus::AtUpper => -1.0,
                _ => {
                    if self.d[q] < 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            let col = self.ftran_column(q);
            // Harris pass 1.
            let tol_p = self.tol.primal;
            let mut tmax = f64::INFINITY;
            for p in 0..m {
                let g = -dir * col[p];
                if g.abs() < self.tol.pivot {
                    continue;
                }
                let j = self.head[p];
                let bound = if g < 0.0 {
                    (self.x[j] - self.lower[j] + tol_p) / -g
                } else {
                    (self.upper[j] + tol_p - self.x[j]) / g
                };
                if bound < tmax {
                    tmax = bound;
                }
            }
            // Pass 2.
            let mut r = NONE;
            let mut step = f64::INFINITY;
            let mut best_g = 0.0;
            for p in 0..m {
                let g = -dir * col[p];
                if g.abs() < self.tol.pivot {
                    continue;
                }
                let j = self.head[p];
                if !(if g < 0.0 { self.lower[j] } else { self.upper[j] }).is_finite() {
                    continue;
                }
                let exact = if g < 0.0 {
                    (self.x[j] - self.lower[j]) / -g
                } else {
                    (self.upper[j] - self.x[j]) / g
                };
                if exact <= tmax && (bland && (r == NONE || j < self.head[r]) || !bland && g.abs() > best_g) {
                    best_g = g.abs();
                    r = p;
                    step = exact.max(0.0);
                }
            }
            let range = self.upper[q] - self.lower[q];
            self.iterations += 1;
            if r == NONE && !range.is_finite() {
                return Phase::Unbounded;
            }
            if range.is_finite() && (r == NONE || range <= step) {
                // Entering variable runs to its other bound.
                self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.x[q] = self.nonbasic_value(q);
                for p in 0..m {
                    if col[p] != 0.0 {
                        self.x[self.head[p]] -= dir * range * col[p];
                    }
                }
                self.degenerate = 0;
                continue;
            }
            if step == 0.0 {
                self.degenerate += 1;
            } else {
                self.degenerate = 0;
            }
            let leaving = self.head[r];
            let g = -dir * col[r];
            let to_lower = g < 0.0;
            self.x[q] += dir * step;
            for p in 0..m {
                if col[p] != 0.0 {
                    self.x[self.head[p]] -= dir * step * col[p];
                }
            }
            self.x[leaving] = if to_lower { self.lower[leaving] } else { self.upper[leaving] };

            let (_rho, alpha) = self.pivot_row(r);
            let arq = alpha[q];
            if arq.abs() < self.tol.pivot || (arq - col[r]).abs() > 1e-6 * (1.0 + arq.abs()) {
                self.refactor();
                continue;
            }
            let theta_d = self.d[q] / arq;
            for j in 0..n + m {
                if self.pos[j] == NONE && alpha[j] != 0.0 {
                    self.d[j] -= theta_d * alpha[j];
                }
            }
            self.d[leaving] = -theta_d;
            self.d[q] = 0.0;
            self.status[leaving] = if to_lower { VarStatus::AtLower } else { VarStatus::AtUpper };
            self.pos[leaving] = NONE;
            self.status[q] = VarStatus::Basic;
            self.pos[q] = r;
            self.head[r] = q;
            self.dse[r] = 1.0;
            self.factor.update(r, &col);
        }
    }

    pub fn objective(&self) -> f64 {
        self.lp.offset + (0..self.lp.n).map(|j| self.lp.cost[j] * self.x[j]).sum::<f64>()
    }

    pub fn values(&self) -> Vec<f64> {
        self.x[..self.lp.n].to_vec()
    }

    pub fn value(&self, j: usize) -> f64 {
        self.x[j]
    }

    pub fn solution(&self, status: LpStatus) -> LpSolution {
        let n = self.lp.n;
        let duals = self.y.iter().zip(&self.lp.row_scale).map(|(y, s)| y * s).collect();
        LpSolution {
            status,
            objective: self.objective(),
            values: self.values(),
            duals,
            reduced_costs: self.d[..n].to_vec(),
            basis: self.basis(),
            iterations: self.iterations,
        }
    }
}

/// Solve the continuous relaxation of `model` (integrality is ignored).
pub fn solve_lp(model: &MilpModel, opts: &SolveOptions) -> LpSolution {
    let lp = LpData::new(model);
    let mut engine = Engine::new(&lp, opts);
    let status = engine.solve();
    engine.solution(status)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::model::Sense;

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn single_bound() {
        let mut m = MilpModel::new("t");
        let x = m.add_column("x", 1.0, 0.0, 10.0, false);
        m.add_row("r", vec![(x, 1.0)], Sense::Ge, 3.0);
        let s = solve_lp(&m, &opts());
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-9);
        assert!((s.values[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn two_variable_segment() {
        let mut m = MilpModel::new("t");
        let x = m.add_column("x", -1.0, 0.0, f64::INFINITY, false);
        let y = m.add_column("y", -1.0, 0.0, f64::INFINITY, false);
        m.add_row("sum", vec![(x, 1.0), (y, 1.0)], Sense::Le, 4.0);
        m.add_row("xcap", vec![(x, 1.0)], Sense::Le, 3.0);
        m.add_row("ycap", vec![(y, 1.0)], Sense::Le, 3.0);
        let s = solve_lp(&m, &opts());
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 4.0).abs() < 1e-9);
    }

    #[test]
    fn contradiction_is_infeasible() {
        let mut m = MilpModel::new("t");
        let x = m.add_column("x", 0.0, f64::NEG_INFINITY, f64::INFINITY, false);
        m.add_row("a", vec![(x, 1.0)], Sense::Ge, 2.0);
        m.add_row("b", vec![(x, 1.0)], Sense::Le, 1.0);
        assert_eq!(solve_lp(&m, &opts()).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut m = MilpModel::new("t");
        let x = m.add_column("x", -1.0, 0.0, f64::INFINITY, false);
        let y = m.add_column("y", 0.0, 0.0, f64::INFINITY, false);
        m.add_row("r", vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        assert_eq!(solve_lp(&m, &opts()).status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variable_and_equality() {
        // min x + 2y s.t. x - y = 1, x + y >= 3, y free, x in [0, 10].
        let mut m = MilpModel::new("t");
        let x = m.add_column("x", 1.0, 0.0, 10.0, false);
        let y = m.add_column("y", 2.0, f64::NEG_INFINITY, f64::INFINITY, false);
        m.add_row("e", vec![(x, 1.0), (y, -1.0)], Sense::Eq, 1.0);
        m.add_row("g", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 3.0);
        let s = solve_lp(&m, &opts());
        assert_eq!(s.status, LpStatus::Optimal);
        // x = 2, y = 1.
        assert!((s.objective - 4.0).abs() < 1e-9, "{}", s.objective);
    }

    #[test]
    fn duals_certify_optimum() {
        let mut m = MilpModel::new("t");
        let x = m.add_column("x", -3.0, 0.0, 4.0, false);
        let y = m.add_column("y", -5.0, 0.0, f64::INFINITY, false);
        m.add_row("a", vec![(y, 2.0)], Sense::Le, 12.0);
        m.add_row("b", vec![(x, 3.0), (y, 2.0)], Sense::Le, 18.0);
        let s = solve_lp(&m, &opts());
        assert!((s.objective + 36.0).abs() < 1e-9);
        // Dual objective from the returned multipliers.
        let pi = &s.duals;
        let d = [-3.0 - 3.0 * pi[1], -5.0 - 2.0 * pi[0] - 2.0 * pi[1]];
        let mut dual = 12.0 * pi[0] + 18.0 * pi[1];
        dual += if d[0] < 0.0 { 4.0 * d[0] } else { 0.0 };
        assert!(d[1] >= -1e-9);
        assert!((dual - s.objective).abs() < 1e-7);
    }
}
