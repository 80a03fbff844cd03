use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// One constraint `coefs · x (sense) rhs`. A `range` turns the row into an
/// interval with MPS RANGES semantics (see [`Row::bounds`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub range: Option<f64>,
}

impl Row {
    /// Activity interval `[lo, hi]` admitted by the row.
    pub fn bounds(&self) -> (f64, f64) {
        let inf = f64::INFINITY;
        match (self.sense, self.range) {
            (Sense::Le, None) => (-inf, self.rhs),
            (Sense::Ge, None) => (self.rhs, inf),
            (Sense::Eq, None) => (self.rhs, self.rhs),
            (Sense::Le, Some(r)) => (self.rhs - r.abs(), self.rhs),
            (Sense::Ge, Some(r)) => (self.rhs, self.rhs + r.abs()),
            (Sense::Eq, Some(r)) if r >= 0.0 => (self.rhs, self.rhs + r),
            (Sense::Eq, Some(r)) => (self.rhs + r, self.rhs),
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row, 0 when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let (lo, hi) = self.bounds();
        let v = self.activity(x);
        (lo - v).max(v - hi).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub cost: f64,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
    /// Branching priority: fractional columns with a higher value are
    /// branched on first. Not stored in MPS files.
    pub priority: u32,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("row `{row}` references column {col} but the model has {ncols} columns")]
    UnknownColumn { row: String, col: usize, ncols: usize },
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
    #[error("column `{0}` has lower bound above upper bound")]
    InvertedBounds(String),
}

/// Minimization MILP with sparse rows, column bounds and integrality flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    pub name: String,
    /// Constant added to the objective.
    pub objective_offset: f64,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_column(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64, integer: bool) -> usize {
        self.columns.push(Column {
            name: name.into(),
            cost,
            lower,
            upper,
            integer,
            priority: 0,
        });
        self.columns.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, coefs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row {
            name: name.into(),
            coefs,
            sense,
            rhs,
            range: None,
        });
        self.rows.len() - 1
    }

    /// Row `lo <= coefs · x <= hi` with both ends finite.
    pub fn add_ranged_row(&mut self, name: impl Into<String>, coefs: Vec<(usize, f64)>, lo: f64, hi: f64) -> usize {
        self.rows.push(Row {
            name: name.into(),
            coefs,
            sense: Sense::Ge,
            rhs: lo,
            range: Some(hi - lo),
        });
        self.rows.len() - 1
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let n = self.columns.len();
        for c in &self.columns {
            if c.cost.is_nan() || c.cost.is_infinite() || c.lower.is_nan() || c.upper.is_nan() {
                return Err(ModelError::NonFinite(c.name.clone()));
            }
            if c.lower > c.upper {
                return Err(ModelError::InvertedBounds(c.name.clone()));
            }
        }
        for r in &self.rows {
            if !r.rhs.is_finite() || r.range.is_some_and(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite(r.name.clone()));
            }
            for &(j, a) in &r.coefs {
                if j >= n {
                    return Err(ModelError::UnknownColumn {
                        row: r.name.clone(),
                        col: j,
                        ncols: n,
                    });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite(r.name.clone()));
                }
            }
        }
        if !self.objective_offset.is_finite() {
            return Err(ModelError::NonFinite("objective".into()));
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.columns.iter().zip(x).map(|(c, v)| c.cost * v).sum::<f64>()
    }

    /// Largest row or bound violation of `x` and the offending row index
    /// (`None` for a bound).
    pub fn max_violation(&self, x: &[f64]) -> (f64, Option<usize>) {
        let mut worst = (0.0, None);
        for (c, &v) in self.columns.iter().zip(x) {
            let viol = (c.lower - v).max(v - c.upper).max(0.0);
            if viol > worst.0 {
                worst = (viol, None);
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            let viol = r.violation(x);
            if viol > worst.0 {
                worst = (viol, Some(i));
            }
        }
        worst
    }

    pub fn integer_columns(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|&j| self.columns[j].integer).collect()
    }

    /// A copy with all integrality flags cleared.
    pub fn relaxation(&self) -> Self {
        let mut m = self.clone();
        for c in &mut m.columns {
            c.integer = false;
        }
        m
    }
}
