//! Basis factorization for the simplex engine.
//!
//! The basis is permuted to block form
//!
//! ```text
//!   [ U1  R1  R2 ]   column singletons (upper triangular)
//!   [ 0   L2  0  ]   row singletons (lower triangular)
//!   [ 0   Rn  N  ]   nucleus, factored densely with partial pivoting
//! ```
//!
//! and later basis changes are appended as product-form eta columns.

const PIVOT_ZERO: f64 = 1e-11;

struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

/// Basis positions that turned out linearly dependent, each paired with a
/// row left without a pivot.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Singular {
    pub pairs: Vec<(usize, usize)>,
}

pub(crate) struct BasisFactor {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    /// (row, position, pivot) in pivot order.
    cs: Vec<(usize, usize, f64)>,
    rs: Vec<(usize, usize, f64)>,
    nuc_rows: Vec<usize>,
    nuc_pos: Vec<usize>,
    in_nucleus: Vec<bool>,
    /// Row-major LU of the row-permuted nucleus; `nuc_perm[k]` is the
    /// nucleus row placed at elimination step `k`.
    nuc_lu: Vec<f64>,
    nuc_perm: Vec<usize>,
    etas: Vec<Eta>,
    work: Vec<f64>,
}

impl BasisFactor {
    pub fn empty(m: usize) -> Self {
        Self {
            m,
            cols: Vec::new(),
            cs: Vec::new(),
            rs: Vec::new(),
            nuc_rows: Vec::new(),
            nuc_pos: Vec::new(),
            in_nucleus: vec![false; m],
            nuc_lu: Vec::new(),
            nuc_perm: Vec::new(),
            etas: Vec::new(),
            work: vec![0.0; m],
        }
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Factor the basis whose column at position `p` is `cols[p]` (row
    /// indices and values).
    pub fn factor(&mut self, cols: Vec<Vec<(usize, f64)>>) -> Result<(), Singular> {
        let m = self.m;
        assert_eq!(cols.len(), m);
        self.cols = cols;
        self.cs.clear();
        self.rs.clear();
        self.etas.clear();

        let mut row_pat: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (p, col) in self.cols.iter().enumerate() {
            for &(r, _) in col {
                row_pat[r].push(p);
            }
        }
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];

        // Column singletons.
        let mut col_count: Vec<usize> = self.cols.iter().map(Vec::len).collect();
        let mut queue: Vec<usize> = (0..m).filter(|&p| col_count[p] == 1).collect();
        queue.reverse();
        while let Some(p) = queue.pop() {
            if !col_active[p] || col_count[p] != 1 {
                continue;
            }
            let Some(&(r, v)) = self.cols[p].iter().find(|&&(r, _)| row_active[r]) else {
                continue;
            };
            if v.abs() < PIVOT_ZERO {
                continue;
            }
            self.cs.push((r, p, v));
            col_active[p] = false;
            row_active[r] = false;
            for &q in &row_pat[r] {
                if col_active[q] {
                    col_count[q] -= 1;
                    if col_count[q] == 1 {
                        queue.push(q);
                    }
                }
            }
        }

        // Row singletons among what is left.
        let mut row_count = vec![0usize; m];
        for r in 0..m {
            if row_active[r] {
                row_count[r] = row_pat[r].iter().filter(|&&p| col_active[p]).count();
            }
        }
        let mut queue: Vec<usize> = (0..m).filter(|&r| row_active[r] && row_count[r] == 1).collect();
        queue.reverse();
        while let Some(r) = queue.pop() {
            if !row_active[r] || row_count[r] != 1 {
                continue;
            }
            let Some(&p) = row_pat[r].iter().find(|&&p| col_active[p]) else {
                continue;
            };
            let v = self.cols[p].iter().filter(|&&(rr, _)| rr == r).map(|&(_, a)| a).sum::<f64>();
            if v.abs() < PIVOT_ZERO {
                continue;
            }
            self.rs.push((r, p, v));
            row_active[r] = false;
            col_active[p] = false;
            for &(rr, _) in &self.cols[p] {
                if row_active[rr] {
                    row_count[rr] -= 1;
                    if row_count[rr] == 1 {
                        queue.push(rr);
                    }
                }
            }
        }

        // Dense nucleus.
        self.nuc_rows = (0..m).filter(|&r| row_active[r]).collect();
        self.nuc_pos = (0..m).filter(|&p| col_active[p]).collect();
        debug_assert_eq!(self.nuc_rows.len(), self.nuc_pos.len());
        self.in_nucleus = vec![false; m];
        let k = self.nuc_rows.len();
        let mut local = vec![usize::MAX; m];
        for (i, &r) in self.nuc_rows.iter().enumerate() {
            self.in_nucleus[r] = true;
            local[r] = i;
        }
        let mut a = vec![0.0; k * k];
        for (jl, &p) in self.nuc_pos.iter().enumerate() {
            for &(r, v) in &self.cols[p] {
                if local[r] != usize::MAX {
                    a[local[r] * k + jl] += v;
                }
            }
        }
        let (perm, dependent) = dense_lu(&mut a, k);
        self.nuc_lu = a;
        self.nuc_perm = perm;
        if dependent.is_empty() {
            Ok(())
        } else {
            // Pair each dependent column with an unpivoted nucleus row.
            let pivoted: Vec<bool> = {
                let mut used = vec![false; k];
                for (step, &row) in self.nuc_perm.iter().enumerate() {
                    if !dependent.contains(&step) {
                        used[row] = true;
                    }
                }
                used
            };
            let free_rows: Vec<usize> = (0..k).filter(|&i| !pivoted[i]).map(|i| self.nuc_rows[i]).collect();
            let pairs = dependent
                .iter()
                .zip(free_rows)
                .map(|(&jl, r)| (self.nuc_pos[jl], r))
                .collect();
            Err(Singular { pairs })
        }
    }

    /// Solve `B x = b`. `b` is indexed by row and is overwritten; the result
    /// is indexed by basis position.
    pub fn ftran(&mut self, b: &mut [f64], out: &mut [f64]) {
        for &(r, p, piv) in &self.rs {
            let v = b[r];
            if v == 0.0 {
                out[p] = 0.0;
                continue;
            }
            let xv = v / piv;
            out[p] = xv;
            for &(rr, a) in &self.cols[p] {
                if rr != r {
                    b[rr] -= a * xv;
                }
            }
        }
        let k = self.nuc_pos.len();
        if k > 0 {
            let mut v: Vec<f64> = self.nuc_rows.iter().map(|&r| b[r]).collect();
            dense_solve(&self.nuc_lu, &self.nuc_perm, k, &mut v);
            for (jl, &p) in self.nuc_pos.iter().enumerate() {
                let xv = v[jl];
                out[p] = xv;
                if xv != 0.0 {
                    for &(rr, a) in &self.cols[p] {
                        if !self.in_nucleus[rr] {
                            b[rr] -= a * xv;
                        }
                    }
                }
            }
        }
        for &(r, p, piv) in self.cs.iter().rev() {
            let v = b[r];
            if v == 0.0 {
                out[p] = 0.0;
                continue;
            }
            let xv = v / piv;
            out[p] = xv;
            for &(rr, a) in &self.cols[p] {
                if rr != r {
                    b[rr] -= a * xv;
                }
            }
        }
        for eta in &self.etas {
            let xr = out[eta.pos];
            if xr == 0.0 {
                continue;
            }
            let xr = xr / eta.pivot;
            out[eta.pos] = xr;
            for &(i, a) in &eta.entries {
                out[i] -= a * xr;
            }
        }
    }

    /// Solve `B^T y = c`. `c` is indexed by basis position and is
    /// overwritten; `y` is indexed by row.
    pub fn btran(&mut self, c: &mut [f64], y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * c[i];
            }
            c[eta.pos] = s / eta.pivot;
        }
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(r, p, piv) in &self.cs {
            let mut s = c[p];
            for &(rr, a) in &self.cols[p] {
                if rr != r {
                    s -= a * y[rr];
                }
            }
            y[r] = s / piv;
        }
        let k = self.nuc_pos.len();
        if k > 0 {
            let mut v: Vec<f64> = self
                .nuc_pos
                .iter()
                .map(|&p| {
                    let mut s = c[p];
                    for &(rr, a) in &self.cols[p] {
                        if !self.in_nucleus[rr] {
                            s -= a * y[rr];
                        }
                    }
                    s
                })
                .collect();
            dense_solve_transpose(&self.nuc_lu, &self.nuc_perm, k, &mut v);
            for (il, &r) in self.nuc_rows.iter().enumerate() {
                y[r] = v[il];
            }
        }
        for &(r, p, piv) in self.rs.iter().rev() {
            let mut s = c[p];
            for &(rr, a) in &self.cols[p] {
                if rr != r {
                    s -= a * y[rr];
                }
            }
            y[r] = s / piv;
        }
    }

    /// Record a basis change at `pos` given the FTRAN'd entering column.
    pub fn update(&mut self, pos: usize, column: &[f64]) {
        let pivot = column[pos];
        let entries = column
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a != 0.0)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta { pos, pivot, entries });
    }

    /// Scratch row vector, zeroed.
    pub fn take_work(&mut self) -> Vec<f64> {
        let mut w = std::mem::take(&mut self.work);
        w.clear();
        w.resize(self.m, 0.0);
        w
    }

    pub fn give_work(&mut self, w: Vec<f64>) {
        self.work = w;
    }
}

/// In-place LU with partial pivoting of a row-major `k×k` matrix. Returns
/// the row permutation (step -> original row) and the steps whose column had
/// no usable pivot.
fn dense_lu(a: &mut [f64], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rows: Vec<usize> = (0..k).collect();
    let mut dependent = Vec::new();
    // `rows[s]` is the physical row used at step s; rows past the current
    // step are the candidates.
    let mut step = 0;
    let mut order = Vec::with_capacity(k);
    for col in 0..k {
        let mut best = PIVOT_ZERO;
        let mut arg = usize::MAX;
        for (idx, &r) in rows.iter().enumerate().skip(step) {
            let v = a[r * k + col].abs();
            if v > best {
                best = v;
                arg = idx;
            }
        }
        if arg == usize::MAX {
            dependent.push(col);
            order.push(usize::MAX);
            continue;
        }
        rows.swap(step, arg);
        let pr = rows[step];
        let pv = a[pr * k + col];
        for &r in &rows[step + 1..] {
            let f = a[r * k + col] / pv;
            if f != 0.0 {
                a[r * k + col] = f;
                for c in col + 1..k {
                    a[r * k + c] -= f * a[pr * k + c];
                }
            } else {
                a[r * k + col] = 0.0;
            }
        }
        order.push(pr);
        step += 1;
    }
    // Dependent columns take the leftover rows so the permutation is full;
    // those steps are never used in solves because the caller repairs first.
    let mut leftover = rows[step..].iter().copied();
    for o in order.iter_mut() {
        if *o == usize::MAX {
            *o = leftover.next().expect("leftover row");
        }
    }
    (order, dependent)
}

/// Column-step `s` uses physical row `perm[s]`; L is unit lower in
/// elimination order, U upper.
fn dense_solve(lu: &[f64], perm: &[usize], k: usize, b: &mut [f64]) {
    let mut y: Vec<f64> = perm.iter().map(|&r| b[r]).collect();
    for s in 0..k {
        let ys = y[s];
        if ys == 0.0 {
            continue;
        }
        for t in s + 1..k {
            let l = lu[perm[t] * k + s];
            if l != 0.0 {
                y[t] -= l * ys;
            }
        }
    }
    for s in (0..k).rev() {
        let row = perm[s];
        let mut v = y[s];
        for c in s + 1..k {
            v -= lu[row * k + c] * y[c];
        }
        y[s] = v / lu[row * k + s];
    }
    b.copy_from_slice(&y);
}

fn dense_solve_transpose(lu: &[f64], perm: &[usize], k: usize, c: &mut [f64]) {
    // N = P^T L U, so N^T y = c  =>  U^T z = c, L^T w = z, y = P^T w.
    let mut z = c.to_vec();
    for s in 0..k {
        let row = perm[s];
        let mut v = z[s];
        for t in 0..s {
            v -= lu[perm[t] * k + s] * z[t];
        }
        z[s] = v / lu[row * k + s];
    }
    for s in (0..k).rev() {
        let mut v = z[s];
        for t in s + 1..k {
            v -= lu[perm[t] * k + s] * z[t];
        }
        z[s] = v;
    }
    for (s, &r) in perm.iter().enumerate() {
        c[r] = z[s];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(a: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m)
            .map(|j| (0..m).filter(|&i| a[i][j] != 0.0).map(|i| (i, a[i][j])).collect())
            .collect()
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    fn mat_t_vec(a: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let m = a.len();
        (0..m).map(|j| (0..m).map(|i| a[i][j] * y[i]).sum()).collect()
    }

    fn check(a: Vec<Vec<f64>>) {
        let m = a.len();
        let mut f = BasisFactor::empty(m);
        f.factor(dense_cols(&a)).unwrap();
        let b: Vec<f64> = (0..m).map(|i| 1.0 + i as f64 * 0.5).collect();
        let mut bb = b.clone();
        let mut x = vec![0.0; m];
        f.ftran(&mut bb, &mut x);
        for (u, v) in matvec(&a, &x).iter().zip(&b) {
            assert!((u - v).abs() < 1e-9, "ftran {u} vs {v}");
        }
        let mut cc = b.clone();
        let mut y = vec![0.0; m];
        f.btran(&mut cc, &mut y);
        for (u, v) in mat_t_vec(&a, &y).iter().zip(&b) {
            assert!((u - v).abs() < 1e-9, "btran {u} vs {v}");
        }
    }

    #[test]
    fn mixed_structure_solves() {
        check(vec![
            vec![2.0, 1.0, 0.0, 3.0, 0.0],
            vec![0.0, 4.0, 0.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0, 2.0, 0.0],
            vec![0.0, 0.0, 5.0, 1.0, 1.0],
            vec![0.0, 0.0, 0.0, 1.0, 3.0],
        ]);
    }

    #[test]
    fn fully_dense_solves() {
        check(vec![
            vec![1.0, 2.0, 3.0],
            vec![2.0, 5.0, 1.0],
            vec![3.0, 1.0, 4.0],
        ]);
    }

    #[test]
    fn permuted_identity_solves() {
        check(vec![
            vec![0.0, 0.0, 2.0],
            vec![3.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
        ]);
    }

    #[test]
    fn eta_updates_track_column_replacement() {
        let a = vec![
            vec![2.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 4.0],
        ];
        let mut f = BasisFactor::empty(3);
        f.factor(dense_cols(&a)).unwrap();
        // Replace column 1 with (1, 0, 2).
        let newcol = [1.0, 0.0, 2.0];
        let mut b = newcol.to_vec();
        let mut alpha = vec![0.0; 3];
        f.ftran(&mut b, &mut alpha);
        f.update(1, &alpha);
        let mut a2 = a.clone();
        for i in 0..3 {
            a2[i][1] = newcol[i];
        }
        let rhs = vec![1.0, -2.0, 0.5];
        let mut bb = rhs.clone();
        let mut x = vec![0.0; 3];
        f.ftran(&mut bb, &mut x);
        for (u, v) in matvec(&a2, &x).iter().zip(&rhs) {
            assert!((u - v).abs() < 1e-9);
        }
        let mut cc = rhs.clone();
        let mut y = vec![0.0; 3];
        f.btran(&mut cc, &mut y);
        for (u, v) in mat_t_vec(&a2, &y).iter().zip(&rhs) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn dependent_columns_are_reported() {
        let a = vec![
            vec![1.0, 2.0, 1.0],
            vec![2.0, 4.0, 0.0],
            vec![1.0, 2.0, 3.0],
        ];
        let mut f = BasisFactor::empty(3);
        let err = f.factor(dense_cols(&a)).unwrap_err();
        assert_eq!(err.pairs.len(), 1);
    }
}
