//! Dense two-phase simplex over a [`Scalar`], Bland's rule throughout.
//!
//! Solves `min c.x  s.t.  A x = b, x >= 0`. Small dense problems only; the
//! marginal problem for `n` observables has `2^n` columns.

use super::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct StandardLp<T> {
    pub a: Vec<Vec<T>>,
    pub b: Vec<T>,
    pub c: Vec<T>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome<T> {
    Optimal { x: Vec<T>, value: T },
    /// Phase one stalled with this positive sum of artificials.
    Infeasible { residual: T },
    Unbounded,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    obj: Vec<T>,
    basis: Vec<usize>,
    width: usize,
}

impl<T: Scalar> Tableau<T> {
    fn rhs(&self) -> usize {
        self.width
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let rhs = self.rhs();
        let p = self.rows[r][col].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for j in 0..=rhs {
                if !pivot_row[j].is_zero() {
                    row[j] = row[j].clone() - f.clone() * pivot_row[j].clone();
                }
            }
            if !T::EXACT {
                row[col] = T::zero();
            }
        }
        if !self.obj[col].is_zero() {
            let f = self.obj[col].clone();
            for j in 0..=rhs {
                if !pivot_row[j].is_zero() {
                    self.obj[j] = self.obj[j].clone() - f.clone() * pivot_row[j].clone();
                }
            }
            if !T::EXACT {
                self.obj[col] = T::zero();
            }
        }
        self.basis[r] = col;
    }

    /// Runs Bland's rule over columns `< limit`. Returns false if unbounded.
    fn optimize(&mut self, limit: usize) -> bool {
        let rhs = self.rhs();
        loop {
            let Some(col) = (0..limit).find(|&j| self.obj[j].is_neg()) else {
                return true;
            };
            let mut best: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[col].is_pos() {
                    continue;
                }
                let ratio = row[rhs].clone() / row[col].clone();
                let better = match &best {
                    None => true,
                    Some((bi, br)) => {
                        ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, col),
                None => return false,
            }
        }
    }
}

pub fn solve<T: Scalar>(lp: &StandardLp<T>) -> LpOutcome<T> {
    let m = lp.a.len();
    let n = lp.c.len();
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, arow) in lp.a.iter().enumerate() {
        debug_assert_eq!(arow.len(), n);
        let flip = lp.b[i].is_negative();
        let mut row: Vec<T> = Vec::with_capacity(width + 1);
        for v in arow {
            row.push(if flip { -v.clone() } else { v.clone() });
        }
        for k in 0..m {
            row.push(if k == i { T::one() } else { T::zero() });
        }
        row.push(if flip { -lp.b[i].clone() } else { lp.b[i].clone() });
        rows.push(row);
    }
    // phase one: minimize the sum of artificials
    let mut obj = vec![T::zero(); width + 1];
    for row in &rows {
        for j in 0..n {
            obj[j] = obj[j].clone() - row[j].clone();
        }
        obj[width] = obj[width].clone() - row[width].clone();
    }
    let mut t = Tableau {
        rows,
        obj,
        basis: (n..n + m).collect(),
        width,
    };
    t.optimize(n);
    let residual = -t.obj[width].clone();
    if residual.is_pos() {
        return LpOutcome::Infeasible { residual };
    }

    // drive artificials out of the basis; drop redundant rows
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| !t.rows[i][j].is_negligible()) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    // phase two
    let mut obj = vec![T::zero(); width + 1];
    obj[..n].clone_from_slice(&lp.c);
    for (row, &bv) in t.rows.iter().zip(&t.basis) {
        let cb = lp.c[bv].clone();
        if cb.is_zero() {
            continue;
        }
        for j in 0..=width {
            obj[j] = obj[j].clone() - cb.clone() * row[j].clone();
        }
    }
    t.obj = obj;
    if !t.optimize(n) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![T::zero(); n];
    for (row, &bv) in t.rows.iter().zip(&t.basis) {
        x[bv] = row[width].clone();
    }
    let value = -t.obj[width].clone();
    LpOutcome::Optimal { x, value }
}
