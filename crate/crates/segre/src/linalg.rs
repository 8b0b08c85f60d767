//! Exact dense linear algebra over the scalar expression field.
//!
//! Gaussian elimination with complexity-based pivoting: among the candidate
//! pivots of a column we take the structurally smallest nonzero entry, which
//! keeps intermediate rational functions from swelling.

use crate::expr::ScalarExpr;

#[derive(Debug, Clone)]
pub struct LinearSolution {
    /// One value per unknown; free unknowns are set to zero.
    pub values: Vec<ScalarExpr>,
    /// Indices of unknowns not determined by the system.
    pub free: Vec<usize>,
    /// Right-hand sides of rows that reduced to `0 = r` with `r != 0`.
    pub residuals: Vec<ScalarExpr>,
}

impl LinearSolution {
    pub fn is_consistent(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn is_unique(&self) -> bool {
        self.is_consistent() && self.free.is_empty()
    }
}

/// Solve `A x = b` exactly. Returns the reduced solution with free unknowns
/// pinned to zero and any inconsistent residuals reported.
pub fn solve(mut a: Vec<Vec<ScalarExpr>>, mut b: Vec<ScalarExpr>) -> LinearSolution {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; cols];
    let mut used_row = vec![false; rows];

    for col in 0..cols {
        // best pivot by complexity
        let mut best: Option<(usize, usize)> = None;
        for (r, row) in a.iter().enumerate() {
            if used_row[r] || row[col].is_zero() {
                continue;
            }
            let c = row[col].complexity();
            if best.map(|(_, bc)| c < bc).unwrap_or(true) {
                best = Some((r, c));
            }
        }
        let Some((pr, _)) = best else { continue };
        used_row[pr] = true;
        pivot_of_col[col] = Some(pr);
        let pv = a[pr][col].clone();
        // normalize pivot row
        for x in a[pr].iter_mut() {
            if !x.is_zero() {
                *x = x.div(&pv).unwrap();
            }
        }
        b[pr] = b[pr].div(&pv).unwrap();
        // eliminate in all other rows
        for r in 0..rows {
            if r == pr || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in 0..cols {
                if !a[pr][c].is_zero() {
                    let t = factor.mul(&a[pr][c]);
                    a[r][c] = a[r][c].sub(&t);
                }
            }
            let t = factor.mul(&b[pr]);
            b[r] = b[r].sub(&t);
        }
    }

    let mut residuals = Vec::new();
    for (r, row) in a.iter().enumerate() {
        if !used_row[r] && !b[r].is_zero() {
            debug_assert!(row.iter().all(|x| x.is_zero()));
            residuals.push(b[r].clone());
        }
    }

    let mut values = vec![ScalarExpr::zero(); cols];
    let mut free = Vec::new();
    for col in 0..cols {
        match pivot_of_col[col] {
            Some(r) => {
                // after full Jordan elimination the row has a 1 in `col`;
                // any other nonzero columns are free unknowns (value 0), so
                // the pivot unknown equals the rhs.
                values[col] = b[r].clone();
            }
            None => free.push(col),
        }
    }
    // If a pivot row still references free columns, the pinned-to-zero free
    // values make the stored rhs correct as-is.
    LinearSolution {
        values,
        free,
        residuals,
    }
}

/// Basis of the right kernel of `a` (columns are unknowns).
pub fn nullspace(mut a: Vec<Vec<ScalarExpr>>) -> Vec<Vec<ScalarExpr>> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; cols];
    let mut used_row = vec![false; rows];
    for col in 0..cols {
        let mut best: Option<(usize, usize)> = None;
        for (r, row) in a.iter().enumerate() {
            if used_row[r] || row[col].is_zero() {
                continue;
            }
            let c = row[col].complexity();
            if best.map(|(_, bc)| c < bc).unwrap_or(true) {
                best = Some((r, c));
            }
        }
        let Some((pr, _)) = best else { continue };
        used_row[pr] = true;
        pivot_of_col[col] = Some(pr);
        let pv = a[pr][col].clone();
        for x in a[pr].iter_mut() {
            if !x.is_zero() {
                *x = x.div(&pv).unwrap();
            }
        }
        for r in 0..rows {
            if r == pr || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in 0..cols {
                if !a[pr][c].is_zero() {
                    let t = factor.mul(&a[pr][c]);
                    a[r][c] = a[r][c].sub(&t);
                }
            }
        }
    }
    let mut basis = Vec::new();
    for col in 0..cols {
        if pivot_of_col[col].is_some() {
            continue;
        }
        let mut v = vec![ScalarExpr::zero(); cols];
        v[col] = ScalarExpr::one();
        for (c, p) in pivot_of_col.iter().enumerate() {
            if let Some(r) = p {
                // pivot var c = -sum(free vals * coefficients)
                v[c] = a[*r][col].neg();
            }
        }
        basis.push(v);
    }
    basis
}

/// Exact inverse of a square matrix; `None` when singular.
pub fn invert(m: &[Vec<ScalarExpr>]) -> Option<Vec<Vec<ScalarExpr>>> {
    let n = m.len();
    let mut a: Vec<Vec<ScalarExpr>> = Vec::with_capacity(n);
    for (i, row) in m.iter().enumerate() {
        assert_eq!(row.len(), n);
        let mut r = row.clone();
        for j in 0..n {
            r.push(if i == j {
                ScalarExpr::one()
            } else {
                ScalarExpr::zero()
            });
        }
        a.push(r);
    }
    for col in 0..n {
        let mut best: Option<(usize, usize)> = None;
        for r in col..n {
            if a[r][col].is_zero() {
                continue;
            }
            let c = a[r][col].complexity();
            if best.map(|(_, bc)| c < bc).unwrap_or(true) {
                best = Some((r, c));
            }
        }
        let (pr, _) = best?;
        a.swap(col, pr);
        let pv = a[col][col].clone();
        for x in a[col].iter_mut() {
            if !x.is_zero() {
                *x = x.div(&pv).unwrap();
            }
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in 0..2 * n {
                if !a[col][c].is_zero() {
                    let t = factor.mul(&a[col][c]);
                    a[r][c] = a[r][c].sub(&t);
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(v: i64) -> ScalarExpr {
        ScalarExpr::from_int(v)
    }

    #[test]
    fn solve_2x2() {
        let a = vec![vec![n(1), n(1)], vec![n(1), n(-1)]];
        let b = vec![n(3), n(1)];
        let s = solve(a, b);
        assert!(s.is_unique());
        assert_eq!(s.values, vec![n(2), n(1)]);
    }

    #[test]
    fn inconsistent_detected() {
        let a = vec![vec![n(1), n(1)], vec![n(2), n(2)]];
        let b = vec![n(1), n(3)];
        let s = solve(a, b);
        assert!(!s.is_consistent());
    }

    #[test]
    fn nullspace_of_rank1() {
        let a = vec![vec![n(1), n(2)]];
        let ns = nullspace(a);
        assert_eq!(ns.len(), 1);
        assert_eq!(ns[0][0], n(-2));
        assert_eq!(ns[0][1], n(1));
    }

    #[test]
    fn invert_with_symbolic_entries() {
        let x = ScalarExpr::coord(0);
        let m = vec![vec![x.clone(), n(1)], vec![n(0), n(1)]];
        let inv = invert(&m).unwrap();
        // inv * m = I
        let prod00 = inv[0][0].mul(&m[0][0]).add(&inv[0][1].mul(&m[1][0]));
        let prod01 = inv[0][0].mul(&m[0][1]).add(&inv[0][1].mul(&m[1][1]));
        assert!(prod00.is_one());
        assert!(prod01.is_zero());
    }
}
