//! Expansion of 2-forms in the moving coframe and reduction modulo a
//! Pfaffian ideal.
//!
//! The expansion stores the full pair-skew coefficient tensor: for basis
//! 1-forms `w_a` (flat index order of the structure), `T[a][b]` with `a < b`
//! is the coefficient of the canonical wedge `w_a ^ w_b`, and swapped index
//! orderings carry the opposite sign. Printed curvature components of the
//! worked four-dimensional geometries use arbitrary orderings, so both are
//! addressable.

use crate::error::{ConnectionError, FrobeniusError};
use crate::expr::ScalarExpr;
use crate::form::DiffForm;
use crate::linalg;
use crate::structure::AGStructure;
use std::collections::BTreeMap;

/// Coefficients of a 2-form over the basis wedges `w_a ^ w_b`, `a < b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoframeExpansion {
    pub n: usize,
    /// Keyed by (a, b) with a < b; absent means zero.
    pub coeffs: BTreeMap<(usize, usize), ScalarExpr>,
}

impl CoframeExpansion {
    pub fn zero(n: usize) -> Self {
        CoframeExpansion {
            n,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Signed coefficient for an arbitrary ordered pair (a, b).
    pub fn get(&self, a: usize, b: usize) -> ScalarExpr {
        use std::cmp::Ordering::*;
        match a.cmp(&b) {
            Equal => ScalarExpr::zero(),
            Less => self
                .coeffs
                .get(&(a, b))
                .cloned()
                .unwrap_or_else(ScalarExpr::zero),
            Greater => self
                .coeffs
                .get(&(b, a))
                .map(|c| c.neg())
                .unwrap_or_else(ScalarExpr::zero),
        }
    }

    pub fn set(&mut self, a: usize, b: usize, c: ScalarExpr) {
        assert!(a < b);
        if c.is_zero() {
            self.coeffs.remove(&(a, b));
        } else {
            self.coeffs.insert((a, b), c);
        }
    }

    pub fn add_to(&mut self, a: usize, b: usize, c: ScalarExpr) {
        if a == b || c.is_zero() {
            return;
        }
        let (a, b, c) = if a < b { (a, b, c) } else { (b, a, c.neg()) };
        let cur = self.get(a, b).add(&c);
        self.set(a, b, cur);
    }
}

/// The dual frame of the coframe: `dual[a]` is the coordinate component
/// vector of the vector field dual to basis form `a`.
pub fn dual_frame(s: &AGStructure) -> Result<Vec<Vec<ScalarExpr>>, ConnectionError> {
    let m = s.coefficient_matrix();
    let inv = linalg::invert(&m).ok_or(ConnectionError::SingularCoframe)?;
    // columns of the inverse
    let n = s.dim();
    Ok((0..n)
        .map(|a| (0..n).map(|row| inv[row][a].clone()).collect())
        .collect())
}

/// Expand a 2-form in the coframe basis. Reconstruction is exact.
pub fn expand_2form(
    a: &DiffForm,
    s: &AGStructure,
    dual: &[Vec<ScalarExpr>],
) -> CoframeExpansion {
    assert_eq!(a.degree, 2);
    let n = s.dim();
    let mut out = CoframeExpansion::zero(n);
    for ia in 0..n {
        for ib in ia + 1..n {
            // a(e_ia, e_ib)
            let mut acc = ScalarExpr::zero();
            for (idx, c) in &a.terms {
                let (m, k) = (idx[0], idx[1]);
                let det = dual[ia][m]
                    .mul(&dual[ib][k])
                    .sub(&dual[ia][k].mul(&dual[ib][m]));
                if !det.is_zero() {
                    acc = acc.add(&c.mul(&det));
                }
            }
            if !acc.is_zero() {
                out.set(ia, ib, acc);
            }
        }
    }
    out
}

/// Wedge-sum an expansion back into a coordinate-differential 2-form.
pub fn reconstruct(exp: &CoframeExpansion, s: &AGStructure) -> DiffForm {
    let mut out = DiffForm::zero(2);
    for ((a, b), c) in &exp.coeffs {
        let (alpha_a, i_a) = s.basis_pair(*a);
        let (alpha_b, i_b) = s.basis_pair(*b);
        let w = s.w(alpha_a, i_a).wedge(s.w(alpha_b, i_b));
        out = out.add(&w.scale(c));
    }
    out
}

/// Triangularize a list of 1-forms, solving them for the given coordinate
/// differentials, and return the substitution map `d(var) -> rest`.
///
/// Each returned 1-form is fully reduced: it contains no solved differential.
pub fn solve_for_differentials(
    system: &[DiffForm],
    solved_vars: &[usize],
    n_coords: usize,
) -> Result<BTreeMap<usize, DiffForm>, FrobeniusError> {
    let rows = system.len();
    let cols = solved_vars.len();
    if rows < cols {
        return Err(FrobeniusError::NotSolvable(format!(
            "{rows} forms cannot determine {cols} differentials"
        )));
    }
    // matrix over the solved differentials; rhs carries the rest
    let mut mat = vec![vec![ScalarExpr::zero(); cols]; rows];
    let mut rest = vec![Vec::new(); rows];
    for (r, th) in system.iter().enumerate() {
        assert_eq!(th.degree, 1);
        for (idx, c) in &th.terms {
            let m = idx[0];
            match solved_vars.iter().position(|v| *v == m) {
                Some(col) => mat[r][col] = c.clone(),
                None => rest[r].push((m, c.clone())),
            }
        }
    }
    // rhs as vectors over the unsolved differentials
    let free: Vec<usize> = (0..n_coords)
        .filter(|m| !solved_vars.contains(m))
        .collect();
    let mut rhs = vec![vec![ScalarExpr::zero(); free.len()]; rows];
    for (r, terms) in rest.iter().enumerate() {
        for (m, c) in terms {
            let col = free.iter().position(|v| v == m).unwrap();
            rhs[r][col] = c.neg(); // theta = M d(solved) + rest = 0
        }
    }
    // solve column by column: x = M^{-1} rhs (M may be rectangular tall)
    let mut solutions: Vec<Vec<ScalarExpr>> = Vec::with_capacity(free.len());
    for fc in 0..free.len() {
        let b: Vec<ScalarExpr> = (0..rows).map(|r| rhs[r][fc].clone()).collect();
        let sol = linalg::solve(mat.clone(), b);
        if !sol.is_consistent() {
            return Err(FrobeniusError::NotSolvable(
                "inconsistent linear system for the solved differentials".into(),
            ));
        }
        if !sol.free.is_empty() {
            return Err(FrobeniusError::NotSolvable(
                "system does not determine all requested differentials".into(),
            ));
        }
        solutions.push(sol.values);
    }
    let mut subs = BTreeMap::new();
    for (col, var) in solved_vars.iter().enumerate() {
        let mut f = DiffForm::zero(1);
        for (fc, fvar) in free.iter().enumerate() {
            f.add_term(vec![*fvar], solutions[fc][col].clone());
        }
        subs.insert(*var, f);
    }
    Ok(subs)
}

/// Reduce a form modulo a Pfaffian system solved for `solved_vars`: every
/// occurrence of a solved differential is substituted away.
pub fn reduce_mod(
    a: &DiffForm,
    system: &[DiffForm],
    solved_vars: &[usize],
    n_coords: usize,
) -> Result<DiffForm, FrobeniusError> {
    let subs = solve_for_differentials(system, solved_vars, n_coords)?;
    Ok(a.substitute_differentials(&subs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::load_structure;

    const EX3_5: &str = "\
[structure]
p = 2
q = 2
coordinates = x, y, u, v
functions = f(u)
[coframe]
w_1_3 = \"dx + f(u)*dy\"
w_2_3 = \"dy\"
w_1_4 = \"du\"
w_2_4 = \"dv\"
";

    #[test]
    fn expansion_reconstructs() {
        let s = load_structure(EX3_5).unwrap();
        let dual = dual_frame(&s).unwrap();
        // a generic 2-form
        let f = ScalarExpr::deriv(0, 2, 1);
        let a = s
            .w(1, 3)
            .wedge(s.w(2, 4))
            .scale(&f)
            .add(&s.w(2, 3).wedge(s.w(1, 4)));
        let exp = expand_2form(&a, &s, &dual);
        assert_eq!(reconstruct(&exp, &s), a);
        // coefficient of w_1^3 ^ w_2^4 is f'(u)
        let i13 = s.basis_index(1, 3);
        let i24 = s.basis_index(2, 4);
        assert_eq!(exp.get(i13, i24), f);
        assert_eq!(exp.get(i24, i13), f.neg());
    }

    #[test]
    fn zero_form_expands_to_zero() {
        let s = load_structure(EX3_5).unwrap();
        let dual = dual_frame(&s).unwrap();
        let exp = expand_2form(&DiffForm::zero(2), &s, &dual);
        assert!(exp.is_zero());
    }

    #[test]
    fn reduce_mod_kills_solved_differentials() {
        // reduce dx^du mod {dx + mu du} with mu a coordinate stand-in:
        // dx -> -mu du gives -mu du^du = 0.
        let s = load_structure(EX3_5).unwrap();
        let mu = ScalarExpr::coord(3); // reuse v as the parameter stand-in
        let theta = DiffForm::one_form(vec![(0, ScalarExpr::one()), (2, mu)]);
        let a = DiffForm::d_coord(0).wedge(&DiffForm::d_coord(2));
        let r = reduce_mod(&a, &[theta], &[0], s.ctx.dim()).unwrap();
        assert!(r.is_zero());
    }
}
