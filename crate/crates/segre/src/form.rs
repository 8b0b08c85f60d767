//! Graded exterior algebra over the scalar layer.
//!
//! A [`DiffForm`] maps strictly increasing coordinate multi-indices to scalar
//! coefficients; the canonical ordering absorbs all signs, and zero
//! coefficients are never stored.

use crate::atom::CoordId;
use crate::context::Context;
use crate::expr::ScalarExpr;
use std::collections::BTreeMap;

/// Strictly increasing list of coordinate ids.
pub type MultiIndex = Vec<CoordId>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffForm {
    pub degree: usize,
    pub terms: BTreeMap<MultiIndex, ScalarExpr>,
}

/// Sort a multi-index, returning the permutation sign; `None` on repeats.
fn sort_index(mut idx: Vec<CoordId>) -> Option<(MultiIndex, i32)> {
    let mut sign = 1;
    // insertion sort, counting transpositions
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    for w in idx.windows(2) {
        if w[0] == w[1] {
            return None;
        }
    }
    Some((idx, sign))
}

impl DiffForm {
    pub fn zero(degree: usize) -> DiffForm {
        DiffForm {
            degree,
            terms: BTreeMap::new(),
        }
    }

    /// Degree-0 form (a scalar).
    pub fn scalar(c: ScalarExpr) -> DiffForm {
        let mut f = DiffForm::zero(0);
        f.add_term(vec![], c);
        f
    }

    /// The coordinate differential `d z_i`.
    pub fn d_coord(i: CoordId) -> DiffForm {
        let mut f = DiffForm::zero(1);
        f.add_term(vec![i], ScalarExpr::one());
        f
    }

    pub fn one_form(terms: Vec<(CoordId, ScalarExpr)>) -> DiffForm {
        let mut f = DiffForm::zero(1);
        for (i, c) in terms {
            f.add_term(vec![i], c);
        }
        f
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Add `c` on an arbitrary-order index, normalizing order and sign.
    pub fn add_term(&mut self, idx: Vec<CoordId>, c: ScalarExpr) {
        if c.is_zero() {
            return;
        }
        let Some((sorted, sign)) = sort_index(idx) else {
            return; // repeated differential
        };
        debug_assert_eq!(sorted.len(), self.degree);
        let c = if sign < 0 { c.neg() } else { c };
        match self.terms.entry(sorted) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().add(&c);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &DiffForm) -> DiffForm {
        assert_eq!(self.degree, other.degree, "degree mismatch in add");
        let mut out = self.clone();
        for (i, c) in &other.terms {
            out.add_term(i.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &DiffForm) -> DiffForm {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> DiffForm {
        DiffForm {
            degree: self.degree,
            terms: self
                .terms
                .iter()
                .map(|(i, c)| (i.clone(), c.neg()))
                .collect(),
        }
    }

    pub fn scale(&self, c: &ScalarExpr) -> DiffForm {
        let mut out = DiffForm::zero(self.degree);
        for (i, k) in &self.terms {
            out.add_term(i.clone(), k.mul(c));
        }
        out
    }

    /// Exterior product. Bilinear; sign from sorting the merged index.
    pub fn wedge(&self, other: &DiffForm) -> DiffForm {
        let mut out = DiffForm::zero(self.degree + other.degree);
        for (i1, c1) in &self.terms {
            for (i2, c2) in &other.terms {
                let mut idx = i1.clone();
                idx.extend_from_slice(i2);
                out.add_term(idx, c1.mul(c2));
            }
        }
        out
    }

    /// Exterior derivative: `d(c dzI) = sum_x (dc/dx) dx ^ dzI`.
    pub fn ext_d(&self, n_coords: usize) -> DiffForm {
        let mut out = DiffForm::zero(self.degree + 1);
        for (idx, c) in &self.terms {
            for x in 0..n_coords {
                if idx.contains(&x) {
                    continue;
                }
                let dc = c.diff(x);
                if dc.is_zero() {
                    continue;
                }
                let mut new_idx = vec![x];
                new_idx.extend_from_slice(idx);
                out.add_term(new_idx, dc);
            }
        }
        out
    }

    /// Interior evaluation of a 1-form on a tangent vector given by
    /// coordinate components.
    pub fn apply_vector(&self, v: &[ScalarExpr]) -> ScalarExpr {
        assert_eq!(self.degree, 1);
        let mut acc = ScalarExpr::zero();
        for (idx, c) in &self.terms {
            acc = acc.add(&c.mul(&v[idx[0]]));
        }
        acc
    }

    /// Substitute solved coordinate differentials: every occurrence of a key
    /// differential is replaced by its 1-form value. Values must not contain
    /// any key differential.
    pub fn substitute_differentials(&self, subs: &BTreeMap<CoordId, DiffForm>) -> DiffForm {
        let mut out = DiffForm::zero(self.degree);
        for (idx, c) in &self.terms {
            // Expand each differential in the index as either itself or its
            // substitution, distributing the wedge product.
            let mut parts: Vec<DiffForm> = Vec::with_capacity(idx.len());
            for &i in idx {
                match subs.get(&i) {
                    Some(f) => parts.push(f.clone()),
                    None => parts.push(DiffForm::d_coord(i)),
                }
            }
            let mut acc = DiffForm::scalar(c.clone());
            for p in parts {
                acc = acc.wedge(&p);
            }
            out = out.add(&acc);
        }
        out
    }

    pub fn coefficient(&self, idx: &[CoordId]) -> ScalarExpr {
        let Some((sorted, sign)) = sort_index(idx.to_vec()) else {
            return ScalarExpr::zero();
        };
        let c = self
            .terms
            .get(&sorted)
            .cloned()
            .unwrap_or_else(ScalarExpr::zero);
        if sign < 0 {
            c.neg()
        } else {
            c
        }
    }

    /// Coordinates whose differential occurs in some term.
    pub fn support(&self) -> Vec<CoordId> {
        let mut set = std::collections::BTreeSet::new();
        for idx in self.terms.keys() {
            set.extend(idx.iter().copied());
        }
        set.into_iter().collect()
    }

    pub fn map_coefficients(
        &self,
        f: &dyn Fn(&ScalarExpr) -> ScalarExpr,
    ) -> DiffForm {
        let mut out = DiffForm::zero(self.degree);
        for (i, c) in &self.terms {
            out.add_term(i.clone(), f(c));
        }
        out
    }

    pub fn render(&self, ctx: &Context, pretty: bool) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut parts = Vec::new();
        for (idx, c) in &self.terms {
            let wedge = idx
                .iter()
                .map(|i| format!("d{}", ctx.coord_name(*i)))
                .collect::<Vec<_>>()
                .join("^");
            let cs = c.render(ctx, pretty);
            let body = if cs == "1" {
                wedge
            } else if cs == "-1" {
                format!("-{wedge}")
            } else if c.num().terms.len() > 1 || !c.den().is_one() {
                format!("({cs})*{wedge}")
            } else {
                format!("{cs}*{wedge}")
            };
            parts.push(body);
        }
        let mut out = String::new();
        for (i, p) in parts.iter().enumerate() {
            if i == 0 {
                out.push_str(p);
            } else if let Some(stripped) = p.strip_prefix('-') {
                out.push_str(" - ");
                out.push_str(stripped);
            } else {
                out.push_str(" + ");
                out.push_str(p);
            }
        }
        out
    }

    pub fn display(&self, ctx: &Context) -> String {
        self.render(ctx, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> usize {
        0
    }
    fn y() -> usize {
        1
    }
    fn u() -> usize {
        2
    }

    #[test]
    fn wedge_of_repeated_differential_vanishes() {
        let dx = DiffForm::d_coord(x());
        assert!(dx.wedge(&dx).is_zero());
    }

    #[test]
    fn wedge_collapses_dy_dy() {
        // (dx + f(u) dy) ^ dy = dx^dy
        let f = ScalarExpr::deriv(0, u(), 0);
        let a = DiffForm::one_form(vec![(x(), ScalarExpr::one()), (y(), f)]);
        let dy = DiffForm::d_coord(y());
        let w = a.wedge(&dy);
        assert_eq!(w.terms.len(), 1);
        assert_eq!(w.coefficient(&[x(), y()]), ScalarExpr::one());
    }

    #[test]
    fn ext_d_of_closed_form() {
        let dx = DiffForm::d_coord(x());
        assert!(dx.ext_d(3).is_zero());
    }

    #[test]
    fn ext_d_formal_function() {
        // d(f(u) dy) = f'(u) du ^ dy
        let f = ScalarExpr::deriv(0, u(), 0);
        let a = DiffForm::one_form(vec![(y(), f)]);
        let da = a.ext_d(3);
        assert_eq!(da.coefficient(&[u(), y()]), ScalarExpr::deriv(0, u(), 1));
        assert_eq!(da.terms.len(), 1);
    }

    #[test]
    fn d_squared_zero() {
        let f = ScalarExpr::deriv(0, u(), 0);
        let xy = ScalarExpr::coord(x()).mul(&ScalarExpr::coord(y()));
        let a = DiffForm::one_form(vec![(y(), f.mul(&xy)), (x(), xy.powi(3).unwrap())]);
        assert!(a.ext_d(3).ext_d(3).is_zero());
    }

    #[test]
    fn anticommutativity_sign() {
        let f = ScalarExpr::coord(u());
        let a = DiffForm::one_form(vec![(x(), f.clone())]);
        let b = DiffForm::one_form(vec![(y(), f)]);
        assert_eq!(a.wedge(&b), b.wedge(&a).neg());
    }
}
