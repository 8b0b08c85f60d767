//! Multivariate polynomials with exact rational coefficients over [`Atom`]s.
//!
//! Monomials are kept in graded-lex order so that the leading term is well
//! behaved under multiplication; this is what the exact division and gcd
//! routines rely on. `exp` atoms with polynomial-in-coordinates arguments are
//! merged multiplicatively inside each monomial (`exp(a)*exp(b) -> exp(a+b)`,
//! `exp(a)^k -> exp(k*a)`), which keeps zero-testing effective on coframes
//! with exponential coefficients.

use crate::atom::Atom;
use num::{BigRational, One, Zero};
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// Power product of atoms, sorted by atom, exponents > 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<(Atom, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn atom(a: Atom) -> Self {
        Monomial(vec![(a, 1)])
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_degree(&self) -> u64 {
        self.0.iter().map(|(_, e)| *e as u64).sum()
    }

    pub fn degree_of(&self, a: &Atom) -> u32 {
        self.0
            .iter()
            .find(|(b, _)| b == a)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.degree_of(a) > 0
    }

    /// Merge two sorted exponent lists.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// `self / other` when every exponent of `other` is covered.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for (a, e) in &self.0 {
            let mut e = *e;
            if j < other.0.len() && other.0[j].0 == *a {
                if other.0[j].1 > e {
                    return None;
                }
                e -= other.0[j].1;
                j += 1;
            }
            if e > 0 {
                out.push((a.clone(), e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    pub fn gcd(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::new();
        for (a, e) in &self.0 {
            let f = other.degree_of(a);
            let m = (*e).min(f);
            if m > 0 {
                out.push((a.clone(), m));
            }
        }
        Monomial(out)
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.0.iter().map(|(a, _)| a)
    }
}

/// Graded lexicographic order; on equal total degree the first differing
/// atom (in ascending atom order) with the larger exponent wins.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.total_degree().cmp(&other.total_degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.0.get(i), other.0.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((a, e)), Some((b, f))) => match a.cmp(b) {
                    // Earlier atom present only on one side: that side has
                    // positive exponent where the other has zero.
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => {
                        match e.cmp(f) {
                            Ordering::Equal => {}
                            ord => return ord,
                        }
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse multivariate polynomial over `BigRational`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Poly {
    pub terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly {
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Poly::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        Poly { terms }
    }

    pub fn from_monomial(m: Monomial, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn atom(a: Atom) -> Self {
        Poly::from_monomial(Monomial::atom(a), BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&Monomial::one())
                .map(|c| c.is_one())
                .unwrap_or(false)
    }

    /// Constant value if the polynomial has no atoms.
    pub fn as_constant(&self) -> Option<BigRational> {
        if self.is_zero() {
            return Some(BigRational::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Monomial::one()) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + &c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn pow(&self, mut e: u32) -> Poly {
        let mut base = self.clone();
        let mut acc = Poly::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn leading(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn contains_atom(&self, a: &Atom) -> bool {
        self.terms.keys().any(|m| m.contains(a))
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut set = std::collections::BTreeSet::new();
        for m in self.terms.keys() {
            for a in m.atoms() {
                set.insert(a.clone());
            }
        }
        set.into_iter().collect()
    }

    pub fn max_degree_of(&self, a: &Atom) -> u32 {
        self.terms.keys().map(|m| m.degree_of(a)).max().unwrap_or(0)
    }

    /// Exact division; `None` if `other` does not divide `self`.
    pub fn div_exact(&self, other: &Poly) -> Option<Poly> {
        if other.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = other.as_constant() {
            return Some(self.scale(&(BigRational::one() / c)));
        }
        let (lm, lc) = other.leading().unwrap();
        let (lm, lc) = (lm.clone(), lc.clone());
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        while !rem.is_zero() {
            let (rm, rc) = rem.leading().unwrap();
            let qm = rm.div(&lm)?;
            let qc = rc / &lc;
            let qt = Poly::from_monomial(qm, qc);
            quot = quot.add(&qt);
            rem = rem.sub(&qt.mul(other));
        }
        Some(quot)
    }

    /// View as univariate in `main`: map degree -> coefficient polynomial.
    fn as_univariate(&self, main: &Atom) -> BTreeMap<u32, Poly> {
        let mut out: BTreeMap<u32, Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let d = m.degree_of(main);
            let rest = Monomial(
                m.0.iter()
                    .filter(|(a, _)| a != main)
                    .cloned()
                    .collect::<Vec<_>>(),
            );
            out.entry(d)
                .or_insert_with(Poly::zero)
                .add_term(rest, c.clone());
        }
        out.retain(|_, p| !p.is_zero());
        out
    }

    fn from_univariate(main: &Atom, coeffs: &BTreeMap<u32, Poly>) -> Poly {
        let mut out = Poly::zero();
        for (d, p) in coeffs {
            let factor = if *d == 0 {
                Poly::one()
            } else {
                Poly::from_monomial(Monomial(vec![(main.clone(), *d)]), BigRational::one())
            };
            out = out.add(&p.mul(&factor));
        }
        out
    }

    /// Content of `self` seen as univariate in `main` (gcd of coefficients).
    fn content_wrt(&self, main: &Atom) -> Poly {
        let uni = self.as_univariate(main);
        let mut content = Poly::zero();
        for p in uni.values() {
            content = gcd(&content, p);
            if content.is_one() {
                break;
            }
        }
        content
    }

    /// Normalize the sign/scale so the leading coefficient is positive and
    /// the rational content is 1 (integer-primitive form is not needed; any
    /// canonical scalar normalization works since we are over a field).
    fn normalize_unit(&self) -> Poly {
        match self.leading() {
            None => Poly::zero(),
            Some((_, lc)) => self.scale(&(BigRational::one() / lc)),
        }
    }
}

/// Pseudo-remainder of `a` by `b` w.r.t. `main` (classic prem).
fn pseudo_rem(a: &Poly, b: &Poly, main: &Atom) -> Poly {
    let db = b.max_degree_of(main);
    assert!(db > 0 || !b.is_zero());
    let b_uni = b.as_univariate(main);
    let lc_b = b_uni.get(&db).cloned().unwrap_or_else(Poly::zero);
    let mut r = a.clone();
    loop {
        let dr = r.max_degree_of(main);
        if r.is_zero() || dr < db {
            return r;
        }
        let r_uni = r.as_univariate(main);
        let lc_r = r_uni.get(&dr).cloned().unwrap_or_else(Poly::zero);
        // r := lc_b * r - lc_r * main^(dr-db) * b
        let shift = Poly::from_monomial(
            Monomial(vec![(main.clone(), dr - db)]),
            BigRational::one(),
        );
        r = lc_b.mul(&r).sub(&lc_r.mul(&shift).mul(b));
    }
}

/// Multivariate gcd over the rationals (primitive PRS). Result is normalized
/// to leading coefficient 1.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.normalize_unit();
    }
    if b.is_zero() {
        return a.normalize_unit();
    }
    if a.as_constant().is_some() || b.as_constant().is_some() {
        return Poly::one();
    }
    // Main variable: the largest atom present in either polynomial.
    let main = {
        let ma = a.atoms().into_iter().max().unwrap();
        let mb = b.atoms().into_iter().max().unwrap();
        ma.max(mb)
    };
    let ca = a.content_wrt(&main);
    let cb = b.content_wrt(&main);
    let content = gcd(&ca, &cb);
    let pa = a.div_exact(&ca).expect("content divides");
    let pb = b.div_exact(&cb).expect("content divides");
    let (mut f, mut g) = if pa.max_degree_of(&main) >= pb.max_degree_of(&main) {
        (pa, pb)
    } else {
        (pb, pa)
    };
    while !g.is_zero() {
        let r = pseudo_rem(&f, &g, &main);
        f = g;
        g = if r.is_zero() {
            r
        } else {
            let c = r.content_wrt(&main);
            r.div_exact(&c).expect("content divides")
        };
    }
    // f is the primitive gcd in main; restore content.
    let fc = f.content_wrt(&main);
    let fp = f.div_exact(&fc).expect("content divides");
    content.mul(&fp).normalize_unit()
}

/// Partial fraction-free Gaussian helpers live elsewhere; here we only need
/// derivative of a polynomial term by term, delegated from the expression
/// layer (atoms may differentiate into full rational expressions).
#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::Atom;

    fn x() -> Poly {
        Poly::atom(Atom::Coord(0))
    }
    fn y() -> Poly {
        Poly::atom(Atom::Coord(1))
    }
    fn c(n: i64) -> Poly {
        Poly::constant(BigRational::from_integer(n.into()))
    }

    #[test]
    fn monomial_order_is_multiplicative() {
        let m_x = Monomial::atom(Atom::Coord(0));
        let m_y = Monomial::atom(Atom::Coord(1));
        let x2 = m_x.mul(&m_x);
        let xy = m_x.mul(&m_y);
        assert!(m_x > m_y, "earlier atom dominates at equal degree");
        assert!(x2 > xy);
        assert!(xy > m_y.mul(&m_y));
    }

    #[test]
    fn div_exact_roundtrip() {
        let a = x().add(&y()).mul(&x().sub(&y()));
        let q = a.div_exact(&x().add(&y())).unwrap();
        assert_eq!(q, x().sub(&y()));
        assert!(a.div_exact(&x().add(&c(1))).is_none());
    }

    #[test]
    fn gcd_cancels_common_factor() {
        let f = x().sub(&y());
        let a = f.mul(&f).mul(&x());
        let b = f.mul(&y());
        let g = gcd(&a, &b);
        assert_eq!(g, f.normalize_unit());
    }

    #[test]
    fn gcd_of_coprime_is_one() {
        let a = x().mul(&x()).add(&c(1));
        let b = y().add(&c(2));
        assert!(gcd(&a, &b).is_one());
    }
}
