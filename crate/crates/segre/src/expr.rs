//! Canonical symbolic scalars: rational functions over the atom set.
//!
//! A `ScalarExpr` is a reduced fraction of two [`Poly`]s: gcd of numerator
//! and denominator is 1, the denominator is monic under the term order and
//! keeps no invertible `exp` factor. With the fixed atom order this makes the
//! representation unique, so structural equality is a sound equality test.
//!
//! Zero-testing is sound but incomplete: `exp`/`log` atoms are independent
//! indeterminates, so an expression that vanishes only through a
//! transcendental identity not covered by the `exp(a)*exp(b) -> exp(a+b)`
//! rewrite may report nonzero. Callers that care consult the numeric oracle.

use crate::atom::{Atom, ConstId, CoordId, FuncId};
use crate::context::Context;
use crate::error::ScalarError;
use crate::poly::{gcd, Monomial, Poly};
use num::{BigInt, BigRational, One, Signed, Zero};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScalarExpr {
    num: Poly,
    den: Poly,
}

/// Merge `exp` atoms inside one monomial when their arguments are polynomial
/// in coordinates and constants.
fn mergeable_exp_arg(e: &ScalarExpr) -> bool {
    e.den.is_one()
        && e.num
            .atoms()
            .iter()
            .all(|a| matches!(a, Atom::Coord(_) | Atom::Const(_)))
}

fn normalize_monomial(m: &Monomial) -> (Monomial, Option<Monomial>) {
    // Returns (normalized monomial, None) or (rest, Some(..)) unused; single
    // return keeps call sites simple: we always return the rebuilt monomial.
    let mut exp_sum = Poly::zero();
    let mut n_merge = 0usize;
    let mut merged_power = 0u32;
    for (a, e) in &m.0 {
        if let Atom::Exp(arg) = a {
            if mergeable_exp_arg(arg) {
                n_merge += 1;
                merged_power += *e;
                exp_sum = exp_sum.add(&arg.num.scale(&BigRational::from_integer((*e).into())));
            }
        }
    }
    if n_merge == 0 || (n_merge == 1 && merged_power == 1) {
        return (m.clone(), None);
    }
    let mut rest: Vec<(Atom, u32)> = m
        .0
        .iter()
        .filter(|(a, _)| match a {
            Atom::Exp(arg) => !mergeable_exp_arg(arg),
            _ => true,
        })
        .cloned()
        .collect();
    if !exp_sum.is_zero() {
        let atom = Atom::Exp(Box::new(ScalarExpr {
            num: exp_sum,
            den: Poly::one(),
        }));
        rest.push((atom, 1));
        rest.sort_by(|(a, _), (b, _)| a.cmp(b));
    }
    (Monomial(rest), None)
}

fn normalize_exp_poly(p: &Poly) -> Poly {
    let mut out = Poly::zero();
    for (m, c) in &p.terms {
        let (m2, _) = normalize_monomial(m);
        out.add_term(m2, c.clone());
    }
    out
}

/// Common invertible `exp` factor of a polynomial: for each mergeable `exp`
/// atom, the minimum power over all monomials.
fn exp_content(p: &Poly) -> Vec<(ScalarExpr, u32)> {
    let mut first = true;
    let mut common: Vec<(ScalarExpr, u32)> = Vec::new();
    for m in p.terms.keys() {
        let here: Vec<(ScalarExpr, u32)> = m
            .0
            .iter()
            .filter_map(|(a, e)| match a {
                Atom::Exp(arg) if mergeable_exp_arg(arg) => Some(((**arg).clone(), *e)),
                _ => None,
            })
            .collect();
        if first {
            common = here;
            first = false;
        } else {
            common.retain(|(arg, _)| here.iter().any(|(b, _)| b == arg));
            for (arg, e) in common.iter_mut() {
                let he = here
                    .iter()
                    .find(|(b, _)| b == arg)
                    .map(|(_, k)| *k)
                    .unwrap_or(0);
                *e = (*e).min(he);
            }
        }
        if common.is_empty() {
            break;
        }
    }
    common.retain(|(_, e)| *e > 0);
    common
}

impl ScalarExpr {
    fn make(num: Poly, den: Poly) -> ScalarExpr {
        assert!(!den.is_zero(), "denominator normalizes to zero");
        let mut num = normalize_exp_poly(&num);
        let mut den = normalize_exp_poly(&den);
        if num.is_zero() {
            return ScalarExpr {
                num,
                den: Poly::one(),
            };
        }
        // Move invertible exp factors out of the denominator.
        let content = exp_content(&den);
        if !content.is_empty() {
            let mut shift = Poly::one();
            let mut divisor = Poly::one();
            for (arg, e) in &content {
                let inv = ScalarExpr::exp(arg.neg());
                shift = shift.mul(&inv.num.pow(*e));
                divisor = divisor.mul(&Poly::from_monomial(
                    Monomial(vec![(Atom::Exp(Box::new(arg.clone())), *e)]),
                    BigRational::one(),
                ));
            }
            den = den.div_exact(&divisor).expect("exp content divides");
            num = normalize_exp_poly(&num.mul(&shift));
        }
        let g = gcd(&num, &den);
        if !g.is_one() {
            num = num.div_exact(&g).expect("gcd divides num");
            den = den.div_exact(&g).expect("gcd divides den");
        }
        let lc = den.leading().map(|(_, c)| c.clone()).unwrap();
        if !lc.is_one() {
            let inv = BigRational::one() / lc;
            num = num.scale(&inv);
            den = den.scale(&inv);
        }
        ScalarExpr { num, den }
    }

    pub fn zero() -> ScalarExpr {
        ScalarExpr {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn one() -> ScalarExpr {
        ScalarExpr {
            num: Poly::one(),
            den: Poly::one(),
        }
    }

    pub fn from_int(n: i64) -> ScalarExpr {
        ScalarExpr::from_rational(BigRational::from_integer(n.into()))
    }

    pub fn from_rational(c: BigRational) -> ScalarExpr {
        ScalarExpr {
            num: Poly::constant(c),
            den: Poly::one(),
        }
    }

    pub fn rational(n: i64, d: i64) -> ScalarExpr {
        ScalarExpr::from_rational(BigRational::new(n.into(), d.into()))
    }

    pub fn atom(a: Atom) -> ScalarExpr {
        ScalarExpr {
            num: Poly::atom(a),
            den: Poly::one(),
        }
    }

    pub fn coord(id: CoordId) -> ScalarExpr {
        ScalarExpr::atom(Atom::Coord(id))
    }

    pub fn constant(id: ConstId) -> ScalarExpr {
        ScalarExpr::atom(Atom::Const(id))
    }

    pub fn deriv(func: FuncId, arg: CoordId, order: u32) -> ScalarExpr {
        ScalarExpr::atom(Atom::Deriv { func, arg, order })
    }

    pub fn exp(e: ScalarExpr) -> ScalarExpr {
        if e.is_zero() {
            return ScalarExpr::one();
        }
        ScalarExpr::atom(Atom::Exp(Box::new(e)))
    }

    pub fn log(e: ScalarExpr) -> ScalarExpr {
        if e == ScalarExpr::one() {
            return ScalarExpr::zero();
        }
        ScalarExpr::atom(Atom::Log(Box::new(e)))
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    /// Sound when `true`; may report `false` for transcendental zeros.
    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn as_rational(&self) -> Option<BigRational> {
        if !self.den.is_one() {
            return None;
        }
        self.num.as_constant()
    }

    pub fn add(&self, other: &ScalarExpr) -> ScalarExpr {
        ScalarExpr::make(
            self.num
                .mul(&other.den)
                .add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn sub(&self, other: &ScalarExpr) -> ScalarExpr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> ScalarExpr {
        ScalarExpr {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &ScalarExpr) -> ScalarExpr {
        ScalarExpr::make(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn div(&self, other: &ScalarExpr) -> Result<ScalarExpr, ScalarError> {
        if other.is_zero() {
            return Err(ScalarError::DivisionByZero);
        }
        Ok(ScalarExpr::make(
            self.num.mul(&other.den),
            self.den.mul(&other.num),
        ))
    }

    pub fn scale(&self, c: &BigRational) -> ScalarExpr {
        if c.is_zero() {
            return ScalarExpr::zero();
        }
        ScalarExpr::make(self.num.scale(c), self.den.clone())
    }

    pub fn powi(&self, e: i64) -> Result<ScalarExpr, ScalarError> {
        if e == 0 {
            return Ok(ScalarExpr::one());
        }
        let p = e.unsigned_abs() as u32;
        let raised = ScalarExpr::make(self.num.pow(p), self.den.pow(p));
        if e > 0 {
            Ok(raised)
        } else {
            ScalarExpr::one().div(&raised)
        }
    }

    /// Derivative of a single atom by `x`, as a full expression.
    fn atom_diff(a: &Atom, x: CoordId) -> ScalarExpr {
        match a {
            Atom::Coord(c) => {
                if *c == x {
                    ScalarExpr::one()
                } else {
                    ScalarExpr::zero()
                }
            }
            Atom::Const(_) => ScalarExpr::zero(),
            Atom::Deriv { func, arg, order } => {
                if *arg == x {
                    ScalarExpr::deriv(*func, *arg, order + 1)
                } else {
                    ScalarExpr::zero()
                }
            }
            Atom::Exp(inner) => {
                let d = inner.diff(x);
                if d.is_zero() {
                    ScalarExpr::zero()
                } else {
                    d.mul(&ScalarExpr::atom(a.clone()))
                }
            }
            Atom::Log(inner) => {
                let d = inner.diff(x);
                if d.is_zero() {
                    ScalarExpr::zero()
                } else {
                    d.div(inner).expect("log argument nonzero")
                }
            }
        }
    }

    fn poly_diff(p: &Poly, x: CoordId) -> ScalarExpr {
        let mut acc = ScalarExpr::zero();
        for (m, c) in &p.terms {
            for (idx, (a, e)) in m.0.iter().enumerate() {
                let da = ScalarExpr::atom_diff(a, x);
                if da.is_zero() {
                    continue;
                }
                // c * e * a^(e-1) * prod(others) * da
                let mut rest = Poly::constant(c * BigRational::from_integer((*e).into()));
                let mut mono: Vec<(Atom, u32)> = Vec::new();
                for (jdx, (b, f)) in m.0.iter().enumerate() {
                    let f = if jdx == idx { *f - 1 } else { *f };
                    if f > 0 {
                        mono.push((b.clone(), f));
                    }
                }
                rest = rest.mul(&Poly::from_monomial(Monomial(mono), BigRational::one()));
                acc = acc.add(
                    &ScalarExpr {
                        num: normalize_exp_poly(&rest),
                        den: Poly::one(),
                    }
                    .mul(&da),
                );
            }
        }
        acc
    }

    /// Partial derivative by a coordinate. Linear, satisfies the product,
    /// quotient and chain rules; total on canonical input.
    pub fn diff(&self, x: CoordId) -> ScalarExpr {
        let dn = ScalarExpr::poly_diff(&self.num, x);
        if self.den.is_one() {
            return dn;
        }
        let dd = ScalarExpr::poly_diff(&self.den, x);
        let den_expr = ScalarExpr {
            num: self.den.clone(),
            den: Poly::one(),
        };
        let num_expr = ScalarExpr {
            num: self.num.clone(),
            den: Poly::one(),
        };
        // (n/d)' = n'/d - n d'/d^2
        dn.div(&den_expr)
            .unwrap()
            .sub(&num_expr.mul(&dd).div(&den_expr.mul(&den_expr)).unwrap())
    }

    /// Replace atoms by expressions. The rule is applied to atoms whose inner
    /// arguments (for `exp`/`log`) have already been rebuilt.
    pub fn subst(
        &self,
        rule: &dyn Fn(&Atom) -> Option<ScalarExpr>,
    ) -> Result<ScalarExpr, ScalarError> {
        let n = ScalarExpr::subst_poly(&self.num, rule)?;
        let d = ScalarExpr::subst_poly(&self.den, rule)?;
        n.div(&d)
    }

    fn subst_poly(
        p: &Poly,
        rule: &dyn Fn(&Atom) -> Option<ScalarExpr>,
    ) -> Result<ScalarExpr, ScalarError> {
        let mut acc = ScalarExpr::zero();
        for (m, c) in &p.terms {
            let mut term = ScalarExpr::from_rational(c.clone());
            for (a, e) in &m.0 {
                let rebuilt = match a {
                    Atom::Exp(inner) => {
                        let i2 = inner.subst(rule)?;
                        ScalarExpr::exp(i2)
                    }
                    Atom::Log(inner) => {
                        let i2 = inner.subst(rule)?;
                        ScalarExpr::log(i2)
                    }
                    other => ScalarExpr::atom(other.clone()),
                };
                let replaced = match rebuilt.single_atom() {
                    Some(at) => rule(&at).unwrap_or(rebuilt),
                    None => rebuilt,
                };
                term = term.mul(&replaced.powi(*e as i64)?);
            }
            acc = acc.add(&term);
        }
        Ok(acc)
    }

    /// The atom when the expression is exactly one atom to the first power.
    pub fn single_atom(&self) -> Option<Atom> {
        if !self.den.is_one() || self.num.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.num.terms.iter().next().unwrap();
        if !c.is_one() || m.0.len() != 1 || m.0[0].1 != 1 {
            return None;
        }
        Some(m.0[0].0.clone())
    }

    /// Substitute a coordinate by an expression.
    pub fn subst_coord(&self, x: CoordId, value: &ScalarExpr) -> Result<ScalarExpr, ScalarError> {
        self.subst(&|a| match a {
            Atom::Coord(c) if *c == x => Some(value.clone()),
            _ => None,
        })
    }

    /// Substitute a formal function by a polynomial in its argument
    /// (coefficients lowest-degree first); all derivative symbols follow.
    pub fn subst_func_poly(
        &self,
        func: FuncId,
        coeffs: &[ScalarExpr],
        arg: CoordId,
    ) -> Result<ScalarExpr, ScalarError> {
        self.subst(&|a| match a {
            Atom::Deriv { func: f, order, .. } if *f == func => {
                // k-th derivative of sum c_i t^i at t = arg.
                let mut acc = ScalarExpr::zero();
                for (i, c) in coeffs.iter().enumerate() {
                    let i = i as u32;
                    if i < *order {
                        continue;
                    }
                    let mut fall = BigRational::one();
                    for j in 0..*order {
                        fall *= BigRational::from_integer(BigInt::from(i - j));
                    }
                    let p = ScalarExpr::coord(arg).powi((i - *order) as i64).unwrap();
                    acc = acc.add(&c.scale(&fall).mul(&p));
                }
                Some(acc)
            }
            _ => None,
        })
    }

    /// Set every derivative of `func` of order >= `min_order` to zero.
    pub fn kill_derivs_from(&self, func: FuncId, min_order: u32) -> ScalarExpr {
        self.subst(&|a| match a {
            Atom::Deriv { func: f, order, .. } if *f == func && *order >= min_order => {
                Some(ScalarExpr::zero())
            }
            _ => None,
        })
        .expect("killing derivatives cannot create zero denominators from canonical input")
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut set: std::collections::BTreeSet<Atom> = self.num.atoms().into_iter().collect();
        set.extend(self.den.atoms());
        set.into_iter().collect()
    }

    /// All atoms including those nested inside exp/log arguments.
    pub fn atoms_deep(&self) -> Vec<Atom> {
        let mut set = std::collections::BTreeSet::new();
        fn walk(e: &ScalarExpr, set: &mut std::collections::BTreeSet<Atom>) {
            for a in e.atoms() {
                set.insert(a.clone());
                match &a {
                    Atom::Exp(inner) | Atom::Log(inner) => walk(inner, set),
                    _ => {}
                }
            }
        }
        walk(self, &mut set);
        set.into_iter().collect()
    }

    pub fn contains_coord(&self, x: CoordId) -> bool {
        self.atoms_deep().iter().any(|a| match a {
            Atom::Coord(c) => *c == x,
            Atom::Deriv { arg, .. } => *arg == x,
            _ => false,
        })
    }

    /// Rough size measure used for pivot selection in exact elimination.
    pub fn complexity(&self) -> usize {
        let mono: usize = self
            .num
            .terms
            .keys()
            .chain(self.den.terms.keys())
            .map(|m| 1 + m.0.len())
            .sum();
        mono + if self.den.is_one() { 0 } else { 2 }
    }

    /// Strip positive powers of the given atoms that divide the numerator
    /// (used to discard generically nonzero parameter factors).
    pub fn strip_atom_powers(&self, atoms: &[Atom]) -> ScalarExpr {
        let mut num = self.num.clone();
        for a in atoms {
            loop {
                let min_pow = num.terms.keys().map(|m| m.degree_of(a)).min().unwrap_or(0);
                if min_pow == 0 {
                    break;
                }
                let div = Poly::from_monomial(
                    Monomial(vec![(a.clone(), min_pow)]),
                    BigRational::one(),
                );
                num = num.div_exact(&div).unwrap();
            }
        }
        ScalarExpr::make(num, self.den.clone())
    }

    // ----- rendering -----

    fn monomial_string(m: &Monomial, ctx: &Context, pretty: bool) -> String {
        let mut parts = Vec::new();
        for (a, e) in &m.0 {
            let base = match a {
                Atom::Coord(c) => ctx.coord_name(*c).to_string(),
                Atom::Const(c) => ctx.const_name(*c).to_string(),
                Atom::Deriv { func, arg, order } => {
                    let f = ctx.func_name(*func);
                    let x = ctx.coord_name(*arg);
                    if *order == 0 {
                        format!("{f}({x})")
                    } else if pretty && *order <= 3 {
                        let primes = "'".repeat(*order as usize);
                        format!("{f}{primes}({x})")
                    } else {
                        format!("D({f},{order})({x})")
                    }
                }
                Atom::Exp(inner) => format!("exp({})", inner.render(ctx, pretty)),
                Atom::Log(inner) => format!("log({})", inner.render(ctx, pretty)),
            };
            if *e == 1 {
                parts.push(base);
            } else {
                parts.push(format!("{base}^{e}"));
            }
        }
        parts.join("*")
    }

    fn poly_string(p: &Poly, ctx: &Context, pretty: bool) -> String {
        if p.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (m, c)) in p.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            let coeff = if mag.is_one() && !m.is_one() {
                String::new()
            } else if mag.is_integer() {
                mag.numer().to_string()
            } else {
                format!("{}/{}", mag.numer(), mag.denom())
            };
            let ms = ScalarExpr::monomial_string(m, ctx, pretty);
            let body = match (coeff.is_empty(), ms.is_empty()) {
                (true, false) => ms,
                (false, true) => coeff,
                (false, false) => format!("{coeff}*{ms}"),
                (true, true) => unreachable!(),
            };
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            out.push_str(&body);
        }
        out
    }

    /// Grammar-compatible rendering (round-trips through the parser).
    pub fn render(&self, ctx: &Context, pretty: bool) -> String {
        let ns = ScalarExpr::poly_string(&self.num, ctx, pretty);
        if self.den.is_one() {
            return ns;
        }
        let ds = ScalarExpr::poly_string(&self.den, ctx, pretty);
        let np = if self.num.terms.len() > 1 {
            format!("({ns})")
        } else {
            ns
        };
        let dp = if self.den.terms.len() > 1 || self.den.leading().map(|(m, _)| !m.is_one()).unwrap_or(false)
        {
            format!("({ds})")
        } else {
            ds
        };
        format!("{np}/{dp}")
    }

    pub fn display(&self, ctx: &Context) -> String {
        self.render(ctx, false)
    }

    pub fn pretty(&self, ctx: &Context) -> String {
        self.render(ctx, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::Context;

    fn ctx() -> Context {
        let mut c = Context::new();
        for n in ["x", "y", "u", "v"] {
            c.add_coord(n).unwrap();
        }
        c.add_func("f", "u").unwrap();
        c
    }

    fn f(k: u32) -> ScalarExpr {
        ScalarExpr::deriv(0, 2, k)
    }
    fn coord(i: usize) -> ScalarExpr {
        ScalarExpr::coord(i)
    }

    #[test]
    fn gcd_cancellation_to_one() {
        let ux = coord(2).sub(&coord(0));
        let q = ux.div(&ux).unwrap();
        assert!(q.is_one());
    }

    #[test]
    fn diff_product_rule() {
        // d/du (f(u)*y) = f'(u)*y
        let e = f(0).mul(&coord(1));
        assert_eq!(e.diff(2), f(1).mul(&coord(1)));
        // d/dy (f(u)) = 0
        assert!(f(0).diff(1).is_zero());
    }

    #[test]
    fn diff_exp_chain_rule() {
        // d/dx exp(-2x) = -2 exp(-2x)
        let arg = coord(0).scale(&BigRational::from_integer((-2).into()));
        let e = ScalarExpr::exp(arg);
        let d = e.diff(0);
        assert_eq!(d, e.scale(&BigRational::from_integer((-2).into())));
    }

    #[test]
    fn diff_quotient_rule() {
        // d/du (y+v)/(u-x) = -(y+v)/(u-x)^2
        let num = coord(1).add(&coord(3));
        let den = coord(2).sub(&coord(0));
        let e = num.div(&den).unwrap();
        let expected = num.neg().div(&den.mul(&den)).unwrap();
        assert_eq!(e.diff(2), expected);
    }

    #[test]
    fn mixed_partials_commute() {
        let den = coord(2).sub(&coord(0));
        let e = f(0).mul(&coord(1)).div(&den).unwrap();
        assert_eq!(e.diff(0).diff(2), e.diff(2).diff(0));
    }

    #[test]
    fn exp_product_rewrite() {
        // exp(x)*exp(-x) - 1 == 0 under the polynomial-argument rewrite.
        let ex = ScalarExpr::exp(coord(0));
        let emx = ScalarExpr::exp(coord(0).neg());
        let prod = ex.mul(&emx);
        assert!(prod.is_one());
        assert!(prod.sub(&ScalarExpr::one()).is_zero());
    }

    #[test]
    fn exp_denominator_is_moved_up() {
        // 1 / exp(2x) -> exp(-2x)
        let two_x = coord(0).scale(&BigRational::from_integer(2.into()));
        let e = ScalarExpr::one().div(&ScalarExpr::exp(two_x.clone())).unwrap();
        assert_eq!(e, ScalarExpr::exp(two_x.neg()));
    }

    #[test]
    fn deriv_symbols_are_independent() {
        assert!(!f(2).is_zero());
        assert!(f(1).sub(&f(1)).is_zero());
    }

    #[test]
    fn subst_linear_function() {
        let c = ctx();
        let mut c2 = c.clone();
        let a = c2.add_const("a").unwrap();
        let b = c2.add_const("b").unwrap();
        // f(u) := a*u + b, so f'(u) = a, f''(u) = 0.
        let coeffs = [ScalarExpr::constant(b), ScalarExpr::constant(a)];
        let e = f(2).mul(&coord(1)).add(&f(1));
        let s = e.subst_func_poly(0, &coeffs, 2).unwrap();
        assert_eq!(s, ScalarExpr::constant(a));
        assert!(f(2).kill_derivs_from(0, 2).is_zero());
    }

    #[test]
    fn render_roundtrip_simple() {
        let c = ctx();
        let e = f(1)
            .mul(&coord(1))
            .scale(&BigRational::new(1.into(), 2.into()))
            .sub(&coord(0).powi(2).unwrap());
        let s = e.display(&c);
        let back = crate::parse::parse_scalar(&s, &c).unwrap();
        assert_eq!(back, e);
    }
}
