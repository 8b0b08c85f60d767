//! Numeric ground-truthing: seeded instantiation of coordinates, constants
//! and formal functions, evaluation of scalars and forms, finite-difference
//! checks of the exterior derivative, and sampled zero-testing.
//!
//! Formal functions instantiate as random polynomials of degree <= 4 with
//! exact rational coefficients, so evaluation is exact rational until an
//! `exp`/`log` atom forces double precision.

use crate::atom::Atom;
use crate::context::Context;
use crate::error::OracleError;
use crate::expr::ScalarExpr;
use crate::form::DiffForm;
use crate::poly::Poly;
use num::{BigRational, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 0x5e6e;

const MAX_RETRIES: usize = 16;
const CONSTRAINT_MARGIN: f64 = 0.1;

/// Exact-or-approximate numeric value.
#[derive(Debug, Clone)]
pub enum Value {
    Exact(BigRational),
    Approx(f64),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Value::Approx(x) => *x,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instantiation {
    pub seed: u64,
    pub coord_vals: Vec<BigRational>,
    pub const_vals: Vec<BigRational>,
    /// Coefficients (lowest degree first) of the polynomial bound to each
    /// formal function.
    pub func_polys: Vec<Vec<BigRational>>,
}

#[derive(Debug)]
enum EvalIssue {
    Pole,
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn sample_rational(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> BigRational {
    // quarters in [lo, hi]
    let steps = (hi - lo) * 4;
    let k: i64 = rng.gen_range(0..=steps);
    rat(lo * 4 + k, 4)
}

impl Instantiation {
    /// Sample a point in [1,2]^dim (widening slightly on retries) that
    /// respects every domain constraint with margin >= 0.1.
    pub fn generate(
        ctx: &Context,
        constraints: &[ScalarExpr],
        seed: u64,
    ) -> Result<Instantiation, OracleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for attempt in 0..MAX_RETRIES {
            let hi = 2 + (attempt as i64) / 4;
            let coord_vals: Vec<BigRational> = (0..ctx.dim())
                .map(|_| sample_rational(&mut rng, 1, hi))
                .collect();
            let const_vals: Vec<BigRational> = (0..ctx.consts.len())
                .map(|_| sample_rational(&mut rng, 1, 2))
                .collect();
            let func_polys: Vec<Vec<BigRational>> = (0..ctx.funcs.len())
                .map(|_| {
                    (0..5)
                        .map(|_| {
                            let c = sample_rational(&mut rng, -2, 2);
                            if c.is_zero() {
                                rat(1, 4)
                            } else {
                                c
                            }
                        })
                        .collect()
                })
                .collect();
            let inst = Instantiation {
                seed,
                coord_vals,
                const_vals,
                func_polys,
            };
            let ok = constraints.iter().all(|c| match inst.eval(c) {
                Ok(v) => v.to_f64().abs() >= CONSTRAINT_MARGIN,
                Err(_) => false,
            });
            if ok {
                return Ok(inst);
            }
        }
        Err(OracleError::DomainViolation(MAX_RETRIES))
    }

    /// A batch of distinct instantiations derived from one seed.
    pub fn batch(
        ctx: &Context,
        constraints: &[ScalarExpr],
        seed: u64,
        n: usize,
    ) -> Result<Vec<Instantiation>, OracleError> {
        (0..n)
            .map(|i| Instantiation::generate(ctx, constraints, seed.wrapping_add(i as u64)))
            .collect()
    }

    fn with_coord(&self, x: usize, v: BigRational) -> Instantiation {
        let mut out = self.clone();
        out.coord_vals[x] = v;
        out
    }

    fn eval_deriv(&self, func: usize, arg: usize, order: u32) -> BigRational {
        let coeffs = &self.func_polys[func];
        let t = &self.coord_vals[arg];
        let mut acc = BigRational::zero();
        for (i, c) in coeffs.iter().enumerate() {
            let i = i as u32;
            if i < order {
                continue;
            }
            let mut fall = BigRational::one();
            for j in 0..order {
                fall *= BigRational::from_integer((i - j).into());
            }
            let mut p = BigRational::one();
            for _ in 0..(i - order) {
                p *= t;
            }
            acc += c * fall * p;
        }
        acc
    }

    fn eval_atom(&self, a: &Atom) -> Result<Value, EvalIssue> {
        match a {
            Atom::Coord(c) => Ok(Value::Exact(self.coord_vals[*c].clone())),
            Atom::Const(c) => Ok(Value::Exact(self.const_vals[*c].clone())),
            Atom::Deriv { func, arg, order } => {
                Ok(Value::Exact(self.eval_deriv(*func, *arg, *order)))
            }
            Atom::Exp(e) => {
                let v = self.eval(e)?.to_f64();
                Ok(Value::Approx(v.exp()))
            }
            Atom::Log(e) => {
                let v = self.eval(e)?.to_f64();
                if v <= 0.0 {
                    return Err(EvalIssue::Pole);
                }
                Ok(Value::Approx(v.ln()))
            }
        }
    }

    fn eval_poly(&self, p: &Poly) -> Result<Value, EvalIssue> {
        let mut exact = BigRational::zero();
        let mut approx = 0.0f64;
        let mut any_approx = false;
        for (m, c) in &p.terms {
            let mut term_exact = Some(c.clone());
            let mut term_approx = c.to_f64().unwrap_or(f64::NAN);
            for (a, e) in &m.0 {
                match self.eval_atom(a)? {
                    Value::Exact(v) => {
                        for _ in 0..*e {
                            if let Some(t) = term_exact.as_mut() {
                                *t *= &v;
                            }
                            term_approx *= v.to_f64().unwrap_or(f64::NAN);
                        }
                    }
                    Value::Approx(v) => {
                        term_exact = None;
                        for _ in 0..*e {
                            term_approx *= v;
                        }
                    }
                }
            }
            match term_exact {
                Some(t) => exact += t,
                None => {
                    any_approx = true;
                    approx += term_approx;
                }
            }
        }
        if any_approx {
            Ok(Value::Approx(approx + exact.to_f64().unwrap_or(f64::NAN)))
        } else {
            Ok(Value::Exact(exact))
        }
    }

    fn eval(&self, e: &ScalarExpr) -> Result<Value, EvalIssue> {
        let num = self.eval_poly(e.num())?;
        if e.den().is_one() {
            return Ok(num);
        }
        let den = self.eval_poly(e.den())?;
        match (num, den) {
            (Value::Exact(n), Value::Exact(d)) => {
                if d.is_zero() {
                    Err(EvalIssue::Pole)
                } else {
                    Ok(Value::Exact(n / d))
                }
            }
            (n, d) => {
                let dv = d.to_f64();
                if dv.abs() < 1e-300 {
                    Err(EvalIssue::Pole)
                } else {
                    Ok(Value::Approx(n.to_f64() / dv))
                }
            }
        }
    }

    /// Evaluate, mapping poles to a domain violation.
    pub fn eval_scalar(&self, e: &ScalarExpr) -> Result<Value, OracleError> {
        self.eval(e).map_err(|_| OracleError::DomainViolation(0))
    }

    pub fn eval_f64(&self, e: &ScalarExpr) -> Result<f64, OracleError> {
        Ok(self.eval_scalar(e)?.to_f64())
    }

    /// Magnitude scale of an expression at this point: the sum of absolute
    /// values of its numerator terms over |denominator|.
    pub fn magnitude(&self, e: &ScalarExpr) -> f64 {
        let mut scale = 0.0;
        for (m, c) in &e.num().terms {
            let term = Poly::from_monomial(m.clone(), c.abs());
            if let Ok(v) = self.eval_poly(&term) {
                scale += v.to_f64().abs();
            }
        }
        let den = if e.den().is_one() {
            1.0
        } else {
            match self.eval_poly(e.den()) {
                Ok(v) => v.to_f64().abs().max(1e-12),
                Err(_) => 1.0,
            }
        };
        scale / den
    }
}

/// Central-difference oracle for the exterior derivative: approximates each
/// coefficient of `d a` from raw numeric evaluations of the coefficients of
/// `a` and compares with the symbolic result. Returns the max residual.
pub fn fd_ext_d_check(
    a: &DiffForm,
    ctx: &Context,
    inst: &Instantiation,
    h: f64,
) -> Result<f64, OracleError> {
    let n = ctx.dim();
    let da = a.ext_d(n);
    let hr = BigRational::from_float(h).expect("finite step");

    // collect all candidate output indices: those of the symbolic result
    // plus those formed from input indices extended by one coordinate
    let mut out_indices: std::collections::BTreeSet<Vec<usize>> =
        da.terms.keys().cloned().collect();
    for idx in a.terms.keys() {
        for x in 0..n {
            if idx.contains(&x) {
                continue;
            }
            let mut j = vec![x];
            j.extend_from_slice(idx);
            j.sort_unstable();
            out_indices.insert(j);
        }
    }

    let mut max_resid = 0.0f64;
    for j in out_indices {
        // numeric coefficient: sum over positions t of (-1)^t d/d(j[t]) of
        // the coefficient of a on j \ {j[t]}
        let mut approx = 0.0;
        for (t, &x) in j.iter().enumerate() {
            let mut rest = j.clone();
            rest.remove(t);
            let coeff = a.coefficient(&rest);
            if coeff.is_zero() {
                continue;
            }
            let xv = inst.coord_vals[x].clone();
            let plus = inst
                .with_coord(x, &xv + &hr)
                .eval_scalar(&coeff)?
                .to_f64();
            let minus = inst
                .with_coord(x, &xv - &hr)
                .eval_scalar(&coeff)?
                .to_f64();
            let d = (plus - minus) / (2.0 * h);
            approx += if t % 2 == 0 { d } else { -d };
        }
        let exact = inst.eval_scalar(&da.coefficient(&j))?.to_f64();
        max_resid = max_resid.max((approx - exact).abs());
    }
    Ok(max_resid)
}

#[derive(Debug, Clone)]
pub enum ZeroVerdict {
    ZeroAtSamples,
    NonzeroWitness { sample: usize, value: f64 },
}

/// Evaluate at `n` seeded points; zero iff every |value| < 1e-9 scaled by
/// the expression magnitude.
pub fn sample_zero(
    e: &ScalarExpr,
    ctx: &Context,
    constraints: &[ScalarExpr],
    seed: u64,
    n: usize,
    tol: f64,
) -> Result<ZeroVerdict, OracleError> {
    for i in 0..n {
        let inst = Instantiation::generate(ctx, constraints, seed.wrapping_add(i as u64))?;
        let v = match inst.eval(e) {
            Ok(v) => v.to_f64(),
            Err(_) => continue, // pole: skip this sample
        };
        let scale = inst.magnitude(e).max(1.0);
        if v.abs() >= tol * scale {
            return Ok(ZeroVerdict::NonzeroWitness {
                sample: i,
                value: v,
            });
        }
    }
    Ok(ZeroVerdict::ZeroAtSamples)
}

/// f64 determinant by partial-pivot LU; used for coframe validation.
pub fn det_f64(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col].abs() < 1e-300 {
            return 0.0;
        }
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    det
}

/// Solve an n x n f64 system.
pub fn solve_f64(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(piv, col);
        b.swap(piv, col);
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_scalar;

    fn ctx() -> Context {
        let mut c = Context::new();
        for n in ["x", "y", "u", "v"] {
            c.add_coord(n).unwrap();
        }
        c.add_func("f", "u").unwrap();
        c
    }

    #[test]
    fn exact_polynomial_evaluation() {
        let c = ctx();
        let mut inst = Instantiation::generate(&c, &[], 7).unwrap();
        inst.coord_vals[0] = rat(1, 1);
        inst.coord_vals[2] = rat(2, 1);
        let e = parse_scalar("(u-x)^2", &c).unwrap();
        match inst.eval_scalar(&e).unwrap() {
            Value::Exact(v) => assert_eq!(v, rat(1, 1)),
            _ => panic!("expected exact"),
        }
    }

    #[test]
    fn derivative_binding_matches_polynomial() {
        let c = ctx();
        let mut inst = Instantiation::generate(&c, &[], 3).unwrap();
        // f := u^2
        inst.func_polys[0] = vec![rat(0, 1), rat(0, 1), rat(1, 1)];
        inst.coord_vals[2] = rat(3, 1);
        let e = parse_scalar("f'(u)", &c).unwrap();
        assert_eq!(inst.eval_f64(&e).unwrap(), 6.0);
    }

    #[test]
    fn fd_check_on_formal_function_coefficient() {
        let c = ctx();
        let inst = Instantiation::generate(&c, &[], 11).unwrap();
        let f = parse_scalar("f(u)", &c).unwrap();
        let a = DiffForm::one_form(vec![(1, f)]);
        let r = fd_ext_d_check(&a, &c, &inst, 1e-4).unwrap();
        assert!(r < 1e-7, "residual {r}");
        let dx = DiffForm::d_coord(0);
        assert_eq!(fd_ext_d_check(&dx, &c, &inst, 1e-4).unwrap(), 0.0);
    }

    #[test]
    fn sample_zero_flags_transcendental_zero() {
        let mut c = ctx();
        c.add_func("g", "x").unwrap();
        // log(x)-ish transcendental combination that the symbolic layer
        // cannot cancel: exp(log(x)) - x is kept symbolic.
        let e = parse_scalar("exp(log(x)) - x", &c).unwrap();
        assert!(!e.is_zero());
        match sample_zero(&e, &c, &[], 5, 8, 1e-9).unwrap() {
            ZeroVerdict::ZeroAtSamples => {}
            other => panic!("expected zero at samples, got {other:?}"),
        }
        let nz = parse_scalar("g''(x)", &c).unwrap();
        assert!(matches!(
            sample_zero(&nz, &c, &[], 5, 8, 1e-9).unwrap(),
            ZeroVerdict::NonzeroWitness { .. }
        ));
    }

    #[test]
    fn determinism_same_seed_same_point() {
        let c = ctx();
        let a = Instantiation::generate(&c, &[], 42).unwrap();
        let b = Instantiation::generate(&c, &[], 42).unwrap();
        assert_eq!(a.coord_vals, b.coord_vals);
        assert_eq!(a.func_polys, b.func_polys);
    }
}
