//! Recursive-descent parser for the scalar and 1-form grammars.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' integer)?
//! base   := number | ident | ident '(' expr ')' | ident '\''+ '(' expr ')'
//!         | 'D(' ident ',' integer ')' '(' expr ')' | '(' expr ')' | '-' factor
//! ```
//!
//! `f'(u)`, `f''(u)` and `D(f,1)(u)`, `D(f,2)(u)` are equivalent notations.
//! The 1-form grammar is the same with differentials `d<coordinate>` allowed
//! as factors; every additive term must be linear in exactly one differential.

use crate::context::Context;
use crate::error::ScalarError;
use crate::expr::ScalarExpr;
use crate::form::DiffForm;
use num::BigRational;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Primes(usize),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ScalarError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '+' => {
                out.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                out.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                out.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                out.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                out.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            ',' => {
                out.push((Tok::Comma, i));
                i += 1;
            }
            '\'' => {
                let start = i;
                let mut n = 0;
                while i < bytes.len() && bytes[i] as char == '\'' {
                    n += 1;
                    i += 1;
                }
                out.push((Tok::Primes(n), start));
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] as char == '.' {
                    return Err(ScalarError::Syntax {
                        pos: i,
                        msg: "decimal literals are not supported; use fractions".into(),
                    });
                }
                let n: num::BigInt = text[start..i].parse().unwrap();
                out.push((Tok::Num(BigRational::from_integer(n)), start));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] as char == '_')
                {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            other => {
                return Err(ScalarError::Syntax {
                    pos: i,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

/// Parse result value: a scalar or a 1-form (linear in differentials).
#[derive(Debug, Clone)]
enum Value {
    Scalar(ScalarExpr),
    Form(BTreeMap<usize, ScalarExpr>),
}

impl Value {
    fn add(self, other: Value, pos: usize) -> Result<Value, ScalarError> {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => Ok(Value::Scalar(a.add(&b))),
            (Value::Form(mut a), Value::Form(b)) => {
                for (i, c) in b {
                    let e = a.entry(i).or_insert_with(ScalarExpr::zero);
                    *e = e.add(&c);
                }
                Ok(Value::Form(a))
            }
            (Value::Form(a), Value::Scalar(s)) | (Value::Scalar(s), Value::Form(a)) => {
                if s.is_zero() {
                    Ok(Value::Form(a))
                } else {
                    Err(ScalarError::Syntax {
                        pos,
                        msg: "cannot add a scalar to a 1-form".into(),
                    })
                }
            }
        }
    }

    fn neg(self) -> Value {
        match self {
            Value::Scalar(a) => Value::Scalar(a.neg()),
            Value::Form(a) => Value::Form(a.into_iter().map(|(i, c)| (i, c.neg())).collect()),
        }
    }

    fn mul(self, other: Value, pos: usize) -> Result<Value, ScalarError> {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => Ok(Value::Scalar(a.mul(&b))),
            (Value::Form(a), Value::Scalar(s)) | (Value::Scalar(s), Value::Form(a)) => Ok(
                Value::Form(a.into_iter().map(|(i, c)| (i, c.mul(&s))).collect()),
            ),
            _ => Err(ScalarError::Syntax {
                pos,
                msg: "product of two differentials is not a 1-form".into(),
            }),
        }
    }

    fn div(self, other: Value, pos: usize) -> Result<Value, ScalarError> {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => Ok(Value::Scalar(a.div(&b)?)),
            (Value::Form(a), Value::Scalar(s)) => {
                let mut out = BTreeMap::new();
                for (i, c) in a {
                    out.insert(i, c.div(&s)?);
                }
                Ok(Value::Form(out))
            }
            _ => Err(ScalarError::Syntax {
                pos,
                msg: "cannot divide by a differential".into(),
            }),
        }
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    ctx: &'a Context,
    allow_forms: bool,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or_else(|| self.toks.last().map(|(_, p)| p + 1).unwrap_or(0))
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ScalarError> {
        let pos = self.here();
        match self.bump() {
            Some(got) if got == t => Ok(()),
            _ => Err(ScalarError::Syntax {
                pos,
                msg: format!("expected {what}"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Value, ScalarError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    let pos = self.here();
                    self.bump();
                    acc = acc.add(self.term()?, pos)?;
                }
                Some(Tok::Minus) => {
                    let pos = self.here();
                    self.bump();
                    acc = acc.add(self.term()?.neg(), pos)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Value, ScalarError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    let pos = self.here();
                    self.bump();
                    acc = acc.mul(self.factor()?, pos)?;
                }
                Some(Tok::Slash) => {
                    let pos = self.here();
                    self.bump();
                    acc = acc.div(self.factor()?, pos)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Value, ScalarError> {
        let base = self.base()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let pos = self.here();
            let neg = if matches!(self.peek(), Some(Tok::Minus)) {
                self.bump();
                true
            } else {
                false
            };
            let e = match self.bump() {
                Some(Tok::Num(n)) if n.is_integer() => {
                    let v: i64 = n
                        .to_integer()
                        .try_into()
                        .map_err(|_| ScalarError::NonIntegerExponent(pos))?;
                    if neg {
                        -v
                    } else {
                        v
                    }
                }
                _ => return Err(ScalarError::NonIntegerExponent(pos)),
            };
            match base {
                Value::Scalar(s) => return Ok(Value::Scalar(s.powi(e)?)),
                Value::Form(_) => {
                    return Err(ScalarError::Syntax {
                        pos,
                        msg: "cannot exponentiate a differential".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn parse_call_arg(&mut self) -> Result<ScalarExpr, ScalarError> {
        self.expect(Tok::LParen, "`(`")?;
        let pos = self.here();
        let v = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        match v {
            Value::Scalar(s) => Ok(s),
            Value::Form(_) => Err(ScalarError::Syntax {
                pos,
                msg: "differential not allowed inside a function call".into(),
            }),
        }
    }

    fn formal_function(&mut self, name: &str, order: u32, pos: usize) -> Result<Value, ScalarError> {
        let fid = self
            .ctx
            .func_id(name)
            .ok_or_else(|| ScalarError::UndeclaredIdentifier(name.to_string()))?;
        let arg = self.parse_call_arg()?;
        let declared = self.ctx.funcs[fid].arg;
        if arg != ScalarExpr::coord(declared) {
            return Err(ScalarError::WrongFunctionArgument {
                func: name.to_string(),
                arg: self.ctx.coord_name(declared).to_string(),
            });
        }
        let _ = pos;
        Ok(Value::Scalar(ScalarExpr::deriv(fid, declared, order)))
    }

    fn base(&mut self) -> Result<Value, ScalarError> {
        let pos = self.here();
        match self.bump() {
            Some(Tok::Num(n)) => Ok(Value::Scalar(ScalarExpr::from_rational(n))),
            Some(Tok::Minus) => Ok(self.factor()?.neg()),
            Some(Tok::LParen) => {
                let v = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(v)
            }
            Some(Tok::Ident(name)) => {
                // D(f, k)(x)
                if name == "D" && matches!(self.peek(), Some(Tok::LParen)) {
                    self.bump();
                    let fpos = self.here();
                    let fname = match self.bump() {
                        Some(Tok::Ident(n)) => n,
                        _ => {
                            return Err(ScalarError::Syntax {
                                pos: fpos,
                                msg: "expected function name in D(...)".into(),
                            })
                        }
                    };
                    self.expect(Tok::Comma, "`,`")?;
                    let kpos = self.here();
                    let order = match self.bump() {
                        Some(Tok::Num(n)) if n.is_integer() && !n.to_integer().lt(&0.into()) => {
                            let v: u32 = n.to_integer().try_into().map_err(|_| {
                                ScalarError::Syntax {
                                    pos: kpos,
                                    msg: "derivative order out of range".into(),
                                }
                            })?;
                            v
                        }
                        _ => {
                            return Err(ScalarError::Syntax {
                                pos: kpos,
                                msg: "expected a nonnegative integer order".into(),
                            })
                        }
                    };
                    self.expect(Tok::RParen, "`)`")?;
                    return self.formal_function(&fname, order, pos);
                }
                // primes: f''(u)
                if let Some(Tok::Primes(n)) = self.peek().cloned() {
                    self.bump();
                    return self.formal_function(&name, n as u32, pos);
                }
                // builtin / formal function call
                if matches!(self.peek(), Some(Tok::LParen)) {
                    if name == "exp" {
                        let arg = self.parse_call_arg()?;
                        return Ok(Value::Scalar(ScalarExpr::exp(arg)));
                    }
                    if name == "log" {
                        let arg = self.parse_call_arg()?;
                        if arg.is_zero() {
                            return Err(ScalarError::Syntax {
                                pos,
                                msg: "log of zero".into(),
                            });
                        }
                        return Ok(Value::Scalar(ScalarExpr::log(arg)));
                    }
                    if self.ctx.func_id(&name).is_some() {
                        return self.formal_function(&name, 0, pos);
                    }
                    return Err(ScalarError::UndeclaredIdentifier(name));
                }
                // plain identifier: coordinate, constant, or differential
                if let Some(id) = self.ctx.coord_id(&name) {
                    return Ok(Value::Scalar(ScalarExpr::coord(id)));
                }
                if let Some(id) = self.ctx.const_id(&name) {
                    return Ok(Value::Scalar(ScalarExpr::constant(id)));
                }
                if self.allow_forms {
                    if let Some(rest) = name.strip_prefix('d') {
                        if let Some(cid) = self.ctx.coord_id(rest) {
                            let mut m = BTreeMap::new();
                            m.insert(cid, ScalarExpr::one());
                            return Ok(Value::Form(m));
                        }
                    }
                }
                Err(ScalarError::UndeclaredIdentifier(name))
            }
            _ => Err(ScalarError::Syntax {
                pos,
                msg: "expected a number, identifier or `(`".into(),
            }),
        }
    }
}

fn run(text: &str, ctx: &Context, allow_forms: bool) -> Result<Value, ScalarError> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(ScalarError::Syntax {
            pos: 0,
            msg: "empty expression".into(),
        });
    }
    let mut p = Parser {
        toks,
        pos: 0,
        ctx,
        allow_forms,
    };
    let v = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(ScalarError::Syntax {
            pos: p.here(),
            msg: "trailing input".into(),
        });
    }
    Ok(v)
}

/// Parse a scalar expression into canonical form.
pub fn parse_scalar(text: &str, ctx: &Context) -> Result<ScalarExpr, ScalarError> {
    match run(text, ctx, false)? {
        Value::Scalar(s) => Ok(s),
        Value::Form(_) => unreachable!("forms disabled"),
    }
}

/// Parse a 1-form (`dx + f(u)*dy`, `(z)*du + dv - (x)*dw`, ...).
pub fn parse_one_form(text: &str, ctx: &Context) -> Result<DiffForm, ScalarError> {
    match run(text, ctx, true)? {
        Value::Form(m) => Ok(DiffForm::one_form(m.into_iter().collect())),
        Value::Scalar(s) if s.is_zero() => Ok(DiffForm::zero(1)),
        Value::Scalar(_) => Err(ScalarError::Syntax {
            pos: 0,
            msg: "expected a 1-form, got a scalar".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::Atom;

    fn ctx() -> Context {
        let mut c = Context::new();
        for n in ["x", "y", "u", "v", "w", "z"] {
            c.add_coord(n).unwrap();
        }
        c.add_func("f", "u").unwrap();
        c
    }

    #[test]
    fn identity_parse_of_formal_function() {
        let c = ctx();
        let e = parse_scalar("f(u)", &c).unwrap();
        assert_eq!(e, ScalarExpr::deriv(0, 2, 0));
        assert_eq!(parse_scalar("f'(u)", &c).unwrap(), parse_scalar("D(f,1)(u)", &c).unwrap());
    }

    #[test]
    fn product_with_exp_atom() {
        let c = ctx();
        let e = parse_scalar("(2*x-1)*w*exp(-2*x)", &c).unwrap();
        assert!(!e.is_zero());
        let atoms = e.atoms();
        assert!(atoms.iter().any(|a| matches!(a, Atom::Exp(_))));
        // round trip
        assert_eq!(parse_scalar(&e.display(&c), &c).unwrap(), e);
    }

    #[test]
    fn gcd_cancellation_in_parse() {
        let c = ctx();
        let e = parse_scalar("(u-x)/(u-x)", &c).unwrap();
        assert!(e.is_one());
    }

    #[test]
    fn undeclared_identifier_rejected() {
        let c = ctx();
        assert!(matches!(
            parse_scalar("q + 1", &c),
            Err(ScalarError::UndeclaredIdentifier(_))
        ));
    }

    #[test]
    fn non_integer_exponent_rejected() {
        let c = ctx();
        assert!(matches!(
            parse_scalar("x^y", &c),
            Err(ScalarError::NonIntegerExponent(_))
        ));
    }

    #[test]
    fn syntax_error_position() {
        let c = ctx();
        match parse_scalar("x + ", &c) {
            Err(ScalarError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn one_form_parse() {
        let c = ctx();
        let f = parse_one_form("dx + f(u)*dy", &c).unwrap();
        assert_eq!(f.coefficient(&[0]), ScalarExpr::one());
        assert_eq!(f.coefficient(&[1]), ScalarExpr::deriv(0, 2, 0));
        let g = parse_one_form("(z)*du + dv - (x)*dw", &c).unwrap();
        assert_eq!(g.coefficient(&[2]), ScalarExpr::coord(5));
        assert_eq!(g.coefficient(&[4]), ScalarExpr::coord(0).neg());
    }

    #[test]
    fn one_form_rejects_quadratic_differential() {
        let c = ctx();
        assert!(parse_one_form("dx*dy", &c).is_err());
    }
}
