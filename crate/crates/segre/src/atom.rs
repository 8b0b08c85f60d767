//! Indeterminates of the symbolic layer.
//!
//! Every scalar expression is a rational function over a fixed set of atoms:
//! coordinates, formal constants, derivative symbols `f^(k)(arg)` of unary
//! formal functions, and `exp`/`log` applied to sub-expressions. Derivative
//! symbols of different orders are algebraically independent; they are linked
//! only through differentiation.

use crate::expr::ScalarExpr;
use std::cmp::Ordering;

/// Index of a coordinate in its [`crate::context::Context`].
pub type CoordId = usize;
/// Index of a formal function in its context.
pub type FuncId = usize;
/// Index of a formal constant in its context.
pub type ConstId = usize;

/// A single indeterminate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    /// A coordinate of the (possibly parameter-extended) manifold.
    Coord(CoordId),
    /// A formal constant: nonzero differential in no direction.
    Const(ConstId),
    /// `order`-th derivative of formal function `func`, evaluated at its
    /// declared argument coordinate. Order 0 is the function itself.
    Deriv {
        func: FuncId,
        arg: CoordId,
        order: u32,
    },
    /// `exp` of a canonical scalar expression.
    Exp(Box<ScalarExpr>),
    /// `log` of a canonical scalar expression.
    Log(Box<ScalarExpr>),
}

impl Atom {
    /// Whether this atom survives differentiation by coordinates at all.
    pub fn is_constant(&self) -> bool {
        matches!(self, Atom::Const(_))
    }
}

/// Total order used both as the `BTreeMap` key order and as the graded-lex
/// term order of the polynomial layer (ties on total degree are broken by the
/// exponent of the smallest atom).
pub fn cmp_atoms(a: &Atom, b: &Atom) -> Ordering {
    a.cmp(b)
}
