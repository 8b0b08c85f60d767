//! Error types, one enum per subsystem.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScalarError {
    #[error("undeclared identifier `{0}`")]
    UndeclaredIdentifier(String),
    #[error("identifier `{0}` already declared")]
    DuplicateIdentifier(String),
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("exponent must be an integer (at byte {0})")]
    NonIntegerExponent(usize),
    #[error("formal function `{func}` must be applied to its declared argument `{arg}`")]
    WrongFunctionArgument { func: String, arg: String },
    #[error("division by an expression that normalizes to zero")]
    DivisionByZero,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("fixture parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Scalar(#[from] ScalarError),
    #[error("dimension mismatch: p*q = {pq} but {n} coordinates declared")]
    DimensionMismatch { pq: usize, n: usize },
    #[error("singular coframe: top wedge vanishes at sample points ({0})")]
    SingularCoframe(String),
    #[error("operation requires p = q = 2 (got p = {p}, q = {q})")]
    WrongSignature { p: usize, q: usize },
    #[error("no sample point satisfies the domain constraints")]
    DomainViolation,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConnectionError {
    #[error("connection solver supports p = q = 2 only (got p = {p}, q = {q}); use the Pfaffian pipeline")]
    UnsupportedSignature { p: usize, q: usize },
    #[error("normalization inapplicable: structure equations inconsistent, residual 2-form {0}")]
    NormalizationInapplicable(String),
    #[error("overdetermined residual on coefficient {0}")]
    OverdeterminedResidual(String),
    #[error("second-order symmetry broken: {0}")]
    SymmetryBroken(String),
    #[error("singular coframe while expanding in the basis")]
    SingularCoframe,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TensorError {
    #[error("index range mismatch: {0}")]
    RangeMismatch(String),
    #[error("symmetry violation in component {0}")]
    SymmetryViolation(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrobeniusError {
    #[error("all candidate pivot {0}s vanish identically")]
    PivotVanishes(String),
    #[error("system not solvable for the requested differentials: {0}")]
    NotSolvable(String),
    #[error("inconsistent solution family: {0}")]
    InconsistentFamily(String),
    #[error("family parse error at line {line}: {msg}")]
    FamilyParse { line: usize, msg: String },
    #[error("{0}")]
    Scalar(#[from] ScalarError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("domain violation: could not find an admissible sample point after {0} retries")]
    DomainViolation(usize),
}
