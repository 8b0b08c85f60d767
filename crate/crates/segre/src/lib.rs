//! Symbolic engine for four-dimensional (and 2×q / p×2) Segre-cone
//! geometries: given an adapted coframe it solves the structure equations,
//! extracts the curvature tensor and its conformal components, classifies the
//! structure as flat / α-semiintegrable / β-semiintegrable / generic, and
//! independently confirms the verdict by building and prolonging the Pfaffian
//! systems whose integral surfaces realize the two families of cone-generator
//! submanifolds.
//!
//! Layers, bottom up:
//!
//! * [`expr`] — canonical rational symbolic scalars with exact arithmetic,
//!   formal function symbols and differentiation ([`poly`] underneath);
//! * [`form`] — exterior algebra: wedge, exterior derivative, reduction
//!   modulo a Pfaffian ideal ([`coframe`] for expansions in a moving frame);
//! * [`tensor`] — indexed tensors with vertical-pair structure and the
//!   symmetrization/alternation machinery;
//! * [`structure`] — the coframe aggregate, fixture parsing, the associated
//!   split-signature metric;
//! * [`connection`] — the structure-equation pipeline (connection forms,
//!   curvature, conformal components, classification, root analysis);
//! * [`pfaffian`] / [`family`] — the integrability pipeline (Pfaffian
//!   systems, prolongation, closed-form solution verification);
//! * [`oracle`] — seeded numeric cross-checks backing every symbolic claim;
//! * [`report`] — the end-to-end run used by the CLI and examples.

pub mod atom;
pub mod coframe;
pub mod connection;
pub mod context;
pub mod error;
pub mod expr;
pub mod family;
pub mod form;
pub mod linalg;
pub mod oracle;
pub mod parse;
pub mod pfaffian;
pub mod poly;
pub mod report;
pub mod roots;
pub mod structure;
pub mod tensor;

pub use context::Context;
pub use expr::ScalarExpr;
pub use form::DiffForm;
// re-exported once structure lands
