//! Numerics for delegated-contracting mechanism design.
//!
//! The crate has three layers:
//!
//! * primitives: quadrature ([`quad`]), structured pass/fail reports
//!   ([`report`]), and type distributions on the unit interval ([`dist`]);
//! * mechanism machinery: finite-type direct mechanisms with incentive and
//!   participation checkers ([`mech`]), and the delegation game built from
//!   menus of contracts ([`game`]);
//! * applications: optimal procurement delegation ([`procurement`]),
//!   retail price control ([`resale`]), efficient bilateral trade
//!   ([`efficiency`]), and partnership dissolution ([`partnership`]).

pub mod dist;
pub mod efficiency;
pub mod game;
pub mod mech;
pub mod partnership;
pub mod procurement;
pub mod quad;
pub mod report;
pub mod resale;

pub use dist::{check_hazard_dominance, Family, TypeDistribution};
pub use report::{FeasibilityReport, DEFAULT_TOL};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A constructor argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A function argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A requested value is outside the attainable range (e.g. inverting a
    /// virtual value past its endpoints).
    #[error("range error: {0}")]
    Range(String),
    /// Malformed textual input (CSV, config).
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
