//! Quadrant requirements on risk-factor distributions and scenario
//! aggregation.
//!
//! A supervisor can state requirements as floors on the probability of
//! polyhedral regions ("quadrants") of risk-factor space, or as scenario
//! sets that are aggregated into the company's distribution. This crate
//! checks requirements, aggregates scenarios (point-mass, shifting, φ-maps,
//! and at capital level), converts between the two languages, and pushes
//! distributions through valuation functions to risk measures.

pub mod cli;
pub mod error;
pub mod lp;
pub mod measures;
pub mod normal;
pub mod quadrants;
pub mod requirements;
pub mod scenarios;
pub mod seed;
pub mod synthesis;
pub mod valuation;

pub use error::{Error, Result};
pub use measures::{FiniteMixtureMeasure, MeasureComponent, Vector};
pub use quadrants::{HalfSpace, InteriorPoint, Quadrant};
