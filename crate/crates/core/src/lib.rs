//! Target-based optimal investment in a defined-contribution pension fund
//! whose goal is to close the gap between a salary-related ("old") public
//! pension and a contribution-based ("new") one.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! - [`model`]: market, salary, actuarial and pension-rule primitives;
//! - [`targets`]: final target, calibrated growth rate `r*` and interim targets;
//! - [`control`]: value-function coefficients and the feedback investment strategy;
//! - [`simulation`]: Monte Carlo evolution of the fund under the clamped strategy;
//! - [`analysis`]: break-even points, retirement-age sweeps and histograms.
//!
//! [`plan::PlanParams`] bundles one member's parameters and wires the modules
//! together.

pub mod analysis;
pub mod control;
mod error;
pub mod model;
pub mod numerics;
pub mod plan;
pub mod simulation;
pub mod targets;

pub use error::{Error, Result};
