//! Decision engine for choosing between a composite endpoint and its most
//! relevant component when designing a two-arm randomized trial.
//!
//! The crate computes composite-event probabilities, composite treatment
//! effects, the asymptotic relative efficiency (ARE) of the composite versus
//! the relevant endpoint, and required sample sizes, for both binary and
//! time-to-event components.
//!
//! Layout:
//! - [`numerics`]: adaptive quadrature and bracketing root finding.
//! - [`binary`]: closed forms for two correlated binary components.
//! - [`survival`]: Weibull margins coupled by a Gumbel copula.
//! - [`simulation`]: Monte Carlo oracles and empirical power.
//! - [`scenario`]: validated scenarios, evaluation, sweeps, rendering.
//! - [`api`]: JSON request handling shared by the CLI, HTTP service and
//!   browser demo.

pub mod api;
pub mod binary;
pub mod design;
pub mod error;
pub mod numerics;
pub mod scenario;
pub mod simulation;
pub mod survival;

pub use design::{Sidedness, TestDesign, VarianceVariant};
pub use error::{Error, Result};
