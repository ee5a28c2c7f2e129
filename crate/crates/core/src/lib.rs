//! Market clearing and payment rules for withdrawing inter-area transmission
//! capacity from day-ahead energy trading so that it can be used for reserve
//! exchange.
//!
//! Areas submit tabulated bids over the capacity shares of their incident
//! tie-lines. The engine picks the efficient allocation by enumerating a
//! regulatory grid, then prices it with either the VCG (Clarke pivot) rule or
//! the min-max least-core (MLC) rule. The least core is computed by
//! constraint generation over coalitions, with a small dense simplex solver
//! embedded in [`coalition::lp`].
//!
//! Module map:
//! - [`network`]: areas, tie-lines and the link-set operators.
//! - [`bids`]: grids, bid tables, the quadratic valuation family, sampling and
//!   bid transformations.
//! - [`allocation`]: efficient clearing and coalitional values.
//! - [`coalition`]: epsilon-core checks, least core, MLC utilities.
//! - [`payments`]: VCG, least-core and MLC payment reports.
//! - [`analysis`]: Monte-Carlo epsilon-bar, manipulation experiments,
//!   deviation bounds and the Groves budget certificate.
//! - [`scenario`] and [`cli`]: JSON scenario files, command dispatch, reports.

pub mod allocation;
pub mod analysis;
pub mod bids;
pub mod cli;
pub mod coalition;
pub mod error;
pub mod network;
pub mod payments;
pub mod scenario;

pub use error::{Error, Result};

/// Absolute tolerance used for money comparisons throughout the crate.
pub const TOL: f64 = 1e-9;
