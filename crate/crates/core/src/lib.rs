//! Term-structure hedging laboratory.
//!
//! The crate simulates HJM-type bond markets on a discrete maturity axis,
//! propagates first-variation operators along simulated paths and builds
//! Clark–Ocone hedging portfolios of zero-coupon bonds for European
//! interest-rate claims.
//!
//! Module map:
//!
//! - [`curvespace`]: maturity grids, weighted Sobolev norms, curve conversions
//!   and portfolio measures.
//! - [`dynamics`]: volatility models and Monte Carlo simulation of the
//!   discounted bond curve.
//! - [`malliavin`]: first-variation operators, Malliavin derivatives and
//!   Clark–Ocone integrands.
//! - [`hedging`]: payouts, pre-hedges, finite-factor replication and the
//!   support/uniqueness checks.
//! - [`experiments`]: the consolidated numerical experiments shared by the
//!   acceptance suite and the command line front end.

pub mod curvespace;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod hedging;
pub mod malliavin;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
