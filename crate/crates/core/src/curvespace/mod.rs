//! Discrete curve spaces on a maturity grid.
//!
//! Curves are node values on a strictly increasing maturity axis
//! `0 = s_0 < … < s_M`, extended by an implicit ghost node at
//! `s_M + tail` where every curve vanishes. Norms are the weighted Sobolev
//! norms of the first (`F1v`) and second (`F2w`) finite differences.

mod curve;
mod grid;
mod norm;
mod portfolio;

pub use curve::{
    bonds_from_forwards, forwards_from_bonds, split_numeraire, yield_curve, BondCurve,
    DiscountedCurve, ForwardCurve, ForwardInterpolation,
};
pub use grid::{weight_constants, MaturityGrid, PowerWeight, WeightConstants, NODE_TOL};
pub use norm::{derivative_functional, dual_norm, sobolev_norm, CurveSpace};
pub use portfolio::{pair, Atom, PortfolioMeasure};
