//! Payouts, Clark–Ocone pre-hedges, finite-factor replication and hedge verdicts.

mod finite_factor;
mod gaussian;
mod payout;
mod prehedge;
mod replicate;
mod report;
mod support;

pub use finite_factor::{finite_factor_hedge, FiniteFactorHedger, MAX_CONDITION};
pub use gaussian::{call_from_parts, gaussian_call, remaining_variance, GaussianCall};
pub use payout::{BasketCall, Carry, Payout, PayoutSpec, RatioPayoff, SmoothBasket};
pub use prehedge::{
    bump_revalue, prehedge, prehedge_bound, price_mc, self_financing_complete, HedgePosition, HedgeSetup, Prehedge,
};
pub use replicate::{replicate, BacktestConfig, SUPPORT_ABS_TOL};
pub use report::{ErrorStats, HedgeReport, HedgeStep, WeightRow};
pub use support::{support_check, uniqueness_gap, Offender, SupportVerdict, UniquenessGap};

#[cfg(test)]
mod tests;
