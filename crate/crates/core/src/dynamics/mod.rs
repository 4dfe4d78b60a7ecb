//! Volatility models and Monte Carlo simulation of the discounted bond curve.

mod diagnostics;
mod model;
mod simulate;

pub use diagnostics::{
    diagnostics, energy_integrand, hs_norm, lipschitz_estimate, locality_max_change, min_singular_value,
    rank, restricted_operator, selected_rows, singular_values, Diagnostics,
};
pub use model::{
    FactorLoadings, GaussianHjm, Kappa, LocalHjm, ModelSpec, TauFactor, Volatility, VolatilityModel,
};
pub use simulate::{
    evolve, path_increments, path_seed, simulate, simulate_forwards, step_into, ForwardBundle, ForwardPath,
    PathBundle, PathRecord, Record, Scheme, SimOptions, TimeGrid, Trajectory, MAX_FLAGGED_FRACTION,
};
