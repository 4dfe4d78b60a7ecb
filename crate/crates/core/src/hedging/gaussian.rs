use serde::Serialize;

use super::payout::Payout;
use crate::dynamics::{GaussianHjm, TauFactor};
use crate::quadrature::integrate;
use crate::stats::normal_cdf;
use crate::{Error, Result};

/// Closed-form price and hedge of a bond call under Gaussian HJM.
#[derive(Debug, Clone, Serialize)]
pub struct GaussianCall {
    /// Discounted price `P̃(T_1)Φ(d_1) - K P̃(T)Φ(d_2)`.
    pub price: f64,
    /// `Φ(d_1)`, the holding of the underlying bond.
    pub weight_underlying: f64,
    /// `-K Φ(d_2)`, the holding of the expiry bond.
    pub weight_expiry: f64,
    /// Remaining variance `∫_t^T |Σ(u,T_1) - Σ(u,T)|² du`.
    pub variance: f64,
    /// Clark–Ocone integrand with respect to `W`.
    pub alpha: Vec<f64>,
}

fn breakpoints(model: &GaussianHjm, a: f64, b: f64) -> Vec<f64> {
    let mut cuts = vec![a, b];
    for f in model.factors() {
        if let TauFactor::PiecewiseConstant { breaks, .. } = f {
            cuts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts
}

/// `∫_t^T |Σ(u, T_1) - Σ(u, T)|² du`.
pub fn remaining_variance(model: &GaussianHjm, t: f64, expiry: f64, underlying: f64) -> f64 {
    let cuts = breakpoints(model, t, expiry);
    cuts.windows(2)
        .map(|w| {
            integrate(w[0], w[1], 4, |u| {
                model.factors().iter().map(|f| (f.integral(u, underlying) - f.integral(u, expiry)).powi(2)).sum()
            })
        })
        .sum()
}

/// Price, bond weights and integrand of a single-bond call at time `t < T` in state `x`.
pub fn gaussian_call(model: &GaussianHjm, payout: &Payout, t: f64, x: &[f64]) -> Result<GaussianCall> {
    let (underlying, strike) = payout
        .as_zcb_call()
        .ok_or_else(|| Error::InvalidArgument("closed form needs a single-bond call without arrears".into()))?;
    let expiry = payout.expiry();
    let grid = payout.grid();
    let p1 = x[grid.node_index(underlying)?];
    let p0 = x[grid.node_index(expiry)?];
    let v = remaining_variance(model, t, expiry, underlying);
    Ok(call_from_parts(p1, p0, strike, v, &model.bond_vol(t, underlying), &model.bond_vol(t, expiry)))
}

/// Closed form from the two bond prices, the remaining variance and the bond volatilities `Σ(t, T_1)`, `Σ(t, T)`.
pub fn call_from_parts(p1: f64, p0: f64, strike: f64, v: f64, s1: &[f64], s0: &[f64]) -> GaussianCall {
    let (n1, n2) = if strike <= 0.0 {
        (1.0, 1.0)
    } else if v <= 0.0 {
        let itm = if p1 > strike * p0 { 1.0 } else { 0.0 };
        (itm, itm)
    } else {
        let sd = v.sqrt();
        let d1 = ((p1 / (strike * p0)).ln() + 0.5 * v) / sd;
        (normal_cdf(d1), normal_cdf(d1 - sd))
    };
    let alpha = s1.iter().zip(s0).map(|(a, b)| n1 * p1 * a - strike * n2 * p0 * b).collect();
    GaussianCall {
        price: p1 * n1 - strike * p0 * n2,
        weight_underlying: n1,
        weight_expiry: -strike * n2,
        variance: v,
        alpha,
    }
}
