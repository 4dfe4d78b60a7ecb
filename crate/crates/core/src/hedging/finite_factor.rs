use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::gaussian::{call_from_parts, remaining_variance, GaussianCall};
use super::payout::Payout;
use super::report::{HedgeReport, HedgeStep};
use super::replicate::{assemble_finite, nonzero_rows, BacktestConfig, FiniteOutcome, Holding, SUPPORT_ABS_TOL};
use super::support::support_check;
use crate::dynamics::{path_increments, step_into, GaussianHjm, Scheme, TimeGrid, Volatility};
use crate::{Error, Result};

/// Largest condition number of the hedge matrix accepted by [`finite_factor_hedge`].
pub const MAX_CONDITION: f64 = 1e8;

/// Deterministic inputs of the Gaussian hedge at one time.
struct Slice {
    t: f64,
    variance: f64,
    vol_underlying: Vec<f64>,
    vol_expiry: Vec<f64>,
    /// `Σ(t, T_i)` of each hedge bond.
    vol_hedge: Vec<Vec<f64>>,
}

/// Hedge of a Gaussian-model bond call with `d` bonds of prescribed maturities.
pub struct FiniteFactorHedger<'a> {
    model: &'a GaussianHjm,
    payout: &'a Payout,
    underlying_node: usize,
    expiry_node: usize,
    strike: f64,
    hedge: Vec<f64>,
    hedge_nodes: Vec<usize>,
}

impl<'a> FiniteFactorHedger<'a> {
    pub fn new(model: &'a GaussianHjm, payout: &'a Payout, hedge_maturities: &[f64]) -> Result<Self> {
        let (underlying, strike) = payout
            .as_zcb_call()
            .ok_or_else(|| Error::InvalidArgument("finite-factor hedging needs a single-bond call".into()))?;
        if hedge_maturities.len() != model.n_factors() {
            return Err(Error::InvalidArgument(format!(
                "{} factors need {} hedge bonds, got {}",
                model.n_factors(),
                model.n_factors(),
                hedge_maturities.len()
            )));
        }
        if let Some(&s) = hedge_maturities.iter().find(|&&s| s <= payout.expiry()) {
            return Err(Error::InvalidArgument(format!(
                "hedge maturity {s} does not exceed the expiry {}",
                payout.expiry()
            )));
        }
        let grid = model.grid();
        Ok(Self {
            model,
            payout,
            underlying_node: grid.node_index(underlying)?,
            expiry_node: grid.node_index(payout.expiry())?,
            strike,
            hedge: hedge_maturities.to_vec(),
            hedge_nodes: hedge_maturities.iter().map(|&s| grid.node_index(s)).collect::<Result<_>>()?,
        })
    }

    fn slice(&self, t: f64) -> Slice {
        let (underlying, _) = self.payout.as_zcb_call().expect("call");
        let expiry = self.payout.expiry();
        Slice {
            t,
            variance: remaining_variance(self.model, t, expiry, underlying),
            vol_underlying: self.model.bond_vol(t, underlying),
            vol_expiry: self.model.bond_vol(t, expiry),
            vol_hedge: self.hedge.iter().map(|&s| self.model.bond_vol(t, s)).collect(),
        }
    }

    fn solve(&self, s: &Slice, x: &[f64]) -> Result<(GaussianCall, Vec<f64>)> {
        let call = call_from_parts(
            x[self.underlying_node],
            x[self.expiry_node],
            self.strike,
            s.variance,
            &s.vol_underlying,
            &s.vol_expiry,
        );
        let d = self.hedge.len();
        // rows: hedge bonds, columns: factors
        let m = DMatrix::from_fn(d, d, |i, j| x[self.hedge_nodes[i]] * s.vol_hedge[i][j]);
        let sv = m.singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::Singular { condition });
        }
        let phi = m
            .transpose()
            .lu()
            .solve(&DVector::from_column_slice(&call.alpha))
            .ok_or(Error::Singular { condition })?;
        Ok((call, phi.iter().copied().collect()))
    }

    /// Bond weights `(σ_t*)⁻¹ α_t` at time `t` in state `x`, with the closed-form call.
    pub fn weights(&self, t: f64, x: &[f64]) -> Result<(GaussianCall, Vec<f64>)> {
        self.solve(&self.slice(t), x)
    }

    fn dense(&self, phi: &[f64], len: usize) -> Vec<f64> {
        let mut w = vec![0.0; len];
        for (&i, &c) in self.hedge_nodes.iter().zip(phi) {
            w[i] += c;
        }
        w
    }

    /// Backtests the hedge on `time` (which must end at the expiry).
    pub fn backtest(&self, x0: &[f64], time: TimeGrid, cfg: &BacktestConfig) -> Result<HedgeReport> {
        cfg.check(&time)?;
        if (time.horizon() - self.payout.expiry()).abs() > 1e-9 {
            return Err(Error::InvalidArgument("time grid must end at the payout expiry".into()));
        }
        let grid = self.model.grid().clone();
        let n = self.model.n_factors();
        let cost = cfg.n_paths as f64 * time.steps as f64 * grid.len() as f64 * n as f64;
        if cost > cfg.cost_cap {
            return Err(Error::BudgetExceeded { estimate: cost, cap: cfg.cost_cap });
        }
        let slices: Vec<Slice> = cfg.rebalance_steps(&time).map(|l| self.slice(time.time(l))).collect();
        let v0 = self.solve(&slices[0], x0)?.0.price;
        let horizon = self.payout.support_horizon();
        let outcomes = (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(|p| {
                let incs = path_increments(cfg.seed, p, &time, n, cfg.substeps);
                let mut x = x0.to_vec();
                let mut next = vec![0.0; x.len()];
                let mut sig = vec![0.0; x.len() * n];
                let mut wealth = v0;
                let mut phi = vec![0.0; n];
                let mut support = None;
                let mut max_dual_norm: f64 = 0.0;
                let mut schedule = Vec::new();
                for l in 0..time.steps {
                    if l % cfg.rebalance_every == 0 {
                        let s = &slices[l / cfg.rebalance_every];
                        phi = self.solve(s, &x)?.1;
                        let held = Holding { weights: self.dense(&phi, x.len()), stderr: vec![0.0; x.len()] };
                        max_dual_norm = max_dual_norm.max(crate::curvespace::dual_norm(&grid, &held.weights));
                        let v =
                            support_check(&grid, s.t, &held.weights, &held.stderr, (s.t, horizon), SUPPORT_ABS_TOL);
                        support = Some(match support.take() {
                            Some(acc) => super::support::SupportVerdict::merge(acc, v),
                            None => v,
                        });
                        if p == 0 {
                            let value: f64 = self.hedge_nodes.iter().zip(&phi).map(|(&i, c)| c * x[i]).sum();
                            schedule.push(HedgeStep {
                                t: s.t,
                                phi: nonzero_rows(&grid, s.t, &held),
                                cash: wealth - value,
                                wealth,
                            });
                        }
                    }
                    step_into(self.model, Scheme::Euler, time.time(l), time.dt, &x, incs.step(l), &mut sig, &mut next)?;
                    wealth += self.hedge_nodes.iter().zip(&phi).map(|(&i, c)| c * (next[i] - x[i])).sum::<f64>();
                    std::mem::swap(&mut x, &mut next);
                }
                let payout = self.payout.hedged_value(&x)?;
                Ok(FiniteOutcome {
                    payout,
                    error: payout - wealth,
                    support: support.expect("at least one rebalance"),
                    max_dual_norm,
                    schedule,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(assemble_finite(v0, Some(v0), outcomes, cost))
    }
}

/// Replicates a Gaussian-model bond call with bonds of the given maturities (one per factor).
pub fn finite_factor_hedge(
    model: &GaussianHjm,
    payout: &Payout,
    hedge_maturities: &[f64],
    x0: &[f64],
    time: TimeGrid,
    cfg: &BacktestConfig,
) -> Result<HedgeReport> {
    FiniteFactorHedger::new(model, payout, hedge_maturities)?.backtest(x0, time, cfg)
}
