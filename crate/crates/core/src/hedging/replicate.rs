use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gaussian::gaussian_call;
use super::prehedge::{prehedge, prehedge_bound, price_mc, self_financing_complete, HedgeSetup};
use super::report::{ErrorStats, HedgeReport, HedgeStep, WeightRow};
use super::support::{support_check, SupportVerdict};
use crate::curvespace::{MaturityGrid, PortfolioMeasure};
use crate::dynamics::{path_increments, GaussianHjm, TimeGrid, Volatility};
use crate::malliavin::InnerBudget;
use crate::stats::Estimate;
use crate::{Error, Result};

/// Support threshold floor separating truncation noise from genuine weight.
pub const SUPPORT_ABS_TOL: f64 = 1e-6;

/// Budgets and seeds of a hedging backtest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub n_paths: usize,
    /// Rebalance every this many simulation steps.
    pub rebalance_every: usize,
    pub seed: u64,
    pub substeps: usize,
    /// Inner budget for nested pre-hedges; unused when a closed form is available.
    pub inner: Option<InnerBudget>,
    /// Paths of the separate Monte Carlo estimate of `V_0` (nested mode).
    pub price_paths: usize,
    /// Pre-hedges with a larger atom error are flagged.
    pub stderr_tol: f64,
    /// Refuse runs whose estimated cost (node-factor-step updates) exceeds this.
    pub cost_cap: f64,
    /// Lipschitz constant of `σ` used for the reported dual-norm bound.
    pub sigma_lipschitz: Option<f64>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            n_paths: 256,
            rebalance_every: 1,
            seed: 0,
            substeps: 1,
            inner: None,
            price_paths: 4096,
            stderr_tol: f64::INFINITY,
            cost_cap: 1e12,
            sigma_lipschitz: None,
        }
    }
}

impl BacktestConfig {
    pub(crate) fn check(&self, time: &TimeGrid) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::InvalidArgument("a backtest needs at least 2 paths".into()));
        }
        if self.rebalance_every == 0 || time.steps % self.rebalance_every != 0 {
            return Err(Error::InvalidArgument(format!(
                "rebalance interval {} must divide the {} simulation steps",
                self.rebalance_every, time.steps
            )));
        }
        Ok(())
    }

    pub(crate) fn rebalance_steps(&self, time: &TimeGrid) -> impl Iterator<Item = usize> {
        (0..time.steps).step_by(self.rebalance_every)
    }
}

/// Pre-hedge at one rebalance time.
pub(crate) struct Holding {
    pub weights: Vec<f64>,
    pub stderr: Vec<f64>,
}

pub(crate) fn nonzero_rows(grid: &MaturityGrid, t: f64, h: &Holding) -> Vec<WeightRow> {
    grid.nodes()
        .iter()
        .enumerate()
        .filter(|&(i, _)| h.weights[i] != 0.0)
        .map(|(i, &s)| WeightRow { t, maturity: s, weight: h.weights[i], stderr: h.stderr[i] })
        .collect()
}

struct PathOutcome {
    payout: f64,
    error: f64,
    support: Option<SupportVerdict>,
    max_dual_norm: f64,
    flagged: usize,
    schedule: Vec<HedgeStep>,
}

/// Backtests the Clark–Ocone hedge of `setup.payout` along `cfg.n_paths` outer paths.
///
/// With `analytic` set and a single-bond call, the pre-hedge is the Gaussian
/// closed form; otherwise it is estimated by nested simulation.
pub fn replicate<V: Volatility + ?Sized>(
    setup: &HedgeSetup<V>,
    x0: &[f64],
    cfg: &BacktestConfig,
    analytic: Option<&GaussianHjm>,
) -> Result<HedgeReport> {
    let time = setup.time;
    cfg.check(&time)?;
    let grid = setup.model.grid().clone();
    let m = grid.len() as f64;
    let n = setup.model.n_factors();
    let analytic = analytic.filter(|_| setup.payout.as_zcb_call().is_some());
    let outer_cost = cfg.n_paths as f64 * time.steps as f64 * m * n as f64;
    let (cost, inner) = match (analytic, cfg.inner) {
        (Some(_), _) => (outer_cost, None),
        (None, Some(b)) => {
            let tails: f64 = cfg.rebalance_steps(&time).map(|l| (time.steps - l) as f64).sum();
            (outer_cost + cfg.n_paths as f64 * tails * b.n_inner as f64 * m * n as f64, Some(b))
        }
        (None, None) => {
            return Err(Error::InvalidArgument("no closed form for this claim and no inner budget".into()))
        }
    };
    if cost > cfg.cost_cap {
        return Err(Error::BudgetExceeded { estimate: cost, cap: cfg.cost_cap });
    }
    let (v0, closed_form_price) = match analytic {
        Some(g) => {
            let p = gaussian_call(g, setup.payout, 0.0, x0)?.price;
            (p, Some(p))
        }
        None => (price_mc(setup, x0, cfg.price_paths, cfg.seed ^ 0x9e1, cfg.substeps)?.mean, None),
    };
    let horizon = setup.payout.support_horizon();
    let outcomes = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let incs = path_increments(cfg.seed, p, &time, n, cfg.substeps);
            let states = setup.path(0, x0, &incs)?;
            let mut wealth = v0;
            let mut out = PathOutcome {
                payout: 0.0,
                error: 0.0,
                support: None,
                max_dual_norm: 0.0,
                flagged: 0,
                schedule: Vec::new(),
            };
            let mut held = Holding { weights: vec![0.0; grid.len()], stderr: vec![0.0; grid.len()] };
            for l in 0..time.steps {
                let x = &states[l];
                let t = time.time(l);
                if l % cfg.rebalance_every == 0 {
                    held = match (analytic, inner) {
                        (Some(g), _) => {
                            let call = gaussian_call(g, setup.payout, t, x)?;
                            let mut w = vec![0.0; grid.len()];
                            let (underlying, _) = setup.payout.as_zcb_call().expect("call");
                            w[grid.node_index(underlying)?] += call.weight_underlying;
                            w[grid.node_index(setup.payout.expiry())?] += call.weight_expiry;
                            Holding { weights: w, stderr: vec![0.0; grid.len()] }
                        }
                        (None, Some(b)) => {
                            let ph = prehedge(setup, l, x, b, cfg.seed, p)?;
                            if !ph.within_tolerance(cfg.stderr_tol) {
                                out.flagged += 1;
                            }
                            Holding { weights: ph.weights, stderr: ph.stderr }
                        }
                        (None, None) => unreachable!(),
                    };
                    let dn = crate::curvespace::dual_norm(&grid, &held.weights);
                    out.max_dual_norm = out.max_dual_norm.max(dn);
                    let verdict =
                        support_check(&grid, t, &held.weights, &held.stderr, (t, horizon), SUPPORT_ABS_TOL);
                    out.support = Some(match out.support.take() {
                        Some(s) => s.merge(verdict),
                        None => verdict,
                    });
                    if p == 0 {
                        let phi = PortfolioMeasure::from_dense(grid.clone(), &held.weights);
                        let pos = self_financing_complete(&phi, wealth, x)?;
                        out.schedule.push(HedgeStep {
                            t,
                            phi: nonzero_rows(&grid, t, &held),
                            cash: pos.cash,
                            wealth,
                        });
                    }
                }
                let next = &states[l + 1];
                wealth += held.weights.iter().zip(next.iter().zip(x)).map(|(w, (b, a))| w * (b - a)).sum::<f64>();
            }
            out.payout = setup.payout.hedged_value(&states[time.steps])?;
            out.error = out.payout - wealth;
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let method = if analytic.is_some() { "clark_ocone_closed_form" } else { "clark_ocone_nested" };
    let dual_norm_bound = cfg
        .sigma_lipschitz
        .map(|c| prehedge_bound(setup.payout.lipschitz_constant(), c, setup.payout.expiry()));
    Ok(assemble(method, v0, closed_form_price, outcomes, dual_norm_bound, cost))
}

fn assemble(
    method: &str,
    v0: f64,
    closed_form_price: Option<f64>,
    outcomes: Vec<PathOutcome>,
    dual_norm_bound: Option<f64>,
    cost: f64,
) -> HedgeReport {
    let payouts: Vec<f64> = outcomes.iter().map(|o| o.payout).collect();
    let errors: Vec<f64> = outcomes.iter().map(|o| o.error).collect();
    let mut support: Option<SupportVerdict> = None;
    let mut max_dual_norm: f64 = 0.0;
    let mut flagged = 0;
    let mut schedule = Vec::new();
    for (k, o) in outcomes.into_iter().enumerate() {
        if let Some(v) = o.support {
            support = Some(match support {
                Some(s) => s.merge(v),
                None => v,
            });
        }
        max_dual_norm = max_dual_norm.max(o.max_dual_norm);
        flagged += o.flagged;
        if k == 0 {
            schedule = o.schedule;
        }
    }
    HedgeReport {
        method: method.to_string(),
        v0,
        payout_mean: Estimate::from_samples(&payouts),
        closed_form_price,
        schedule,
        error: ErrorStats::new(&errors, &payouts),
        support: support.expect("at least one rebalance"),
        max_dual_norm,
        dual_norm_bound,
        flagged_prehedges: flagged,
        cost_estimate: cost,
    }
}

pub(crate) struct FiniteOutcome {
    pub payout: f64,
    pub error: f64,
    pub support: SupportVerdict,
    pub max_dual_norm: f64,
    pub schedule: Vec<HedgeStep>,
}

pub(crate) fn assemble_finite(
    v0: f64,
    closed_form_price: Option<f64>,
    outcomes: Vec<FiniteOutcome>,
    cost: f64,
) -> HedgeReport {
    let outcomes = outcomes
        .into_iter()
        .map(|o| PathOutcome {
            payout: o.payout,
            error: o.error,
            support: Some(o.support),
            max_dual_norm: o.max_dual_norm,
            flagged: 0,
            schedule: o.schedule,
        })
        .collect();
    assemble("finite_factor", v0, closed_form_price, outcomes, None, cost)
}
