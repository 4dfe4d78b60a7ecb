use rayon::prelude::*;
use serde::Serialize;

use super::payout::Payout;
use crate::curvespace::{pair, PortfolioMeasure};
use crate::dynamics::{evolve, path_increments, Record, Scheme, TimeGrid, Volatility};
use crate::malliavin::{inner_keys, Flow, InnerBudget, PathSegment};
use crate::rng::Increments;
use crate::stats::{vector_estimate, Estimate};
use crate::{Error, Result};

/// Model, scheme, payout and a time grid ending at the payout expiry.
pub struct HedgeSetup<'a, V: Volatility + ?Sized> {
    pub model: &'a V,
    pub scheme: Scheme,
    pub time: TimeGrid,
    pub payout: &'a Payout,
}

impl<V: Volatility + ?Sized> Clone for HedgeSetup<'_, V> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<V: Volatility + ?Sized> Copy for HedgeSetup<'_, V> {}

impl<'a, V: Volatility + ?Sized> HedgeSetup<'a, V> {
    pub fn new(model: &'a V, scheme: Scheme, time: TimeGrid, payout: &'a Payout) -> Result<Self> {
        if (time.horizon() - payout.expiry()).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "time grid ends at {} but the payout expires at {}",
                time.horizon(),
                payout.expiry()
            )));
        }
        if model.grid().nodes() != payout.grid().nodes() {
            return Err(Error::InvalidArgument("model and payout live on different grids".into()));
        }
        Ok(Self { model, scheme, time, payout })
    }

    pub fn flow(&self) -> Flow<'a, V> {
        Flow::new(self.model, self.scheme, self.time)
    }

    /// Full path from `x` at step `start` driven by `incs`.
    pub fn path(&self, start: usize, x: &[f64], incs: &Increments) -> Result<Vec<Vec<f64>>> {
        let tr = evolve(self.model, self.scheme, &self.time, start, x, incs, Record::Full)?;
        if tr.flagged {
            return Err(Error::PositivityBreach { flagged: 1, total: 1 });
        }
        Ok(tr.states)
    }

    fn terminal(&self, x: &[f64], incs: &Increments) -> Result<Vec<f64>> {
        let tr = evolve(self.model, self.scheme, &self.time, 0, x, incs, Record::Terminal)?;
        if tr.flagged {
            return Err(Error::PositivityBreach { flagged: 1, total: 1 });
        }
        Ok(tr.states.into_iter().next().expect("terminal state"))
    }
}

/// Monte Carlo pre-hedge `φ_t = E{Y_{t,T}* ∇ĝ(P̃_T) | F_t}` with per-atom errors.
#[derive(Debug, Clone, Serialize)]
pub struct Prehedge {
    pub t: f64,
    pub weights: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Conditional price `E{ĝ(P̃_T) | F_t}`.
    pub value: Estimate,
    pub n_inner: usize,
    pub dual_norm: f64,
}

impl Prehedge {
    pub fn measure(&self, grid: std::sync::Arc<crate::curvespace::MaturityGrid>) -> PortfolioMeasure {
        PortfolioMeasure::from_dense(grid, &self.weights)
    }

    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().fold(0.0, |a, &b| a.max(b))
    }

    /// Whether every atom error is within `tol`.
    pub fn within_tolerance(&self, tol: f64) -> bool {
        self.max_stderr() <= tol
    }
}

/// `C_1 e^{C²(T-t)/2}`, the bound on the dual norm of any pre-hedge.
pub fn prehedge_bound(c1: f64, lipschitz: f64, remaining: f64) -> f64 {
    c1 * (0.5 * lipschitz * lipschitz * remaining).exp()
}

/// Pre-hedge at step `l` from state `x` by nested simulation and the adjoint flow.
///
/// Inner path `i` uses the seed keys `(seed, path, l, i)`.
pub fn prehedge<V: Volatility + ?Sized>(
    setup: &HedgeSetup<V>,
    l: usize,
    x: &[f64],
    budget: InnerBudget,
    seed: u64,
    path: u64,
) -> Result<Prehedge> {
    if budget.n_inner < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 inner paths, got {}", budget.n_inner)));
    }
    let time = setup.time;
    let n = setup.model.n_factors();
    let flow = setup.flow();
    let rows = (0..budget.n_inner)
        .into_par_iter()
        .map(|i| {
            let tail = Increments::sample(&inner_keys(seed, path, l, i), time.steps - l, n, time.dt, budget.substeps);
            let incs = Increments::zeros(time.dt, l, n).splice(l, &tail);
            let states = setup.path(l, x, &incs)?;
            let seg = PathSegment::new(l, &states, &incs)?;
            let xt = seg.state(seg.end());
            let value = setup.payout.hedged_value(xt)?;
            let grad = setup.payout.gradient_dense(xt)?;
            let mut lam = flow.adjoint(&seg, &grad)?.swap_remove(0);
            lam.push(value);
            Ok(lam)
        })
        .collect::<Result<Vec<_>>>()?;
    let est = vector_estimate(&rows);
    let m = x.len();
    let weights: Vec<f64> = est[..m].iter().map(|e| e.mean).collect();
    let stderr = est[..m].iter().map(|e| e.stderr).collect();
    let dual_norm = crate::curvespace::dual_norm(setup.model.grid(), &weights);
    Ok(Prehedge { t: time.time(l), weights, stderr, value: est[m], n_inner: budget.n_inner, dual_norm })
}

/// Bond holdings plus a cash position in the bond maturing now (`P_t(t) = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct HedgePosition {
    pub bonds: PortfolioMeasure,
    pub cash: f64,
}

impl HedgePosition {
    /// Value against the bond curve `P_t`.
    pub fn value(&self, p_t: &[f64]) -> Result<f64> {
        Ok(pair(&self.bonds, p_t)? + self.cash)
    }
}

/// `φ_t + (V_t - ⟨φ_t, P_t⟩) δ_t`: tops the pre-hedge up with cash to the wealth `V_t`.
pub fn self_financing_complete(phi: &PortfolioMeasure, v_t: f64, p_t: &[f64]) -> Result<HedgePosition> {
    let held = pair(phi, p_t)?;
    Ok(HedgePosition { bonds: phi.clone(), cash: v_t - held })
}

/// Monte Carlo price `E{ĝ(P̃_T)}` from `x0`.
pub fn price_mc<V: Volatility + ?Sized>(
    setup: &HedgeSetup<V>,
    x0: &[f64],
    n_paths: usize,
    seed: u64,
    substeps: usize,
) -> Result<Estimate> {
    let n = setup.model.n_factors();
    let values = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let incs = path_increments(seed, p, &setup.time, n, substeps);
            setup.payout.hedged_value(&setup.terminal(x0, &incs)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Estimate::from_samples(&values))
}

/// `(price(x0 + εh) - price(x0 - εh)) / 2ε` with common random numbers.
#[allow(clippy::too_many_arguments)]
pub fn bump_revalue<V: Volatility + ?Sized>(
    setup: &HedgeSetup<V>,
    x0: &[f64],
    h: &[f64],
    eps: f64,
    n_paths: usize,
    seed: u64,
    substeps: usize,
) -> Result<Estimate> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("bump size must be positive, got {eps}")));
    }
    let n = setup.model.n_factors();
    let up: Vec<f64> = x0.iter().zip(h).map(|(x, h)| x + eps * h).collect();
    let dn: Vec<f64> = x0.iter().zip(h).map(|(x, h)| x - eps * h).collect();
    let diffs = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let incs = path_increments(seed, p, &setup.time, n, substeps);
            let a = setup.payout.hedged_value(&setup.terminal(&up, &incs)?)?;
            let b = setup.payout.hedged_value(&setup.terminal(&dn, &incs)?)?;
            Ok((a - b) / (2.0 * eps))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Estimate::from_samples(&diffs))
}
