use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{GaussianHjm, Volatility, VolatilityModel};
use crate::curvespace::{DiscountedCurve, ForwardCurve, ForwardInterpolation, MaturityGrid, NODE_TOL};
use crate::rng::{derive_seed, Increments};
use crate::stats::Estimate;
use crate::{Error, Result};

/// Largest tolerated fraction of paths flagged for a positivity breach.
pub const MAX_FLAGGED_FRACTION: f64 = 1e-3;

/// Uniform simulation times `t_ℓ = ℓ Δt`, `ℓ = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("bad time grid: T={horizon}, L={steps}")));
        }
        Ok(Self { dt: horizon / steps as f64, steps })
    }

    /// Grid with step `dt`, which must divide `horizon`.
    pub fn with_dt(horizon: f64, dt: f64) -> Result<Self> {
        let steps = (horizon / dt).round();
        if !(dt > 0.0) || steps < 1.0 || (steps * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::InvalidArgument(format!("Δt={dt} does not divide T={horizon}")));
        }
        Self::new(horizon, steps as usize)
    }

    pub fn time(&self, l: usize) -> f64 {
        l as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.steps)
    }

    /// Index of `t` on the grid, if it is a grid time.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let l = (t / self.dt).round();
        (l >= 0.0 && l as usize <= self.steps && (l * self.dt - t).abs() <= NODE_TOL).then_some(l as usize)
    }

    /// Same horizon, step divided by `factor`.
    pub fn refine(&self, factor: usize) -> Self {
        Self { dt: self.dt / factor as f64, steps: self.steps * factor }
    }
}

/// Time discretisation of `dP̃ = σ dW`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `x' = x + σ ΔW`.
    Euler,
    /// `x'_i = x_i exp(⟨a_i, ΔW⟩ - ½|a_i|² Δt)` with `a_i = σ_i / x_i`.
    LogEuler,
}

impl VolatilityModel {
    pub fn default_scheme(&self) -> Scheme {
        match self {
            VolatilityModel::Gaussian(_) => Scheme::Euler,
            VolatilityModel::Local(_) => Scheme::LogEuler,
        }
    }
}

/// One step of `scheme` from `x` at time `t`; `sig` receives `σ(t, x)`.
#[allow(clippy::too_many_arguments)]
pub fn step_into<V: Volatility + ?Sized>(
    model: &V,
    scheme: Scheme,
    t: f64,
    dt: f64,
    x: &[f64],
    dw: &[f64],
    sig: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    model.sigma_into(t, x, sig)?;
    let n = dw.len();
    let first = model.grid().expired_count(t);
    out[..first].copy_from_slice(&x[..first]);
    for i in first..x.len() {
        let row = &sig[i * n..(i + 1) * n];
        out[i] = match scheme {
            Scheme::Euler => x[i] + row.iter().zip(dw).map(|(s, w)| s * w).sum::<f64>(),
            Scheme::LogEuler => {
                let mut lin = 0.0;
                let mut quad = 0.0;
                for (s, w) in row.iter().zip(dw) {
                    let a = s / x[i];
                    lin += a * w;
                    quad += a * a;
                }
                x[i] * (lin - 0.5 * quad * dt).exp()
            }
        };
    }
    Ok(())
}

/// Which states a trajectory keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Record {
    Full,
    #[default]
    Terminal,
}

/// A simulated path of the discounted curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `states[k]` is the curve at step `start + k` (full record) or the terminal curve alone.
    pub states: Vec<Vec<f64>>,
    /// Value of each node at the first step at or after its maturity (NaN if never reached).
    pub expiry: Vec<f64>,
    /// Set when an Euler step produced a non-positive live price; the path stops there.
    pub flagged: bool,
}

impl Trajectory {
    pub fn terminal(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one state")
    }
}

/// Evolves `x0` from step `start` to the end of `incs` on `time`.
pub fn evolve<V: Volatility + ?Sized>(
    model: &V,
    scheme: Scheme,
    time: &TimeGrid,
    start: usize,
    x0: &[f64],
    incs: &Increments,
    record: Record,
) -> Result<Trajectory> {
    let grid = model.grid();
    let nodes = grid.nodes();
    let mut expiry = vec![f64::NAN; x0.len()];
    let mark = |expiry: &mut [f64], t: f64, x: &[f64]| {
        for i in 0..grid.expired_count(t) {
            if expiry[i].is_nan() {
                expiry[i] = x[i];
            }
        }
    };
    mark(&mut expiry, time.time(start), x0);
    let mut x = x0.to_vec();
    let mut next = vec![0.0; x.len()];
    let mut sig = vec![0.0; x.len() * model.n_factors()];
    let mut states = Vec::new();
    if record == Record::Full {
        states.reserve(incs.steps() - start + 1);
        states.push(x.clone());
    }
    let mut flagged = false;
    for l in start..incs.steps() {
        let t = time.time(l);
        step_into(model, scheme, t, time.dt, &x, incs.step(l), &mut sig, &mut next)?;
        let first = grid.expired_count(t);
        if next[first..].iter().any(|v| !(*v > 0.0)) {
            flagged = true;
            if record == Record::Full {
                for _ in l..incs.steps() {
                    states.push(x.clone());
                }
            }
            break;
        }
        std::mem::swap(&mut x, &mut next);
        mark(&mut expiry, time.time(l + 1), &x);
        if record == Record::Full {
            states.push(x.clone());
        }
    }
    debug_assert!(nodes.len() == x.len());
    if record == Record::Terminal {
        states.push(x);
    }
    Ok(Trajectory { states, expiry, flagged })
}

/// Options for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub scheme: Scheme,
    pub record: Record,
    /// Brownian increments are summed from this many finer normals per step.
    pub substeps: usize,
}

impl SimOptions {
    pub fn for_model(model: &VolatilityModel) -> Self {
        Self { scheme: model.default_scheme(), record: Record::Terminal, substeps: 1 }
    }
}

/// Seed of path `path` under run seed `seed`.
pub fn path_seed(seed: u64, path: u64) -> u64 {
    derive_seed(&[seed, path])
}

/// The Brownian increments of one outer path.
pub fn path_increments(seed: u64, path: u64, time: &TimeGrid, n_factors: usize, substeps: usize) -> Increments {
    Increments::sample(&[path_seed(seed, path)], time.steps, n_factors, time.dt, substeps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub id: u64,
    pub seed: u64,
    pub trajectory: Trajectory,
}

/// Monte Carlo sample of the discounted curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub time: TimeGrid,
    pub n_factors: usize,
    pub seed: u64,
    pub substeps: usize,
    pub record: Record,
    pub initial: Vec<f64>,
    pub paths: Vec<PathRecord>,
}

impl PathBundle {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn flagged(&self) -> usize {
        self.paths.iter().filter(|p| p.trajectory.flagged).count()
    }

    /// Regenerates the increments of path `p` from its seed.
    pub fn increments(&self, p: usize) -> Increments {
        Increments::sample(&[self.paths[p].seed], self.time.steps, self.n_factors, self.time.dt, self.substeps)
    }

    pub fn terminal(&self, p: usize) -> &[f64] {
        self.paths[p].trajectory.terminal()
    }

    /// State of path `p` at step `l`; needs a full record.
    pub fn state(&self, p: usize, l: usize) -> &[f64] {
        assert_eq!(self.record, Record::Full, "state history was not recorded");
        &self.paths[p].trajectory.states[l]
    }

    /// Per-node estimate of `E P̃_T(s_i)` over unflagged paths.
    pub fn terminal_mean(&self) -> Vec<Estimate> {
        let m = self.initial.len();
        let live: Vec<&PathRecord> = self.paths.iter().filter(|p| !p.trajectory.flagged).collect();
        (0..m)
            .map(|i| {
                let xs: Vec<f64> = live.iter().map(|p| p.trajectory.terminal()[i]).collect();
                Estimate::from_samples(&xs)
            })
            .collect()
    }

    /// Largest `|mean P̃_T(s_i) - P̃_0(s_i)|` over nodes, in standard errors.
    pub fn martingale_gap(&self) -> f64 {
        self.terminal_mean()
            .iter()
            .zip(&self.initial)
            .map(|(e, &x)| {
                let gap = (e.mean - x).abs();
                if gap == 0.0 {
                    0.0
                } else if e.stderr > 0.0 {
                    gap / e.stderr
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }

    /// Bitwise equality of every recorded number (NaN placeholders included).
    pub fn bit_identical(&self, other: &PathBundle) -> bool {
        let bits = |v: &[f64], w: &[f64]| v.len() == w.len() && v.iter().zip(w).all(|(a, b)| a.to_bits() == b.to_bits());
        self.time == other.time
            && self.seed == other.seed
            && self.record == other.record
            && self.paths.len() == other.paths.len()
            && self.paths.iter().zip(&other.paths).all(|(a, b)| {
                a.seed == b.seed
                    && a.trajectory.flagged == b.trajectory.flagged
                    && bits(&a.trajectory.expiry, &b.trajectory.expiry)
                    && a.trajectory.states.len() == b.trajectory.states.len()
                    && a.trajectory.states.iter().zip(&b.trajectory.states).all(|(x, y)| bits(x, y))
            })
    }

    /// Whether every node that expired before `T` kept its expiry value bit for bit.
    pub fn frozen_exact(&self) -> bool {
        self.paths.iter().all(|p| {
            let tr = &p.trajectory;
            tr.expiry.iter().zip(tr.terminal()).all(|(e, x)| e.is_nan() || e.to_bits() == x.to_bits())
        })
    }
}

/// Simulates `n_paths` independent paths of the discounted curve from `x0`.
///
/// Each path is a pure function of `(seed, path index)`, so the result does
/// not depend on the worker count.
pub fn simulate<V: Volatility + ?Sized>(
    model: &V,
    x0: &DiscountedCurve,
    time: &TimeGrid,
    n_paths: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<PathBundle> {
    check_setup(model.grid(), x0, time)?;
    let n = model.n_factors();
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let incs = path_increments(seed, p, time, n, opts.substeps);
            let trajectory = evolve(model, opts.scheme, time, 0, x0.values(), &incs, opts.record)?;
            Ok(PathRecord { id: p, seed: path_seed(seed, p), trajectory })
        })
        .collect::<Result<Vec<_>>>()?;
    let bundle = PathBundle {
        time: *time,
        n_factors: n,
        seed,
        substeps: opts.substeps,
        record: opts.record,
        initial: x0.values().to_vec(),
        paths,
    };
    let flagged = bundle.flagged();
    if flagged as f64 > MAX_FLAGGED_FRACTION * n_paths as f64 {
        return Err(Error::PositivityBreach { flagged, total: n_paths });
    }
    Ok(bundle)
}

fn check_setup(grid: &MaturityGrid, x0: &DiscountedCurve, time: &TimeGrid) -> Result<()> {
    if x0.grid().nodes() != grid.nodes() {
        return Err(Error::InvalidArgument("initial curve lives on a different grid".into()));
    }
    if time.horizon() > grid.last() + NODE_TOL {
        return Err(Error::TimeOutOfRange { t: time.horizon(), max: grid.last() });
    }
    if let Some((i, &v)) = x0.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositive { maturity: grid.nodes()[i], value: v });
    }
    Ok(())
}

/// A forward-rate path reduced to what discounting needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPath {
    /// `f_T(s_i)` at every node (frozen once a node drops behind the running time).
    pub terminal: Vec<f64>,
    /// `ln B_T = Σ_ℓ r_{t_ℓ} Δt`.
    pub log_bank: f64,
    /// `ln B` at the first step at or after each node's maturity (NaN if never reached).
    pub log_bank_at_expiry: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardBundle {
    pub time: TimeGrid,
    pub interpolation: ForwardInterpolation,
    pub paths: Vec<ForwardPath>,
}

impl ForwardBundle {
    /// `P̃_T(s_i) = exp(-ln B_T - ∫_T^{s_i} f_T)` on live nodes and `1/B_{s_i}` on expired ones.
    pub fn discounted(&self, grid: &std::sync::Arc<MaturityGrid>, p: usize) -> Result<Vec<f64>> {
        let path = &self.paths[p];
        let t = self.time.horizon();
        let f = ForwardCurve::new(grid.clone(), path.terminal.clone(), t, self.interpolation)?;
        Ok(grid
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                if s < t - NODE_TOL {
                    (-path.log_bank_at_expiry[i]).exp()
                } else {
                    (-path.log_bank - f.integrate(t, s)).exp()
                }
            })
            .collect())
    }
}

/// Euler scheme for `df_t(s) = ⟨τ_t(s), ∫_t^s τ_t⟩ dt - ⟨τ_t(s), dW_t⟩` at the grid nodes.
///
/// Uses the same per-path increments as [`simulate`] under equal
/// `(seed, substeps)`. Nodes stay live while they are the last node at or
/// before the running time, so the short rate can be read off by
/// interpolation.
pub fn simulate_forwards(
    model: &GaussianHjm,
    f0: &ForwardCurve,
    time: &TimeGrid,
    n_paths: usize,
    seed: u64,
    substeps: usize,
) -> Result<ForwardBundle> {
    let grid = model.grid().clone();
    if f0.grid().nodes() != grid.nodes() {
        return Err(Error::InvalidArgument("initial forwards live on a different grid".into()));
    }
    if time.horizon() > grid.last() + NODE_TOL {
        return Err(Error::TimeOutOfRange { t: time.horizon(), max: grid.last() });
    }
    let n = model.factors().len();
    let nodes = grid.nodes().to_vec();
    let interp = f0.interpolation();
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let incs = path_increments(seed, p, time, n, substeps);
            let mut f = f0.values().to_vec();
            let mut log_bank = 0.0;
            let mut at_expiry = vec![f64::NAN; nodes.len()];
            at_expiry[0] = 0.0;
            for l in 0..time.steps {
                let t = time.time(l);
                let j = grid.last_node_at_or_before(t);
                let r = match interp {
                    ForwardInterpolation::Linear if j + 1 < nodes.len() => {
                        let w = (t - nodes[j]) / (nodes[j + 1] - nodes[j]);
                        f[j] * (1.0 - w) + f[j + 1] * w
                    }
                    _ => f[j],
                };
                let dw = incs.step(l);
                for i in j..nodes.len() {
                    let mut drift = 0.0;
                    let mut noise = 0.0;
                    for (k, factor) in model.factors().iter().enumerate() {
                        let tau = factor.tau(t, nodes[i]);
                        drift += tau * factor.integral(t, nodes[i]);
                        noise += tau * dw[k];
                    }
                    f[i] += drift * time.dt - noise;
                }
                log_bank += r * time.dt;
                let t_next = time.time(l + 1);
                for i in 0..grid.expired_count(t_next) {
                    if at_expiry[i].is_nan() {
                        at_expiry[i] = log_bank;
                    }
                }
            }
            ForwardPath { terminal: f, log_bank, log_bank_at_expiry: at_expiry }
        })
        .collect();
    Ok(ForwardBundle { time: *time, interpolation: interp, paths })
}
