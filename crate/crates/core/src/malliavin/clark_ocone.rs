use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::functional::{dot, WienerFunctional};
use crate::rng::Increments;
use crate::stats::{std_dev, vector_estimate, Estimate};
use crate::{Error, Result};

/// Nested-simulation budget for conditional expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerBudget {
    pub n_inner: usize,
    pub substeps: usize,
}

/// Seed keys of inner path `i` branching from outer path `path` at step `l`.
pub fn inner_keys(seed: u64, path: u64, l: usize, i: usize) -> [u64; 5] {
    [seed, 0x1a4e5, path, l as u64, i as u64]
}

/// `E{∂X/∂ΔW_l | F_{t_l}}` by nested Monte Carlo: the outer increments before
/// step `l` are kept and the rest are resampled `n_inner` times.
pub fn clark_ocone_integrand<X: WienerFunctional + ?Sized>(
    x: &X,
    outer: &Increments,
    l: usize,
    budget: InnerBudget,
    seed: u64,
    path: u64,
) -> Result<Vec<Estimate>> {
    if budget.n_inner < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 inner paths, got {}", budget.n_inner)));
    }
    let tail_steps = outer.steps() - l;
    let samples = (0..budget.n_inner)
        .into_par_iter()
        .map(|i| {
            let tail = Increments::sample(
                &inner_keys(seed, path, l, i),
                tail_steps,
                outer.n_factors(),
                outer.dt(),
                budget.substeps,
            );
            let d = x.derivative(&outer.splice(l, &tail), l)?;
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("Malliavin derivative"));
            }
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vector_estimate(&samples))
}

/// Source of the integrand `α_{t_l}` used in a reconstruction.
pub enum IntegrandSource<'a> {
    /// Closed form `(increments, l) ↦ α_l`, reading only steps before `l`.
    Analytic(&'a (dyn Fn(&Increments, usize) -> Vec<f64> + Sync)),
    Nested { budget: InnerBudget, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct Reconstruction {
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
    pub std_x: f64,
    pub relative_rms: f64,
}

/// Residuals `X - E{X} - Σ_l ⟨α_l, ΔW_l⟩` along each sample path.
pub fn reconstruct<X: WienerFunctional + ?Sized>(
    x: &X,
    mean: f64,
    paths: &[Increments],
    source: &IntegrandSource,
) -> Result<Reconstruction> {
    let out = paths
        .par_iter()
        .enumerate()
        .map(|(p, incs)| {
            let value = x.value(incs)?;
            let mut integral = 0.0;
            for l in 0..incs.steps() {
                let alpha = match source {
                    IntegrandSource::Analytic(f) => f(incs, l),
                    IntegrandSource::Nested { budget, seed } => {
                        clark_ocone_integrand(x, incs, l, *budget, *seed, p as u64)?
                            .iter()
                            .map(|e| e.mean)
                            .collect()
                    }
                };
                integral += dot(&alpha, incs.step(l));
            }
            Ok((value, value - mean - integral))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = out.iter().map(|o| o.0).collect();
    let residuals: Vec<f64> = out.iter().map(|o| o.1).collect();
    let rms_residual = crate::stats::rms(&residuals);
    let std_x = std_dev(&values);
    Ok(Reconstruction { rms_residual, std_x, relative_rms: rms_residual / std_x, residuals })
}

/// Both sides of the duality `E{∫⟨D_tX, β_t⟩dt} = E{X ∫⟨β_t, dW_t⟩}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IbpCheck {
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// Standard error of the paired difference.
    pub combined_stderr: f64,
}

impl IbpCheck {
    pub fn gap(&self) -> f64 {
        (self.lhs.mean - self.rhs.mean).abs()
    }

    pub fn passes(&self, k: f64) -> bool {
        self.gap() <= k * self.combined_stderr
    }
}

/// Monte Carlo estimate of both sides for an adapted simple process `β`
/// (`beta(incs, l)` may read steps before `l` only).
pub fn integration_by_parts_check<X: WienerFunctional + ?Sized>(
    x: &X,
    beta: &(dyn Fn(&Increments, usize) -> Vec<f64> + Sync),
    steps: usize,
    n_factors: usize,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<IbpCheck> {
    let rows = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let incs = Increments::sample(&[seed, 0x1bb, p], steps, n_factors, dt, 1);
            let value = x.value(&incs)?;
            let mut lhs = 0.0;
            let mut stoch = 0.0;
            for l in 0..steps {
                let b = beta(&incs, l);
                lhs += dot(&x.derivative(&incs, l)?, &b) * dt;
                stoch += dot(&b, incs.step(l));
            }
            Ok((lhs, value * stoch))
        })
        .collect::<Result<Vec<_>>>()?;
    let lhs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let rhs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let diff: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
    Ok(IbpCheck {
        lhs: Estimate::from_samples(&lhs),
        rhs: Estimate::from_samples(&rhs),
        combined_stderr: Estimate::from_samples(&diff).stderr,
    })
}
