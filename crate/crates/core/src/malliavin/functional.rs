use crate::dynamics::{evolve, Record, Volatility};
use crate::rng::Increments;
use crate::{Error, Result};

use super::flow::{Flow, PathSegment};

/// A functional of the Brownian increments with its noise derivative.
pub trait WienerFunctional: Sync {
    fn value(&self, incs: &Increments) -> Result<f64>;

    /// `∂X / ∂ΔW_l`, one entry per factor.
    fn derivative(&self, incs: &Increments, l: usize) -> Result<Vec<f64>>;
}

/// `X = Σ_l ⟨h_l, ΔW_l⟩` for a deterministic `h` given per step.
#[derive(Debug, Clone)]
pub struct LinearFunctional {
    pub h: Vec<Vec<f64>>,
}

impl WienerFunctional for LinearFunctional {
    fn value(&self, incs: &Increments) -> Result<f64> {
        Ok((0..incs.steps()).map(|l| dot(&self.h[l], incs.step(l))).sum())
    }

    fn derivative(&self, _incs: &Increments, l: usize) -> Result<Vec<f64>> {
        Ok(self.h[l].clone())
    }
}

/// `X = W_T^{(factor)}`.
#[derive(Debug, Clone, Copy)]
pub struct TerminalBrownian {
    pub factor: usize,
}

impl WienerFunctional for TerminalBrownian {
    fn value(&self, incs: &Increments) -> Result<f64> {
        Ok(incs.brownian(incs.steps(), self.factor))
    }

    fn derivative(&self, incs: &Increments, _l: usize) -> Result<Vec<f64>> {
        Ok(unit(incs.n_factors(), self.factor, 1.0))
    }
}

/// `X = (W_T^{(factor)})²`.
#[derive(Debug, Clone, Copy)]
pub struct SquaredBrownian {
    pub factor: usize,
}

impl WienerFunctional for SquaredBrownian {
    fn value(&self, incs: &Increments) -> Result<f64> {
        Ok(incs.brownian(incs.steps(), self.factor).powi(2))
    }

    fn derivative(&self, incs: &Increments, _l: usize) -> Result<Vec<f64>> {
        Ok(unit(incs.n_factors(), self.factor, 2.0 * incs.brownian(incs.steps(), self.factor)))
    }
}

/// `X = exp(⟨h, W_T⟩ - ½|h|² T)` for a constant `h`.
#[derive(Debug, Clone)]
pub struct ExponentialMartingale {
    pub h: Vec<f64>,
}

impl ExponentialMartingale {
    /// Running martingale `M_{t_l}`.
    pub fn running(&self, incs: &Increments, l: usize) -> f64 {
        let hh = dot(&self.h, &self.h);
        let w: f64 = (0..self.h.len()).map(|k| self.h[k] * incs.brownian(l, k)).sum();
        (w - 0.5 * hh * l as f64 * incs.dt()).exp()
    }
}

impl WienerFunctional for ExponentialMartingale {
    fn value(&self, incs: &Increments) -> Result<f64> {
        Ok(self.running(incs, incs.steps()))
    }

    fn derivative(&self, incs: &Increments, _l: usize) -> Result<Vec<f64>> {
        let x = self.running(incs, incs.steps());
        Ok(self.h.iter().map(|h| x * h).collect())
    }
}

/// `X ≡ c`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantFunctional(pub f64);

impl WienerFunctional for ConstantFunctional {
    fn value(&self, _incs: &Increments) -> Result<f64> {
        Ok(self.0)
    }

    fn derivative(&self, incs: &Increments, _l: usize) -> Result<Vec<f64>> {
        Ok(vec![0.0; incs.n_factors()])
    }
}

/// A scalar function of a curve with a (sub)gradient.
pub trait CurveFunction: Sync {
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// `X = g(P̃_T)` for a curve simulated from a fixed initial state.
pub struct TerminalCurveFunctional<'a, V: Volatility + ?Sized, G: CurveFunction + ?Sized> {
    pub flow: Flow<'a, V>,
    pub x0: &'a [f64],
    pub g: &'a G,
}

impl<V: Volatility + ?Sized, G: CurveFunction + ?Sized> TerminalCurveFunctional<'_, V, G> {
    fn path(&self, incs: &Increments) -> Result<Vec<Vec<f64>>> {
        let tr = evolve(self.flow.model, self.flow.scheme, &self.flow.time, 0, self.x0, incs, Record::Full)?;
        if tr.flagged {
            return Err(Error::PositivityBreach { flagged: 1, total: 1 });
        }
        Ok(tr.states)
    }
}

impl<V: Volatility + ?Sized, G: CurveFunction + ?Sized> WienerFunctional for TerminalCurveFunctional<'_, V, G> {
    fn value(&self, incs: &Increments) -> Result<f64> {
        let states = self.path(incs)?;
        self.g.value(states.last().expect("nonempty path"))
    }

    fn derivative(&self, incs: &Increments, l: usize) -> Result<Vec<f64>> {
        let states = self.path(incs)?;
        let seg = PathSegment::new(0, &states, incs)?;
        let grad = self.g.gradient(seg.state(seg.end()))?;
        let lam = self.flow.adjoint_after(&seg, l, &grad)?;
        let b = self.flow.noise_jacobian(&seg, l)?;
        Ok(contract(&lam, &b, incs.n_factors()))
    }
}

impl<V: Volatility + ?Sized> Flow<'_, V> {
    /// `Y_{l+1,end}ᵀ λ_end`.
    pub(crate) fn adjoint_after(&self, seg: &PathSegment, l: usize, lam_end: &[f64]) -> Result<Vec<f64>> {
        let sub = PathSegment::new(l + 1, &seg.states[l + 1 - seg.start..], seg.incs)?;
        Ok(self.adjoint(&sub, lam_end)?.swap_remove(0))
    }
}

/// `Σ_i λ_i B_ik` for a row-major `(nodes × N)` matrix `B`.
pub fn contract(lam: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, l) in lam.iter().enumerate() {
        for k in 0..n {
            out[k] += l * b[i * n + k];
        }
    }
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn unit(n: usize, k: usize, v: f64) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = v;
    e
}

