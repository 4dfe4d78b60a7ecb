use nalgebra::DMatrix;

use crate::dynamics::{Scheme, TimeGrid, Volatility};
use crate::rng::Increments;
use crate::{Error, Result};

/// A recorded stretch of one path: `states[k]` is the curve at step `start + k`,
/// driven by `incs.step(start + k)`.
#[derive(Debug, Clone, Copy)]
pub struct PathSegment<'a> {
    pub start: usize,
    pub states: &'a [Vec<f64>],
    pub incs: &'a Increments,
}

impl<'a> PathSegment<'a> {
    pub fn new(start: usize, states: &'a [Vec<f64>], incs: &'a Increments) -> Result<Self> {
        if start + states.len() != incs.steps() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} states from step {start} do not match {} increments",
                states.len(),
                incs.steps()
            )));
        }
        Ok(Self { start, states, incs })
    }

    pub fn end(&self) -> usize {
        self.incs.steps()
    }

    pub fn state(&self, l: usize) -> &[f64] {
        &self.states[l - self.start]
    }
}

/// First variation `Y_{t,s}`: derivative of the state at step `to` with respect
/// to the state at step `from`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstVariationOperator {
    pub from: usize,
    pub to: usize,
    pub y: DMatrix<f64>,
}

impl FirstVariationOperator {
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        (&self.y * nalgebra::DVector::from_column_slice(h)).iter().copied().collect()
    }
}

/// Linearisation of a discretised price flow.
///
/// Tangents and adjoints are the exact derivatives of the discrete scheme,
/// so `Y h` agrees with central differences of whole paths up to `O(ε²)`.
pub struct Flow<'a, V: Volatility + ?Sized> {
    pub model: &'a V,
    pub scheme: Scheme,
    pub time: TimeGrid,
}

impl<V: Volatility + ?Sized> Clone for Flow<'_, V> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<V: Volatility + ?Sized> Copy for Flow<'_, V> {}

struct Scratch {
    sig: Vec<f64>,
    dsig: Vec<f64>,
    g: Vec<f64>,
    vjp: Vec<f64>,
}

impl<'a, V: Volatility + ?Sized> Flow<'a, V> {
    pub fn new(model: &'a V, scheme: Scheme, time: TimeGrid) -> Self {
        Self { model, scheme, time }
    }

    fn scratch(&self) -> Scratch {
        let m = self.model.grid().len();
        let n = self.model.n_factors();
        Scratch { sig: vec![0.0; m * n], dsig: vec![0.0; m * n], g: vec![0.0; m * n], vjp: vec![0.0; m] }
    }

    fn tangent_step(&self, seg: &PathSegment, l: usize, h: &[f64], out: &mut [f64], s: &mut Scratch) -> Result<()> {
        let t = self.time.time(l);
        let x = seg.state(l);
        let dw = seg.incs.step(l);
        let n = dw.len();
        let first = self.model.grid().expired_count(t);
        self.model.sigma_jvp_into(t, x, h, &mut s.dsig)?;
        out[..first].copy_from_slice(&h[..first]);
        match self.scheme {
            Scheme::Euler => {
                for i in first..x.len() {
                    let row = &s.dsig[i * n..(i + 1) * n];
                    out[i] = h[i] + row.iter().zip(dw).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            Scheme::LogEuler => {
                self.model.sigma_into(t, x, &mut s.sig)?;
                let xn = seg.state(l + 1);
                for i in first..x.len() {
                    let mut acc = h[i] / x[i];
                    for k in 0..n {
                        let a = s.sig[i * n + k] / x[i];
                        let da = (s.dsig[i * n + k] - a * h[i]) / x[i];
                        acc += da * (dw[k] - a * self.time.dt);
                    }
                    out[i] = xn[i] * acc;
                }
            }
        }
        Ok(())
    }

    fn adjoint_step(&self, seg: &PathSegment, l: usize, lam: &[f64], out: &mut [f64], s: &mut Scratch) -> Result<()> {
        let t = self.time.time(l);
        let x = seg.state(l);
        let dw = seg.incs.step(l);
        let n = dw.len();
        let m = x.len();
        let first = self.model.grid().expired_count(t);
        s.g.fill(0.0);
        match self.scheme {
            Scheme::Euler => {
                for i in first..m {
                    for k in 0..n {
                        s.g[i * n + k] = lam[i] * dw[k];
                    }
                }
                self.model.sigma_vjp_into(t, x, &s.g, &mut s.vjp)?;
                for j in 0..m {
                    out[j] = lam[j] + s.vjp[j];
                }
            }
            Scheme::LogEuler => {
                self.model.sigma_into(t, x, &mut s.sig)?;
                let xn = seg.state(l + 1);
                out[..first].copy_from_slice(&lam[..first]);
                for i in first..m {
                    let r = lam[i] * xn[i] / x[i];
                    let mut own = 1.0;
                    for k in 0..n {
                        let a = s.sig[i * n + k] / x[i];
                        let gk = dw[k] - a * self.time.dt;
                        own -= a * gk;
                        s.g[i * n + k] = r * gk;
                    }
                    out[i] = r * own;
                }
                self.model.sigma_vjp_given(t, x, &s.sig, &s.g, &mut s.vjp)?;
                for j in 0..m {
                    out[j] += s.vjp[j];
                }
            }
        }
        Ok(())
    }

    /// `Y_{from, end} h`.
    pub fn tangent(&self, seg: &PathSegment, from: usize, h: &[f64]) -> Result<Vec<f64>> {
        let mut s = self.scratch();
        let mut cur = h.to_vec();
        let mut next = vec![0.0; h.len()];
        for l in from..seg.end() {
            self.tangent_step(seg, l, &cur, &mut next, &mut s)?;
            std::mem::swap(&mut cur, &mut next);
        }
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("first variation"));
        }
        Ok(cur)
    }

    /// Cotangents `λ_l = Y_{l,end}ᵀ λ_end` for `l = start..=end`.
    pub fn adjoint(&self, seg: &PathSegment, lam_end: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut s = self.scratch();
        let steps = seg.end() - seg.start;
        let mut out = vec![Vec::new(); steps + 1];
        out[steps] = lam_end.to_vec();
        for k in (0..steps).rev() {
            let mut cur = vec![0.0; lam_end.len()];
            self.adjoint_step(seg, seg.start + k, &out[k + 1], &mut cur, &mut s)?;
            out[k] = cur;
        }
        if out[0].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("adjoint first variation"));
        }
        Ok(out)
    }

    /// Full matrix `Y_{from, end}`, one tangent per column.
    pub fn variation(&self, seg: &PathSegment, from: usize) -> Result<FirstVariationOperator> {
        let m = self.model.grid().len();
        let mut y = DMatrix::zeros(m, m);
        let mut e = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            let col = self.tangent(seg, from, &e)?;
            y.set_column(j, &nalgebra::DVector::from_vec(col));
            e[j] = 0.0;
        }
        Ok(FirstVariationOperator { from, to: seg.end(), y })
    }

    /// `∂x_{l+1} / ∂ΔW_l` as a row-major `(nodes × N)` matrix.
    pub fn noise_jacobian(&self, seg: &PathSegment, l: usize) -> Result<Vec<f64>> {
        let t = self.time.time(l);
        let x = seg.state(l);
        let mut b = self.model.sigma(t, x)?;
        if self.scheme == Scheme::LogEuler {
            let n = self.model.n_factors();
            let xn = seg.state(l + 1);
            for i in 0..x.len() {
                for k in 0..n {
                    b[i * n + k] *= xn[i] / x[i];
                }
            }
        }
        Ok(b)
    }

    /// Malliavin derivative of the terminal curve with respect to the noise at step `l`:
    /// `Y_{l+1,end} ∂x_{l+1}/∂ΔW_l`, or `σ(T, x_T)` at the final step.
    pub fn derivative_curve(&self, seg: &PathSegment, l: usize) -> Result<DMatrix<f64>> {
        let m = self.model.grid().len();
        let n = self.model.n_factors();
        if l == seg.end() {
            let sig = self.model.sigma(self.time.time(l), seg.state(l))?;
            return Ok(DMatrix::from_row_slice(m, n, &sig));
        }
        let b = self.noise_jacobian(seg, l)?;
        let mut d = DMatrix::zeros(m, n);
        let mut col = vec![0.0; m];
        for k in 0..n {
            for i in 0..m {
                col[i] = b[i * n + k];
            }
            let yc = self.tangent(seg, l + 1, &col)?;
            d.set_column(k, &nalgebra::DVector::from_vec(yc));
        }
        Ok(d)
    }

    /// Picard iterates of the linear equation `Y = I + ∫ ∇σ(t, x_t)[Y] dW` applied to `h`:
    /// entry `n` holds `Yⁿ_{from,end} h`, with `Y⁰ = I`.
    pub fn picard(&self, seg: &PathSegment, from: usize, h: &[f64], n_iters: usize) -> Result<Vec<Vec<f64>>> {
        let m = h.len();
        let n = self.model.n_factors();
        let steps = seg.end() - from;
        let mut prev: Vec<Vec<f64>> = vec![h.to_vec(); steps + 1];
        let mut out = vec![h.to_vec()];
        let mut dsig = vec![0.0; m * n];
        for _ in 0..n_iters {
            let mut cur = Vec::with_capacity(steps + 1);
            let mut acc = h.to_vec();
            cur.push(acc.clone());
            for k in 0..steps {
                let l = from + k;
                let t = self.time.time(l);
                self.model.sigma_jvp_into(t, seg.state(l), &prev[k], &mut dsig)?;
                let dw = seg.incs.step(l);
                for i in 0..m {
                    acc[i] += (0..n).map(|j| dsig[i * n + j] * dw[j]).sum::<f64>();
                }
                cur.push(acc.clone());
            }
            out.push(acc);
            prev = cur;
        }
        Ok(out)
    }

    /// Matrix Picard iterates `Yⁿ_{from,end}`, `n = 0..=n_iters`.
    pub fn picard_matrices(&self, seg: &PathSegment, from: usize, n_iters: usize) -> Result<Vec<DMatrix<f64>>> {
        let m = self.model.grid().len();
        let mut mats = vec![DMatrix::zeros(m, m); n_iters + 1];
        let mut e = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            for (k, col) in self.picard(seg, from, &e, n_iters)?.into_iter().enumerate() {
                mats[k].set_column(j, &nalgebra::DVector::from_vec(col));
            }
            e[j] = 0.0;
        }
        Ok(mats)
    }
}
