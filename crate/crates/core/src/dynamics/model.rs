use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curvespace::{MaturityGrid, NODE_TOL};
use crate::{Error, Result};

/// Volatility operator `σ(t, x)` of the discounted curve, stored row-major
/// as a `(nodes × factors)` matrix.
///
/// Rows of expired maturities `s_i <= t` are zero, so that prices freeze
/// once their maturity has passed.
pub trait Volatility: Send + Sync {
    fn grid(&self) -> &Arc<MaturityGrid>;

    fn n_factors(&self) -> usize;

    fn sigma_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Whether rows scale with the node value, `σ_ik = x_i a_ik(t, x)`.
    fn proportional(&self) -> bool {
        false
    }

    /// Directional derivative `∇σ(t, x)[h]`, same layout as σ.
    ///
    /// Central difference with a step of `1e-5 ‖x‖` along `h`.
    fn sigma_jvp_into(&self, t: f64, x: &[f64], h: &[f64], out: &mut [f64]) -> Result<()> {
        let hn = norm(h);
        if hn == 0.0 {
            out.fill(0.0);
            return Ok(());
        }
        let eps = 1e-5 * norm(x).max(1e-300) / hn;
        let up: Vec<f64> = x.iter().zip(h).map(|(x, h)| x + eps * h).collect();
        let dn: Vec<f64> = x.iter().zip(h).map(|(x, h)| x - eps * h).collect();
        let mut lo = vec![0.0; out.len()];
        self.sigma_into(t, &up, out)?;
        self.sigma_into(t, &dn, &mut lo)?;
        for (o, l) in out.iter_mut().zip(&lo) {
            *o = (*o - l) / (2.0 * eps);
            if !o.is_finite() {
                return Err(Error::NonFinite("finite-difference volatility derivative"));
            }
        }
        Ok(())
    }

    /// Adjoint action `out_l = Σ_ik g_ik ∂σ_ik/∂x_l`.
    fn sigma_vjp_into(&self, t: f64, x: &[f64], g: &[f64], out: &mut [f64]) -> Result<()> {
        let mut e = vec![0.0; x.len()];
        let mut d = vec![0.0; g.len()];
        for l in 0..x.len() {
            e[l] = 1.0;
            self.sigma_jvp_into(t, x, &e, &mut d)?;
            out[l] = d.iter().zip(g).map(|(d, g)| d * g).sum();
            e[l] = 0.0;
        }
        Ok(())
    }

    /// [`sigma_vjp_into`](Self::sigma_vjp_into) when `sig = σ(t, x)` is already at hand.
    fn sigma_vjp_given(&self, t: f64, x: &[f64], sig: &[f64], g: &[f64], out: &mut [f64]) -> Result<()> {
        let _ = sig;
        self.sigma_vjp_into(t, x, g, out)
    }

    fn sigma(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.grid().len() * self.n_factors()];
        self.sigma_into(t, x, &mut out)?;
        Ok(out)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_positive(grid: &MaturityGrid, x: &[f64], from: usize) -> Result<()> {
    for i in from..x.len() {
        if !(x[i] > 0.0) {
            return Err(Error::NonPositive { maturity: grid.nodes()[i], value: x[i] });
        }
    }
    Ok(())
}

/// Deterministic forward-rate volatility `τ_t(u)` of one factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TauFactor {
    /// `τ ≡ sigma` (Ho–Lee).
    Constant { sigma: f64 },
    /// `τ_t(u) = sigma · e^{-decay (u - t)}` (Hull–White type).
    Exponential { sigma: f64, decay: f64 },
    /// `τ(u) = values[j]` for `u` in `[breaks[j-1], breaks[j])`, in maturity time.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
}

impl TauFactor {
    pub fn validate(&self) -> Result<()> {
        match self {
            TauFactor::Constant { sigma } if sigma.is_finite() => Ok(()),
            TauFactor::Exponential { sigma, decay } if sigma.is_finite() && *decay > 0.0 => Ok(()),
            TauFactor::PiecewiseConstant { breaks, values }
                if values.len() == breaks.len() + 1
                    && breaks.windows(2).all(|w| w[1] > w[0])
                    && values.iter().all(|v| v.is_finite()) =>
            {
                Ok(())
            }
            other => Err(Error::InvalidArgument(format!("malformed volatility factor {other:?}"))),
        }
    }

    pub fn tau(&self, t: f64, u: f64) -> f64 {
        match self {
            TauFactor::Constant { sigma } => *sigma,
            TauFactor::Exponential { sigma, decay } => sigma * (-decay * (u - t)).exp(),
            TauFactor::PiecewiseConstant { breaks, values } => {
                values[breaks.partition_point(|&b| b <= u)]
            }
        }
    }

    /// `∫_t^s τ_t(u) du`.
    pub fn integral(&self, t: f64, s: f64) -> f64 {
        match self {
            TauFactor::Constant { sigma } => sigma * (s - t),
            TauFactor::Exponential { sigma, decay } => {
                sigma * -(-decay * (s - t)).exp_m1() / decay
            }
            TauFactor::PiecewiseConstant { breaks, values } => {
                let (lo, hi, sign) = if s >= t { (t, s, 1.0) } else { (s, t, -1.0) };
                let mut acc = 0.0;
                let mut a = lo;
                let mut j = breaks.partition_point(|&b| b <= lo);
                while a < hi {
                    let b = if j < breaks.len() { breaks[j].min(hi) } else { hi };
                    acc += values[j] * (b - a);
                    a = b;
                    j += 1;
                }
                sign * acc
            }
        }
    }
}

/// Gaussian HJM: `σ_ik = x_i ∫_t^{s_i} τ^k_t(u) du`.
#[derive(Debug, Clone)]
pub struct GaussianHjm {
    grid: Arc<MaturityGrid>,
    factors: Vec<TauFactor>,
}

impl GaussianHjm {
    pub fn new(grid: Arc<MaturityGrid>, factors: Vec<TauFactor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("at least one volatility factor required".into()));
        }
        for f in &factors {
            f.validate()?;
        }
        Ok(Self { grid, factors })
    }

    pub fn ho_lee(grid: Arc<MaturityGrid>, sigma: f64) -> Result<Self> {
        Self::new(grid, vec![TauFactor::Constant { sigma }])
    }

    pub fn factors(&self) -> &[TauFactor] {
        &self.factors
    }

    /// `Σ_k(t, s) = ∫_t^s τ^k_t`, the bond volatility of maturity `s`.
    pub fn bond_vol(&self, t: f64, s: f64) -> Vec<f64> {
        self.factors.iter().map(|f| f.integral(t, s)).collect()
    }

    fn loadings(&self, t: f64, out: &mut [f64]) -> usize {
        let n = self.factors.len();
        let first = self.grid.expired_count(t);
        out[..first * n].fill(0.0);
        for (i, &s) in self.grid.nodes().iter().enumerate().skip(first) {
            for (k, f) in self.factors.iter().enumerate() {
                out[i * n + k] = f.integral(t, s);
            }
        }
        first
    }
}

impl Volatility for GaussianHjm {
    fn grid(&self) -> &Arc<MaturityGrid> {
        &self.grid
    }

    fn n_factors(&self) -> usize {
        self.factors.len()
    }

    fn proportional(&self) -> bool {
        true
    }

    fn sigma_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let first = self.loadings(t, out);
        check_positive(&self.grid, x, first)?;
        let n = self.factors.len();
        for i in first..x.len() {
            for o in &mut out[i * n..(i + 1) * n] {
                *o *= x[i];
            }
        }
        Ok(())
    }

    fn sigma_jvp_into(&self, t: f64, _x: &[f64], h: &[f64], out: &mut [f64]) -> Result<()> {
        let first = self.loadings(t, out);
        let n = self.factors.len();
        for i in first..h.len() {
            for o in &mut out[i * n..(i + 1) * n] {
                *o *= h[i];
            }
        }
        Ok(())
    }

    fn sigma_vjp_into(&self, t: f64, _x: &[f64], g: &[f64], out: &mut [f64]) -> Result<()> {
        let mut load = vec![0.0; g.len()];
        self.loadings(t, &mut load);
        let n = self.factors.len();
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..n).map(|k| g[i * n + k] * load[i * n + k]).sum();
        }
        Ok(())
    }
}

/// Bounded Lipschitz level function `κ(f) = level + amplitude · tanh(f / scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub level: f64,
    pub amplitude: f64,
    pub scale: f64,
}

impl Default for Kappa {
    fn default() -> Self {
        Self { level: 0.03, amplitude: 0.01, scale: 0.05 }
    }
}

impl Kappa {
    pub fn constant(level: f64) -> Self {
        Self { level, amplitude: 0.0, scale: 1.0 }
    }

    pub fn eval(&self, f: f64) -> f64 {
        self.level + self.amplitude * (f / self.scale).tanh()
    }

    pub fn derivative(&self, f: f64) -> f64 {
        let c = (f / self.scale).cosh();
        self.amplitude / (self.scale * c * c)
    }
}

/// Cosine basis on `[0, L]` with square-summable scales `λ_k = λ_1 k^{-p}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorLoadings {
    length: f64,
    lambda: Vec<f64>,
}

impl FactorLoadings {
    pub fn new(length: f64, n_factors: usize, lambda1: f64, decay_power: f64) -> Result<Self> {
        if n_factors == 0 || !(length > 0.0) || !(lambda1 > 0.0) || !(decay_power > 0.5) {
            return Err(Error::InvalidArgument(format!(
                "loadings need N >= 1, L > 0, λ_1 > 0 and p > 1/2 (got N={n_factors}, L={length}, λ_1={lambda1}, p={decay_power})"
            )));
        }
        let lambda = (1..=n_factors).map(|k| lambda1 * (k as f64).powf(-decay_power)).collect();
        Ok(Self { length, lambda })
    }

    pub fn n_factors(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `ψ_1 = 1/√L`, `ψ_k = √(2/L) cos((k-1)πu/L)`; zero-based `k`.
    pub fn basis(&self, k: usize, u: f64) -> f64 {
        let l = self.length;
        if k == 0 {
            1.0 / l.sqrt()
        } else {
            (2.0 / l).sqrt() * (k as f64 * PI * u / l).cos()
        }
    }

    /// Antiderivative of [`basis`](Self::basis) vanishing at 0.
    pub fn antiderivative(&self, k: usize, u: f64) -> f64 {
        let l = self.length;
        if k == 0 {
            u / l.sqrt()
        } else {
            let w = k as f64 * PI / l;
            (2.0 / l).sqrt() * (w * u).sin() / w
        }
    }
}

/// State-dependent HJM volatility
/// `σ_ik = x_i λ_k ∫_t^{s_i} κ(f_t(u)) ψ_k(u) du`, with step forwards read off the curve.
///
/// When `t` falls strictly inside `(s_j, s_{j+1})`, the stub `[t, s_{j+1})`
/// is driven by the next interval's forward for rows beyond `s_{j+1}`, and by
/// the constant `stub_forward` for the row at `s_{j+1}` itself. Each row then
/// depends on node values inside `[t, s_i]` only.
#[derive(Debug, Clone)]
pub struct LocalHjm {
    grid: Arc<MaturityGrid>,
    kappa: Kappa,
    loadings: FactorLoadings,
    stub_forward: f64,
    /// `Ψ_k(s_j)` at every node, row-major `(nodes × N)`.
    node_antiderivatives: Vec<f64>,
    /// `Ψ_k(s_{j+1}) - Ψ_k(s_j)`, row-major `(intervals × N)`.
    node_increments: Vec<f64>,
    inv_widths: Vec<f64>,
}

struct LocalLayout {
    first: usize,
    j0: usize,
    on_node: bool,
}

impl LocalHjm {
    pub fn new(grid: Arc<MaturityGrid>, kappa: Kappa, loadings: FactorLoadings, stub_forward: f64) -> Result<Self> {
        if !(kappa.scale > 0.0) || !kappa.level.is_finite() || !kappa.amplitude.is_finite() {
            return Err(Error::InvalidArgument(format!("malformed κ {kappa:?}")));
        }
        let n = loadings.n_factors();
        let node_antiderivatives = grid
            .nodes()
            .iter()
            .flat_map(|&s| (0..n).map(move |k| (s, k)))
            .map(|(s, k)| loadings.antiderivative(k, s))
            .collect::<Vec<f64>>();
        let node_increments = node_antiderivatives[n..].iter().zip(&node_antiderivatives).map(|(u, l)| u - l).collect();
        let inv_widths = grid.nodes().windows(2).map(|w| 1.0 / (w[1] - w[0])).collect();
        Ok(Self { grid, kappa, loadings, stub_forward, node_antiderivatives, node_increments, inv_widths })
    }

    /// `N` cosine factors on `[0, s_M]` with `λ_k = λ_1 / k`.
    pub fn with_defaults(grid: Arc<MaturityGrid>, n_factors: usize, kappa: Kappa) -> Result<Self> {
        let loadings = FactorLoadings::new(grid.last(), n_factors, 1.0, 1.0)?;
        Self::new(grid, kappa, loadings, 0.0)
    }

    pub fn kappa(&self) -> Kappa {
        self.kappa
    }

    pub fn loadings(&self) -> &FactorLoadings {
        &self.loadings
    }

    fn layout(&self, t: f64) -> Option<LocalLayout> {
        let first = self.grid.expired_count(t);
        if first >= self.grid.len() {
            return None;
        }
        let j0 = first - 1;
        let on_node = (self.grid.nodes()[j0] - t).abs() <= NODE_TOL;
        Some(LocalLayout { first, j0, on_node })
    }

    /// Stub row `I_{j0,k} = Ψ_k(s_{j0+1}) - Ψ_k(max(t, s_{j0}))`.
    fn stub_integrals(&self, t: f64, j0: usize) -> Vec<f64> {
        let n = self.loadings.n_factors();
        let upper = &self.node_antiderivatives[(j0 + 1) * n..(j0 + 2) * n];
        if t > self.grid.nodes()[j0] {
            upper.iter().enumerate().map(|(k, u)| u - self.loadings.antiderivative(k, t)).collect()
        } else {
            upper.iter().zip(&self.node_antiderivatives[j0 * n..]).map(|(u, l)| u - l).collect()
        }
    }

    /// Row `j` of the interval integrals, using the stub when `j == j0`.
    fn interval<'s>(&'s self, j: usize, lay: &LocalLayout, stub: &'s [f64]) -> &'s [f64] {
        let n = self.loadings.n_factors();
        if j == lay.j0 {
            stub
        } else {
            &self.node_increments[j * n..(j + 1) * n]
        }
    }

    fn forward(&self, x: &[f64], j: usize) -> f64 {
        (x[j] / x[j + 1]).ln() * self.inv_widths[j]
    }

    /// Forward index driving the stub interval of row `i`, `None` for the constant stub.
    fn stub_source(&self, lay: &LocalLayout, i: usize) -> Option<usize> {
        if lay.on_node {
            Some(lay.j0)
        } else if i >= lay.j0 + 2 {
            Some(lay.j0 + 1)
        } else {
            None
        }
    }

    fn kappas(&self, lay: &LocalLayout, x: &[f64]) -> Vec<f64> {
        (0..x.len() - 1)
            .map(|j| if j >= lay.j0 { self.kappa.eval(self.forward(x, j)) } else { 0.0 })
            .collect()
    }

    fn prepare(&self, t: f64, x: &[f64]) -> Result<Option<(LocalLayout, Vec<f64>)>> {
        let Some(lay) = self.layout(t) else { return Ok(None) };
        let from = if lay.on_node { lay.j0 } else { lay.first };
        check_positive(&self.grid, x, from)?;
        let stub = self.stub_integrals(t, lay.j0);
        Ok(Some((lay, stub)))
    }

    /// Writes `λ_k S_k(i)` with `S_k(i) = Σ_j κ(F_j) I_jk` into `out`, scaled by `x_i` when `scaled`.
    fn fill_rows(&self, lay: &LocalLayout, stub: &[f64], x: &[f64], scaled: bool, out: &mut [f64]) {
        let n = self.loadings.n_factors();
        let lambda = self.loadings.lambda();
        let kap = self.kappas(lay, x);
        let const_stub = self.kappa.eval(self.stub_forward);
        let mut run = vec![0.0; n];
        for i in lay.first..x.len() {
            if i >= lay.j0 + 2 {
                let c = kap[i - 1];
                for (r, v) in run.iter_mut().zip(self.interval(i - 1, lay, stub)) {
                    *r += c * v;
                }
            }
            let k_stub = self.stub_source(lay, i).map_or(const_stub, |j| kap[j]);
            let scale = if scaled { x[i] } else { 1.0 };
            let row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                row[k] = scale * lambda[k] * (run[k] + k_stub * stub[k]);
            }
        }
    }

    /// Cotangent of `σ(t, x)` given `σ(t, x)` itself in `sig`.
    fn vjp_with(&self, lay: &LocalLayout, stub: &[f64], x: &[f64], sig: &[f64], g: &[f64], out: &mut [f64]) {
        let m = x.len();
        let n = self.loadings.n_factors();
        let lambda = self.loadings.lambda();
        // suffix[i*n+k] = Σ_{r>=i} g_rk x_r λ_k
        let mut suffix = vec![0.0; (m + 1 - lay.first) * n];
        let base = lay.first;
        for i in (lay.first..m).rev() {
            let r = i - base;
            for k in 0..n {
                suffix[r * n + k] = suffix[(r + 1) * n + k] + g[i * n + k] * x[i] * lambda[k];
            }
        }
        let row = |i: usize| &suffix[(i - base) * n..(i - base + 1) * n];
        let scatter = |j: usize, weight: f64, out: &mut [f64]| {
            let e = self.kappa.derivative(self.forward(x, j)) * weight * self.inv_widths[j];
            out[j] += e / x[j];
            out[j + 1] -= e / x[j + 1];
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
        for j in lay.j0 + 1..m - 1 {
            scatter(j, dot(self.interval(j, lay, stub), row(j + 1)), out);
        }
        let (src, rows_from) = if lay.on_node { (lay.j0, lay.first) } else { (lay.j0 + 1, lay.j0 + 2) };
        if rows_from < m {
            scatter(src, dot(stub, row(rows_from)), out);
        }
        for i in lay.first..m {
            out[i] += dot(&g[i * n..(i + 1) * n], &sig[i * n..(i + 1) * n]) / x[i];
        }
    }
}

impl Volatility for LocalHjm {
    fn grid(&self) -> &Arc<MaturityGrid> {
        &self.grid
    }

    fn n_factors(&self) -> usize {
        self.loadings.n_factors()
    }

    fn proportional(&self) -> bool {
        true
    }

    fn sigma_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        let Some((lay, stub)) = self.prepare(t, x)? else { return Ok(()) };
        self.fill_rows(&lay, &stub, x, true, out);
        Ok(())
    }

    fn sigma_jvp_into(&self, t: f64, x: &[f64], h: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        let Some((lay, stub)) = self.prepare(t, x)? else { return Ok(()) };
        let n = self.loadings.n_factors();
        let lambda = self.loadings.lambda();
        // out holds λ_k S_k(i) until each row is finished
        self.fill_rows(&lay, &stub, x, false, out);
        // dκ(F_j) for the forward of interval j
        let dk: Vec<f64> = (0..x.len() - 1)
            .map(|j| {
                if j < lay.j0 {
                    return 0.0;
                }
                let df = (h[j] / x[j] - h[j + 1] / x[j + 1]) * self.inv_widths[j];
                self.kappa.derivative(self.forward(x, j)) * df
            })
            .collect();
        let mut run = vec![0.0; n];
        for i in lay.first..x.len() {
            if i >= lay.j0 + 2 {
                let d = dk[i - 1];
                for (r, v) in run.iter_mut().zip(self.interval(i - 1, &lay, &stub)) {
                    *r += d * v;
                }
            }
            let d_stub = self.stub_source(&lay, i).map_or(0.0, |j| dk[j]);
            for k in 0..n {
                let ds = run[k] + d_stub * stub[k];
                let ls = out[i * n + k];
                out[i * n + k] = h[i] * ls + x[i] * lambda[k] * ds;
            }
        }
        Ok(())
    }

    fn sigma_vjp_into(&self, t: f64, x: &[f64], g: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        let Some((lay, stub)) = self.prepare(t, x)? else { return Ok(()) };
        let mut sig = vec![0.0; g.len()];
        self.fill_rows(&lay, &stub, x, true, &mut sig);
        self.vjp_with(&lay, &stub, x, &sig, g, out);
        Ok(())
    }

    fn sigma_vjp_given(&self, t: f64, x: &[f64], sig: &[f64], g: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        let Some((lay, stub)) = self.prepare(t, x)? else { return Ok(()) };
        self.vjp_with(&lay, &stub, x, sig, g, out);
        Ok(())
    }
}

/// Serializable description of a catalog model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    GaussianHjm {
        factors: Vec<TauFactor>,
    },
    LocalHjm {
        n_factors: usize,
        #[serde(default = "one")]
        lambda1: f64,
        #[serde(default = "one")]
        decay_power: f64,
        #[serde(default)]
        kappa: Kappa,
        #[serde(default)]
        stub_forward: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn build(&self, grid: Arc<MaturityGrid>) -> Result<VolatilityModel> {
        Ok(match self {
            ModelSpec::GaussianHjm { factors } => {
                VolatilityModel::Gaussian(GaussianHjm::new(grid, factors.clone())?)
            }
            ModelSpec::LocalHjm { n_factors, lambda1, decay_power, kappa, stub_forward } => {
                let loadings = FactorLoadings::new(grid.last(), *n_factors, *lambda1, *decay_power)?;
                VolatilityModel::Local(LocalHjm::new(grid, *kappa, loadings, *stub_forward)?)
            }
        })
    }
}

/// Catalog model dispatch.
#[derive(Debug, Clone)]
pub enum VolatilityModel {
    Gaussian(GaussianHjm),
    Local(LocalHjm),
}

impl VolatilityModel {
    pub fn kind(&self) -> &'static str {
        match self {
            VolatilityModel::Gaussian(_) => "gaussian_hjm",
            VolatilityModel::Local(_) => "local_hjm",
        }
    }

    fn inner(&self) -> &dyn Volatility {
        match self {
            VolatilityModel::Gaussian(m) => m,
            VolatilityModel::Local(m) => m,
        }
    }
}

impl Volatility for VolatilityModel {
    fn grid(&self) -> &Arc<MaturityGrid> {
        self.inner().grid()
    }

    fn n_factors(&self) -> usize {
        self.inner().n_factors()
    }

    fn proportional(&self) -> bool {
        self.inner().proportional()
    }

    fn sigma_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.inner().sigma_into(t, x, out)
    }

    fn sigma_jvp_into(&self, t: f64, x: &[f64], h: &[f64], out: &mut [f64]) -> Result<()> {
        self.inner().sigma_jvp_into(t, x, h, out)
    }

    fn sigma_vjp_into(&self, t: f64, x: &[f64], g: &[f64], out: &mut [f64]) -> Result<()> {
        self.inner().sigma_vjp_into(t, x, g, out)
    }

    fn sigma_vjp_given(&self, t: f64, x: &[f64], sig: &[f64], g: &[f64], out: &mut [f64]) -> Result<()> {
        self.inner().sigma_vjp_given(t, x, sig, g, out)
    }
}
