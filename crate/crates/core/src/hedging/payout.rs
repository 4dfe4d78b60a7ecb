use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curvespace::{sobolev_norm, CurveSpace, MaturityGrid, PortfolioMeasure};
use crate::malliavin::CurveFunction;
use crate::rng::stream;
use crate::{Error, Result};

/// Payoff `g` as a function of the bond prices `r_i = P_T(T_i)` at expiry.
pub trait RatioPayoff: Send + Sync {
    fn value(&self, r: &[f64]) -> f64;
    /// A (sub)gradient of `g`; `None` if `g` has no declared subgradient.
    fn gradient(&self, r: &[f64]) -> Option<Vec<f64>>;
}

/// `(Σ w_i r_i - K)⁺`, with the right-continuous subgradient at the kink.
#[derive(Debug, Clone, PartialEq)]
pub struct BasketCall {
    pub weights: Vec<f64>,
    pub strike: f64,
}

impl RatioPayoff for BasketCall {
    fn value(&self, r: &[f64]) -> f64 {
        (dot(&self.weights, r) - self.strike).max(0.0)
    }

    fn gradient(&self, r: &[f64]) -> Option<Vec<f64>> {
        let on = if dot(&self.weights, r) > self.strike { 1.0 } else { 0.0 };
        Some(self.weights.iter().map(|w| on * w).collect())
    }
}

/// Softplus basket `ε ln(1 + e^{(Σ w_i r_i - K)/ε})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothBasket {
    pub weights: Vec<f64>,
    pub strike: f64,
    pub smoothing: f64,
}

impl RatioPayoff for SmoothBasket {
    fn value(&self, r: &[f64]) -> f64 {
        let z = (dot(&self.weights, r) - self.strike) / self.smoothing;
        self.smoothing * softplus(z)
    }

    fn gradient(&self, r: &[f64]) -> Option<Vec<f64>> {
        let z = (dot(&self.weights, r) - self.strike) / self.smoothing;
        let s = 1.0 / (1.0 + (-z).exp());
        Some(self.weights.iter().map(|w| s * w).collect())
    }
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp()
    } else {
        z.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// Serializable payout description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoutSpec {
    /// Call on the `underlying`-maturity bond struck at `strike`, expiring at `expiry`.
    ZcbCall {
        expiry: f64,
        underlying: f64,
        strike: f64,
        #[serde(default)]
        arrears: f64,
    },
    /// Basket of bond prices; `smoothing > 0` selects the softplus payoff.
    Basket {
        expiry: f64,
        maturities: Vec<f64>,
        weights: Vec<f64>,
        strike: f64,
        #[serde(default)]
        smoothing: f64,
        #[serde(default)]
        arrears: f64,
    },
}

impl PayoutSpec {
    pub fn build(&self, grid: Arc<MaturityGrid>) -> Result<Payout> {
        match self {
            PayoutSpec::ZcbCall { expiry, underlying, strike, arrears } => Payout::new(
                grid,
                *expiry,
                vec![*underlying],
                *arrears,
                Arc::new(BasketCall { weights: vec![1.0], strike: *strike }),
                1.0 + strike.abs(),
                Some(*strike),
            ),
            PayoutSpec::Basket { expiry, maturities, weights, strike, smoothing, arrears } => {
                if weights.len() != maturities.len() {
                    return Err(Error::InvalidArgument("basket weights and maturities differ in length".into()));
                }
                let wsum: f64 = weights.iter().map(|w| w.abs()).sum();
                let (g, c1): (Arc<dyn RatioPayoff>, f64) = if *smoothing > 0.0 {
                    (
                        Arc::new(SmoothBasket { weights: weights.clone(), strike: *strike, smoothing: *smoothing }),
                        wsum + strike.abs() + smoothing * std::f64::consts::LN_2,
                    )
                } else {
                    (Arc::new(BasketCall { weights: weights.clone(), strike: *strike }), wsum + strike.abs())
                };
                Payout::new(grid, *expiry, maturities.clone(), *arrears, g, c1, None)
            }
        }
    }
}

/// Instruction to hold the arrears payment in the settlement bond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Carry {
    pub bond_maturity: f64,
    pub from: f64,
    pub to: f64,
    pub units: f64,
}

impl Carry {
    /// Discounted value of the carried position on a curve.
    pub fn value(&self, grid: &MaturityGrid, x: &[f64]) -> Result<f64> {
        Ok(self.units * x[grid.node_index(self.bond_maturity)?])
    }
}

/// European claim `ξ = g(P_T(T_1), …, P_T(T_n))`, paid at `T` or in arrears at `T + ΔT`.
#[derive(Clone)]
pub struct Payout {
    grid: Arc<MaturityGrid>,
    expiry: f64,
    expiry_node: usize,
    maturities: Vec<f64>,
    nodes: Vec<usize>,
    arrears: f64,
    settle_node: usize,
    g: Arc<dyn RatioPayoff>,
    c1: f64,
    call_strike: Option<f64>,
}

impl fmt::Debug for Payout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Payout")
            .field("expiry", &self.expiry)
            .field("maturities", &self.maturities)
            .field("arrears", &self.arrears)
            .field("lipschitz_factor", &self.c1)
            .finish()
    }
}

impl Payout {
    /// `lipschitz_factor` is the bound on `|∂g̃/∂x(s)|` summed over maturities;
    /// the declared Lipschitz constant is that times `√C_v`.
    pub fn new(
        grid: Arc<MaturityGrid>,
        expiry: f64,
        maturities: Vec<f64>,
        arrears: f64,
        g: Arc<dyn RatioPayoff>,
        lipschitz_factor: f64,
        call_strike: Option<f64>,
    ) -> Result<Self> {
        if maturities.is_empty() {
            return Err(Error::InvalidArgument("payout needs at least one underlying".into()));
        }
        let expiry_node = grid.node_index(expiry)?;
        if !(expiry > 0.0) {
            return Err(Error::InvalidArgument("payout expiry must be positive".into()));
        }
        if maturities.windows(2).any(|w| w[1] < w[0]) || maturities[0] <= expiry {
            return Err(Error::InvalidArgument(format!(
                "underlyings must satisfy T < T_1 <= … (T = {expiry}, maturities {maturities:?})"
            )));
        }
        let nodes = maturities.iter().map(|&s| grid.node_index(s)).collect::<Result<Vec<_>>>()?;
        if !(arrears >= 0.0) {
            return Err(Error::InvalidArgument("arrears offset must be non-negative".into()));
        }
        let settle_node = grid.node_index(expiry + arrears)?;
        Ok(Self {
            grid,
            expiry,
            expiry_node,
            maturities,
            nodes,
            arrears,
            settle_node,
            g,
            c1: lipschitz_factor,
            call_strike,
        })
    }

    pub fn zcb_call(grid: Arc<MaturityGrid>, expiry: f64, underlying: f64, strike: f64) -> Result<Self> {
        PayoutSpec::ZcbCall { expiry, underlying, strike, arrears: 0.0 }.build(grid)
    }

    pub fn grid(&self) -> &Arc<MaturityGrid> {
        &self.grid
    }

    pub fn expiry(&self) -> f64 {
        self.expiry
    }

    pub fn maturities(&self) -> &[f64] {
        &self.maturities
    }

    pub fn arrears(&self) -> f64 {
        self.arrears
    }

    /// `T′ = max T_i`.
    pub fn longest_underlying(&self) -> f64 {
        self.maturities[self.maturities.len() - 1]
    }

    /// Right end of the maturity range a hedge may use: `max(T′, T + ΔT)`.
    pub fn support_horizon(&self) -> f64 {
        self.longest_underlying().max(self.expiry + self.arrears)
    }

    /// `(underlying, strike)` when this is a single-bond call without arrears.
    pub fn as_zcb_call(&self) -> Option<(f64, f64)> {
        match (self.call_strike, self.maturities.as_slice()) {
            (Some(k), [t1]) if self.arrears == 0.0 => Some((*t1, k)),
            _ => None,
        }
    }

    /// Declared Lipschitz constant `C_1` of `g̃` on `F1v`.
    pub fn lipschitz_constant(&self) -> f64 {
        self.c1 * self.grid.constants().c_v.sqrt()
    }

    fn ratios(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let xt = x[self.expiry_node];
        if !(xt > 0.0) {
            return Err(Error::NonPositive { maturity: self.expiry, value: xt });
        }
        Ok((xt, self.nodes.iter().map(|&i| x[i] / xt).collect()))
    }

    /// `g̃(x) = x(T) g(x(T_1)/x(T), …)`.
    pub fn modified_payout(&self, x: &[f64]) -> Result<f64> {
        let (xt, r) = self.ratios(x)?;
        Ok(xt * self.g.value(&r))
    }

    /// `ĝ(x) = x(T+ΔT) g(x(T_1)/x(T), …)` with the carry of `ξ` units of the settlement bond.
    pub fn arrears_payout(&self, x: &[f64]) -> Result<(f64, Carry)> {
        let (_, r) = self.ratios(x)?;
        let units = self.g.value(&r);
        let carry = Carry {
            bond_maturity: self.expiry + self.arrears,
            from: self.expiry,
            to: self.expiry + self.arrears,
            units,
        };
        Ok((x[self.settle_node] * units, carry))
    }

    /// The functional a hedge replicates: `ĝ` (equal to `g̃` when `ΔT = 0`).
    pub fn hedged_value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.arrears_payout(x)?.0)
    }

    /// Dense subgradient of the hedged functional.
    pub fn gradient_dense(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (xt, r) = self.ratios(x)?;
        let dg = self
            .g
            .gradient(&r)
            .ok_or_else(|| Error::InvalidArgument("payoff has no declared subgradient".into()))?;
        let settle = x[self.settle_node];
        let scale = settle / xt;
        let mut out = vec![0.0; x.len()];
        for (&i, d) in self.nodes.iter().zip(&dg) {
            out[i] += scale * d;
        }
        out[self.expiry_node] -= scale * dot(&dg, &r);
        out[self.settle_node] += self.g.value(&r);
        Ok(out)
    }

    /// `∇ĝ(x)` as a portfolio measure.
    pub fn payout_subgradient(&self, x: &[f64]) -> Result<PortfolioMeasure> {
        let d = self.gradient_dense(x)?;
        let mut holdings: Vec<(f64, f64)> = self.maturities.iter().map(|&s| (s, 0.0)).collect();
        holdings.push((self.expiry, 0.0));
        holdings.push((self.expiry + self.arrears, 0.0));
        for h in &mut holdings {
            h.1 = d[self.grid.node_index(h.0)?];
        }
        holdings.sort_by(|a, b| a.0.total_cmp(&b.0));
        holdings.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12);
        PortfolioMeasure::new(self.grid.clone(), &holdings)
    }

    /// Largest `|g̃(x) - g̃(y)| / ‖x - y‖_F1v` over random curve pairs around `x`;
    /// fails if it exceeds the declared constant.
    pub fn validate_lipschitz(&self, x: &[f64], pairs: usize, seed: u64) -> Result<f64> {
        let mut rng = stream(&[seed, 0x119]);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let a: Vec<f64> = x.iter().map(|v| v * (1.0 + 0.05 * rng.gen_range(-1.0..1.0))).collect();
            let b: Vec<f64> = x.iter().map(|v| v * (1.0 + 0.05 * rng.gen_range(-1.0..1.0))).collect();
            let d: Vec<f64> = a.iter().zip(&b).map(|(a, b)| a - b).collect();
            let n = sobolev_norm(&self.grid, &d, CurveSpace::F1v)?;
            if n > 0.0 {
                worst = worst.max((self.hedged_value(&a)? - self.hedged_value(&b)?).abs() / n);
            }
        }
        if worst > self.lipschitz_constant() * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "sampled Lipschitz ratio {worst} exceeds the declared constant {}",
                self.lipschitz_constant()
            )));
        }
        Ok(worst)
    }
}

impl CurveFunction for Payout {
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.hedged_value(x)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.gradient_dense(x)
    }
}
