use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{MaturityGrid, NODE_TOL};
use crate::{Error, Result};

/// How forward rates are read between nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ForwardInterpolation {
    /// `f(u) = f(s_i)` on `[s_i, s_{i+1})`; the representation produced by
    /// [`forwards_from_bonds`].
    #[default]
    Step,
    /// Linear between nodes, integrated with the trapezoid rule.
    Linear,
}

/// Instantaneous forward rates `f_t(s_i)` (per year), flat beyond the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCurve {
    grid: Arc<MaturityGrid>,
    values: Vec<f64>,
    as_of: f64,
    interpolation: ForwardInterpolation,
    // ∫_0^{s_i} f, one entry per node
    cumulative: Vec<f64>,
}

impl ForwardCurve {
    pub fn new(
        grid: Arc<MaturityGrid>,
        values: Vec<f64>,
        as_of: f64,
        interpolation: ForwardInterpolation,
    ) -> Result<Self> {
        check_len(&grid, &values)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forward curve"));
        }
        let nodes = grid.nodes();
        let mut cumulative = vec![0.0; nodes.len()];
        for i in 1..nodes.len() {
            let d = nodes[i] - nodes[i - 1];
            let piece = match interpolation {
                ForwardInterpolation::Step => values[i - 1] * d,
                ForwardInterpolation::Linear => 0.5 * (values[i - 1] + values[i]) * d,
            };
            cumulative[i] = cumulative[i - 1] + piece;
        }
        Ok(Self { grid, values, as_of, interpolation, cumulative })
    }

    pub fn flat(grid: Arc<MaturityGrid>, rate: f64, as_of: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![rate; n], as_of, ForwardInterpolation::Step)
    }

    pub fn grid(&self) -> &Arc<MaturityGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn as_of(&self) -> f64 {
        self.as_of
    }

    pub fn interpolation(&self) -> ForwardInterpolation {
        self.interpolation
    }

    pub fn value_at(&self, u: f64) -> f64 {
        let nodes = self.grid.nodes();
        let last = nodes.len() - 1;
        if u >= nodes[last] {
            return self.values[last];
        }
        let j = self.grid.last_node_at_or_before(u.max(0.0)).min(last - 1);
        match self.interpolation {
            ForwardInterpolation::Step => self.values[j],
            ForwardInterpolation::Linear => {
                let w = (u - nodes[j]) / (nodes[j + 1] - nodes[j]);
                self.values[j] + w * (self.values[j + 1] - self.values[j])
            }
        }
    }

    fn antiderivative(&self, u: f64) -> f64 {
        let nodes = self.grid.nodes();
        let last = nodes.len() - 1;
        let u = u.max(0.0);
        if u >= nodes[last] {
            return self.cumulative[last] + self.values[last] * (u - nodes[last]);
        }
        let j = self.grid.last_node_at_or_before(u).min(last - 1);
        let h = u - nodes[j];
        let piece = match self.interpolation {
            ForwardInterpolation::Step => self.values[j] * h,
            ForwardInterpolation::Linear => {
                let slope = (self.values[j + 1] - self.values[j]) / (nodes[j + 1] - nodes[j]);
                self.values[j] * h + 0.5 * slope * h * h
            }
        };
        self.cumulative[j] + piece
    }

    /// `∫_a^b f(u) du` (signed).
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }
}

/// Zero-coupon bond prices `P_t(s_i)` seen at `as_of`.
#[derive(Debug, Clone, PartialEq)]
pub struct BondCurve {
    grid: Arc<MaturityGrid>,
    values: Vec<f64>,
    as_of: f64,
}

impl BondCurve {
    pub fn new(grid: Arc<MaturityGrid>, values: Vec<f64>, as_of: f64) -> Result<Self> {
        check_len(&grid, &values)?;
        Ok(Self { grid, values, as_of })
    }

    pub fn grid(&self) -> &Arc<MaturityGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn as_of(&self) -> f64 {
        self.as_of
    }

    /// Log-linear interpolation between nodes.
    pub fn value_at(&self, s: f64) -> Result<f64> {
        log_linear(&self.grid, &self.values, s)
    }
}

/// Discounted bond prices `P̃_t(s_i) = P_t(s_i) / B_t`, the simulation state.
///
/// Values at expired nodes `s_i <= t` hold `1 / B_{s_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedCurve {
    grid: Arc<MaturityGrid>,
    values: Vec<f64>,
    as_of: f64,
}

impl DiscountedCurve {
    pub fn new(grid: Arc<MaturityGrid>, values: Vec<f64>, as_of: f64) -> Result<Self> {
        check_len(&grid, &values)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("discounted curve"));
        }
        Ok(Self { grid, values, as_of })
    }

    /// Time-0 state implied by an initial forward curve (`B_0 = 1`).
    pub fn initial(f0: &ForwardCurve) -> Result<Self> {
        let p = bonds_from_forwards(f0, 0.0)?;
        Self::new(f0.grid.clone(), p.values, 0.0)
    }

    pub fn grid(&self) -> &Arc<MaturityGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn as_of(&self) -> f64 {
        self.as_of
    }

    /// Log-linear interpolation between nodes.
    pub fn value_at(&self, s: f64) -> Result<f64> {
        log_linear(&self.grid, &self.values, s)
    }

    /// Step forward rates of the curve: `-(ln x_{i+1} - ln x_i) / Δ_i`.
    pub fn forwards(&self) -> Result<ForwardCurve> {
        let p = BondCurve::new(self.grid.clone(), self.values.clone(), self.as_of)?;
        forwards_from_bonds(&p)
    }
}

fn check_len(grid: &MaturityGrid, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::InvalidArgument(format!(
            "curve has {} values for {} grid nodes",
            values.len(),
            grid.len()
        )));
    }
    Ok(())
}

fn log_linear(grid: &MaturityGrid, values: &[f64], s: f64) -> Result<f64> {
    grid.check_time(s)?;
    if let Some(i) = grid.index_of(s) {
        return Ok(values[i]);
    }
    let nodes = grid.nodes();
    let j = grid.last_node_at_or_before(s);
    let (a, b) = (values[j], values[j + 1]);
    if a <= 0.0 || b <= 0.0 {
        let (m, v) = if a <= 0.0 { (nodes[j], a) } else { (nodes[j + 1], b) };
        return Err(Error::NonPositive { maturity: m, value: v });
    }
    let w = (s - nodes[j]) / (nodes[j + 1] - nodes[j]);
    Ok((a.ln() * (1.0 - w) + b.ln() * w).exp())
}

/// `P_t(s) = exp(-∫_t^s f_t(u) du)` at every node.
///
/// Nodes before `t` receive the signed integral, i.e. the roll-up factor of
/// the same forward curve.
pub fn bonds_from_forwards(f: &ForwardCurve, t: f64) -> Result<BondCurve> {
    f.grid.check_time(t)?;
    let values = f.grid.nodes().iter().map(|&s| (-f.integrate(t, s)).exp()).collect();
    BondCurve::new(f.grid.clone(), values, t)
}

/// Forward-difference forward rates of a bond curve; the last node repeats
/// the final interval's rate.
pub fn forwards_from_bonds(p: &BondCurve) -> Result<ForwardCurve> {
    let nodes = p.grid.nodes();
    if let Some((i, &v)) = p.values.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositive { maturity: nodes[i], value: v });
    }
    let mut values: Vec<f64> = (0..nodes.len() - 1)
        .map(|i| -(p.values[i + 1].ln() - p.values[i].ln()) / (nodes[i + 1] - nodes[i]))
        .collect();
    values.push(values[values.len() - 1]);
    ForwardCurve::new(p.grid.clone(), values, p.as_of, ForwardInterpolation::Step)
}

/// Yield `y_t(T) = (T - t)^{-1} ∫_t^T f_t(s) ds`.
pub fn yield_curve(f: &ForwardCurve, t: f64, maturity: f64) -> Result<f64> {
    if !(maturity > t + NODE_TOL) {
        return Err(Error::InvalidArgument(format!("yield maturity {maturity} must exceed t = {t}")));
    }
    Ok(f.integrate(t, maturity) / (maturity - t))
}

/// Recovers `B_t = 1 / P̃_t(t)` and the bond curve `P_t = P̃_t / P̃_t(t)`.
///
/// On expired nodes the same ratio gives `B_t / B_s`, the value of a matured
/// bond whose payment was rolled into the bank account.
pub fn split_numeraire(pt: &DiscountedCurve) -> Result<(f64, BondCurve)> {
    let p_tt = pt.value_at(pt.as_of)?;
    if !(p_tt > 0.0) {
        return Err(Error::NonPositive { maturity: pt.as_of, value: p_tt });
    }
    let values = pt.values.iter().map(|v| v / p_tt).collect();
    Ok((1.0 / p_tt, BondCurve::new(pt.grid.clone(), values, pt.as_of)?))
}
