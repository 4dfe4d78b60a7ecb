use std::sync::Arc;

use serde::Serialize;

use super::grid::MaturityGrid;
use super::norm::dual_norm;
use crate::{Error, Result};

/// One point mass `weight · δ_maturity` of a bond portfolio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub node: usize,
    pub maturity: f64,
    pub weight: f64,
}

/// Atomic measure `Σ c_i δ_{s_i}` on grid maturities: holdings of zero-coupon bonds.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioMeasure {
    grid: Arc<MaturityGrid>,
    atoms: Vec<Atom>,
}

impl PortfolioMeasure {
    /// Builds from `(maturity, weight)` pairs; repeated maturities are merged.
    pub fn new(grid: Arc<MaturityGrid>, holdings: &[(f64, f64)]) -> Result<Self> {
        let mut dense = vec![0.0; grid.len()];
        let mut used = vec![false; grid.len()];
        for &(s, c) in holdings {
            let i = grid.node_index(s)?;
            if !c.is_finite() {
                return Err(Error::NonFinite("portfolio weight"));
            }
            dense[i] += c;
            used[i] = true;
        }
        let atoms = (0..grid.len())
            .filter(|&i| used[i])
            .map(|i| Atom { node: i, maturity: grid.nodes()[i], weight: dense[i] })
            .collect();
        Ok(Self { grid, atoms })
    }

    pub fn empty(grid: Arc<MaturityGrid>) -> Self {
        Self { grid, atoms: Vec::new() }
    }

    /// One atom per node, zeros dropped.
    pub fn from_dense(grid: Arc<MaturityGrid>, weights: &[f64]) -> Self {
        assert_eq!(weights.len(), grid.len());
        let atoms = weights
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, &c)| Atom { node: i, maturity: grid.nodes()[i], weight: c })
            .collect();
        Self { grid, atoms }
    }

    pub fn grid(&self) -> &Arc<MaturityGrid> {
        &self.grid
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.grid.len()];
        for a in &self.atoms {
            d[a.node] += a.weight;
        }
        d
    }

    /// `[min s_i, max s_i]` over atoms with nonzero weight.
    pub fn support_interval(&self) -> Option<(f64, f64)> {
        let mut live = self.atoms.iter().filter(|a| a.weight != 0.0).map(|a| a.maturity);
        let first = live.next()?;
        Some(live.fold((first, first), |(lo, hi), s| (lo.min(s), hi.max(s))))
    }

    /// Norm in the dual of discrete `F1v`.
    pub fn dual_norm(&self) -> f64 {
        dual_norm(&self.grid, &self.dense())
    }
}

/// `⟨φ, x⟩ = Σ c_i x(s_i)`.
pub fn pair(phi: &PortfolioMeasure, x: &[f64]) -> Result<f64> {
    if x.len() != phi.grid.len() {
        return Err(Error::InvalidArgument(format!(
            "curve has {} values for {} nodes",
            x.len(),
            phi.grid.len()
        )));
    }
    Ok(phi.atoms.iter().map(|a| a.weight * x[a.node]).sum())
}
