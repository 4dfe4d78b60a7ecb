use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::quadrature::integrate_to_infinity;
use crate::{Error, Result};

/// Tolerance used when matching a time or maturity to a grid node.
pub const NODE_TOL: f64 = 1e-9;

/// Weight `s ↦ (1 + s)^power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerWeight {
    pub power: f64,
}

impl PowerWeight {
    pub const fn new(power: f64) -> Self {
        Self { power }
    }

    pub fn eval(&self, s: f64) -> f64 {
        (1.0 + s).powf(self.power)
    }
}

/// The three integrability constants of a weight pair.
///
/// `c_v = ∫ 1/v`, `c_w = ∫ (1+u²)/w` and `c_vw = ∫∫_{u<s} v(u)/w(s)`, all over
/// the half line. They bound point evaluation on `F1v`, point evaluation and
/// differentiation on `F2w`, and the embedding `F2w ⊂ F1v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConstants {
    pub c_v: f64,
    pub c_w: f64,
    pub c_vw: f64,
}

pub fn weight_constants(v: PowerWeight, w: PowerWeight) -> Result<WeightConstants> {
    // The nested integral costs milliseconds; grids are built often with the same weights.
    static CACHE: Mutex<Vec<((u64, u64), Result<WeightConstants>)>> = Mutex::new(Vec::new());
    let key = (v.power.to_bits(), w.power.to_bits());
    let mut cache = CACHE.lock().unwrap_or_else(|e| e.into_inner());
    if let Some((_, hit)) = cache.iter().find(|(k, _)| *k == key) {
        return hit.clone();
    }
    let computed = compute_constants(v, w);
    cache.push((key, computed.clone()));
    computed
}

fn compute_constants(v: PowerWeight, w: PowerWeight) -> Result<WeightConstants> {
    let c_v = integrate_to_infinity(0.0, "C_v", |s| 1.0 / v.eval(s))?;
    let c_w = integrate_to_infinity(0.0, "C_w", |u| (1.0 + u * u) / w.eval(u))?;
    // Swap the order: ∫_0^∞ v(s) ∫_s^∞ 1/w(u) du ds.
    let mut inner_err = None;
    let c_vw = integrate_to_infinity(0.0, "C_vw", |s| {
        match integrate_to_infinity(s, "C_vw", |u| 1.0 / w.eval(u)) {
            Ok(tail) => v.eval(s) * tail,
            Err(e) => {
                inner_err = Some(e);
                f64::NAN
            }
        }
    });
    if let Some(e) = inner_err {
        return Err(e);
    }
    Ok(WeightConstants { c_v, c_w, c_vw: c_vw? })
}

/// Discrete maturity axis with its Sobolev weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaturityGrid {
    nodes: Vec<f64>,
    weight_v: PowerWeight,
    weight_w: PowerWeight,
    ghost_tail: f64,
    constants: WeightConstants,
}

impl MaturityGrid {
    pub const DEFAULT_V: PowerWeight = PowerWeight::new(2.0);
    pub const DEFAULT_W: PowerWeight = PowerWeight::new(5.0);
    pub const DEFAULT_TAIL: f64 = 10.0;

    pub fn new(
        nodes: Vec<f64>,
        weight_v: PowerWeight,
        weight_w: PowerWeight,
        ghost_tail: f64,
    ) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes, got {}", nodes.len())));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidGrid("first node must be 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidGrid("nodes must be finite and strictly increasing".into()));
        }
        if !(ghost_tail > 0.0 && ghost_tail.is_finite()) {
            return Err(Error::InvalidGrid("ghost tail must be positive".into()));
        }
        let constants = weight_constants(weight_v, weight_w)?;
        Ok(Self { nodes, weight_v, weight_w, ghost_tail, constants })
    }

    /// Grid with the default weights `v = (1+s)²`, `w = (1+s)⁵` and a 10y ghost tail.
    pub fn with_default_weights(nodes: Vec<f64>) -> Result<Self> {
        Self::new(nodes, Self::DEFAULT_V, Self::DEFAULT_W, Self::DEFAULT_TAIL)
    }

    /// `intervals` equal intervals on `[0, s_max]` with default weights.
    pub fn uniform(s_max: f64, intervals: usize) -> Result<Self> {
        Self::with_default_weights(uniform_nodes(s_max, intervals))
    }

    /// Same weights, every interval split into `factor` equal pieces.
    pub fn refine(&self, factor: usize) -> Self {
        let mut nodes = Vec::with_capacity((self.nodes.len() - 1) * factor + 1);
        for w in self.nodes.windows(2) {
            for k in 0..factor {
                nodes.push(w[0] + (w[1] - w[0]) * k as f64 / factor as f64);
            }
        }
        nodes.push(self.last());
        Self { nodes, ..self.clone() }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of nodes, `M + 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn last(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn ghost(&self) -> f64 {
        self.last() + self.ghost_tail
    }

    pub fn ghost_tail(&self) -> f64 {
        self.ghost_tail
    }

    pub fn weight_v(&self) -> PowerWeight {
        self.weight_v
    }

    pub fn weight_w(&self) -> PowerWeight {
        self.weight_w
    }

    pub fn constants(&self) -> WeightConstants {
        self.constants
    }

    /// Interval lengths of the extended grid; the last one is the ghost tail.
    pub fn extended_spacing(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.nodes.windows(2).map(|w| w[1] - w[0]).collect();
        d.push(self.ghost_tail);
        d
    }

    /// Nodes followed by the ghost node.
    pub fn extended_nodes(&self) -> Vec<f64> {
        let mut n = self.nodes.clone();
        n.push(self.ghost());
        n
    }

    pub fn index_of(&self, s: f64) -> Option<usize> {
        let i = self.nodes.partition_point(|&x| x < s - NODE_TOL);
        (i < self.nodes.len() && (self.nodes[i] - s).abs() <= NODE_TOL).then_some(i)
    }

    pub fn node_index(&self, s: f64) -> Result<usize> {
        self.index_of(s).ok_or(Error::OffGrid(s))
    }

    /// Index of the last node `s_j <= t` (up to [`NODE_TOL`]).
    pub fn last_node_at_or_before(&self, t: f64) -> usize {
        self.nodes.partition_point(|&x| x <= t + NODE_TOL).saturating_sub(1)
    }

    /// Number of nodes with `s_i <= t`; rows below this index are expired.
    pub fn expired_count(&self, t: f64) -> usize {
        self.nodes.partition_point(|&x| x <= t + NODE_TOL)
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if t < -NODE_TOL || t > self.last() + NODE_TOL || !t.is_finite() {
            return Err(Error::TimeOutOfRange { t, max: self.last() });
        }
        Ok(())
    }
}

pub(crate) fn uniform_nodes(s_max: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|i| s_max * i as f64 / intervals as f64).collect()
}
