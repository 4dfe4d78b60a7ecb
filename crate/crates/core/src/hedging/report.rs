use std::io::Write;

use serde::Serialize;

use super::support::SupportVerdict;
use crate::stats::{rms, std_dev, Estimate};
use crate::Result;

/// One atom of a hedge at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightRow {
    pub t: f64,
    pub maturity: f64,
    pub weight: f64,
    pub stderr: f64,
}

/// Holdings at one rebalance time of the reported path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HedgeStep {
    pub t: f64,
    /// Pre-hedge atoms (non-zero weights only).
    pub phi: Vec<WeightRow>,
    /// Cash in the bond maturing at `t` completing `phi` to the wealth.
    pub cash: f64,
    /// Discounted wealth `Ṽ_t`.
    pub wealth: f64,
}

/// Terminal replication error `ξ̃ - Ṽ_T` over the outer paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorStats {
    pub n_paths: usize,
    pub mean_error: f64,
    pub rms_error: f64,
    pub payout_std: f64,
    /// `rms_error / payout_std`.
    pub relative_rms: f64,
}

impl ErrorStats {
    pub fn new(errors: &[f64], payouts: &[f64]) -> Self {
        let rms_error = rms(errors);
        let payout_std = std_dev(payouts);
        let relative_rms = if payout_std > 0.0 {
            rms_error / payout_std
        } else if rms_error == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            n_paths: errors.len(),
            mean_error: Estimate::from_samples(errors).mean,
            rms_error,
            payout_std,
            relative_rms,
        }
    }
}

/// Result of a hedging backtest.
#[derive(Debug, Clone, Serialize)]
pub struct HedgeReport {
    pub method: String,
    /// Initial wealth `V_0`.
    pub v0: f64,
    /// Monte Carlo `E{ξ̃}` from the outer paths.
    pub payout_mean: Estimate,
    pub closed_form_price: Option<f64>,
    /// Holdings along the first outer path.
    pub schedule: Vec<HedgeStep>,
    pub error: ErrorStats,
    pub support: SupportVerdict,
    /// Largest pre-hedge dual norm seen and the bound it must respect.
    pub max_dual_norm: f64,
    pub dual_norm_bound: Option<f64>,
    /// Pre-hedges whose error exceeded the requested tolerance.
    pub flagged_prehedges: usize,
    pub cost_estimate: f64,
}

impl HedgeReport {
    pub fn weight_rows(&self) -> impl Iterator<Item = &WeightRow> {
        self.schedule.iter().flat_map(|s| s.phi.iter())
    }

    /// Writes `t,maturity,weight,stderr` with a header row.
    pub fn write_weights_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.weight_rows() {
            w.serialize(row).map_err(|e| crate::Error::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| crate::Error::Io(e.to_string()))?;
        Ok(())
    }
}
