use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use termhedge::curvespace::{DiscountedCurve, ForwardCurve, ForwardInterpolation, MaturityGrid, PowerWeight};
use termhedge::dynamics::{ModelSpec, TimeGrid, VolatilityModel};
use termhedge::hedging::{Payout, PayoutSpec};

use crate::CliError;

/// A complete experiment description. Times are in years, rates per year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub grid: GridSpec,
    #[serde(default)]
    pub weights: WeightSpec,
    pub curve: CurveSpec,
    pub model: ModelSpec,
    pub payout: PayoutSpec,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub hedge: HedgeSpec,
    #[serde(default)]
    pub seed: u64,
}

/// Either explicit nodes or `intervals` equal pieces of `[0, s_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub v_power: f64,
    pub w_power: f64,
    /// Distance from the last node to the ghost zero, in years.
    pub ghost_tail: f64,
}

impl Default for WeightSpec {
    fn default() -> Self {
        Self {
            v_power: MaturityGrid::DEFAULT_V.power,
            w_power: MaturityGrid::DEFAULT_W.power,
            ghost_tail: MaturityGrid::DEFAULT_TAIL,
        }
    }
}

/// One `(maturity, value)` row of an embedded curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvePoint {
    pub maturity: f64,
    pub value: f64,
}

/// Initial forward curve: flat, or one forward rate per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flat_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forwards: Option<Vec<CurvePoint>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSpec {
    pub n_outer: usize,
    pub n_inner: usize,
    /// Simulation steps up to the payout expiry; `dt` is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    pub dt: f64,
    pub rebalance_every: usize,
    pub substeps: usize,
    pub price_paths: usize,
    pub cost_cap: f64,
}

impl Default for McSpec {
    fn default() -> Self {
        Self {
            n_outer: 256,
            n_inner: 512,
            steps: None,
            dt: 1.0 / 250.0,
            rebalance_every: 1,
            substeps: 1,
            price_paths: 4096,
            cost_cap: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HedgeMethod {
    #[default]
    ClarkOcone,
    FiniteFactor,
}

/// How Clark–Ocone weights are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    /// Closed form when the model and payout admit one, nested simulation otherwise.
    #[default]
    Auto,
    ClosedForm,
    Nested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct HedgeSpec {
    pub method: HedgeMethod,
    pub weights: WeightSource,
    /// Hedge bonds of the finite-factor method.
    pub hedge_maturities: Vec<f64>,
}

/// Everything a command needs, built and validated from a [`Scenario`].
pub struct Resolved {
    pub grid: Arc<MaturityGrid>,
    pub x0: DiscountedCurve,
    pub model: VolatilityModel,
    pub payout: Payout,
    pub time: TimeGrid,
}

impl Scenario {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        let mut doc: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        serde_json::from_value(doc).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }

    /// Canonical JSON: keys sorted, no whitespace.
    pub fn canonical(&self) -> String {
        let v = serde_json::to_value(self).expect("scenario serializes");
        serde_json::to_string(&v).expect("value serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let nodes = match (&self.grid.nodes, self.grid.s_max, self.grid.intervals) {
            (Some(n), None, None) => n.clone(),
            (None, Some(s), Some(k)) if k > 0 => (0..=k).map(|i| s * i as f64 / k as f64).collect(),
            _ => {
                return Err(CliError::Precondition(
                    "grid needs either `nodes` or both `s_max` and a positive `intervals`".into(),
                ))
            }
        };
        let w = self.weights;
        let grid = Arc::new(MaturityGrid::new(
            nodes,
            PowerWeight::new(w.v_power),
            PowerWeight::new(w.w_power),
            w.ghost_tail,
        )?);
        let forwards = match (&self.curve.flat_rate, &self.curve.forwards) {
            (Some(r), None) => ForwardCurve::flat(grid.clone(), *r, 0.0)?,
            (None, Some(points)) => {
                if points.len() != grid.len()
                    || points.iter().zip(grid.nodes()).any(|(p, s)| (p.maturity - s).abs() > 1e-9)
                {
                    return Err(CliError::Precondition("curve points must list every grid node in order".into()));
                }
                let values = points.iter().map(|p| p.value).collect();
                ForwardCurve::new(grid.clone(), values, 0.0, ForwardInterpolation::Step)?
            }
            _ => return Err(CliError::Precondition("curve needs exactly one of `flat_rate` or `forwards`".into())),
        };
        let x0 = DiscountedCurve::initial(&forwards)?;
        let model = self.model.build(grid.clone())?;
        let payout = self.payout.build(grid.clone())?;
        let expiry = payout.expiry();
        let time = match self.mc.steps {
            Some(n) => TimeGrid::new(expiry, n)?,
            None => TimeGrid::with_dt(expiry, self.mc.dt)?,
        };
        Ok(Resolved { grid, x0, model, payout, time })
    }
}

/// Sets the dotted path `key` to `value`, read as JSON when it parses and as a string otherwise.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Parse(format!("override `{spec}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::Parse(format!("override `{key}`: `{part}` is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(CliError::Parse(format!("empty override key in `{spec}`")))
}
