use serde::Serialize;
use serde_json::{json, Value};
use termhedge::curvespace::{weight_constants, PortfolioMeasure};
use termhedge::dynamics::{simulate, GaussianHjm, Record, SimOptions, VolatilityModel};
use termhedge::experiments::{self, Check, CRITERIA};
use termhedge::hedging::{
    finite_factor_hedge, gaussian_call, prehedge, price_mc, replicate, self_financing_complete, support_check,
    BacktestConfig, FiniteFactorHedger, HedgeReport, HedgeSetup, WeightRow, SUPPORT_ABS_TOL,
};
use termhedge::malliavin::InnerBudget;

use crate::scenario::{HedgeMethod, Resolved, Scenario, WeightSource};
use crate::CliError;

/// What a command produced: verdict checks, a JSON body and extra files.
pub struct Outcome {
    pub checks: Vec<Check>,
    pub result: Value,
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn gaussian(model: &VolatilityModel) -> Option<&GaussianHjm> {
    match model {
        VolatilityModel::Gaussian(g) => Some(g),
        VolatilityModel::Local(_) => None,
    }
}

/// The Gaussian model when the scenario asks for (or allows) closed-form weights.
fn closed_form<'a>(s: &Scenario, r: &'a Resolved) -> Result<Option<&'a GaussianHjm>, CliError> {
    let available = gaussian(&r.model).filter(|_| r.payout.as_zcb_call().is_some());
    match (s.hedge.weights, available) {
        (WeightSource::Nested, _) => Ok(None),
        (WeightSource::Auto, g) => Ok(g),
        (WeightSource::ClosedForm, Some(g)) => Ok(Some(g)),
        (WeightSource::ClosedForm, None) => Err(CliError::Precondition(
            "closed-form weights need a Gaussian model and a single-bond call".into(),
        )),
    }
}

fn backtest_config(s: &Scenario, seed: u64, nested: bool) -> BacktestConfig {
    BacktestConfig {
        n_paths: s.mc.n_outer,
        rebalance_every: s.mc.rebalance_every,
        seed,
        substeps: s.mc.substeps,
        inner: nested.then_some(InnerBudget { n_inner: s.mc.n_inner, substeps: s.mc.substeps }),
        price_paths: s.mc.price_paths,
        cost_cap: s.mc.cost_cap,
        ..Default::default()
    }
}

#[derive(Serialize)]
struct NodeMean {
    maturity: f64,
    initial: f64,
    mean: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct PathRow {
    path_id: u64,
    t: f64,
    maturity: f64,
    value: f64,
}

pub fn simulate_cmd(s: &Scenario, r: &Resolved, seed: u64, dump_paths: bool) -> Result<Outcome, CliError> {
    let opts = SimOptions {
        scheme: r.model.default_scheme(),
        record: if dump_paths { Record::Full } else { Record::Terminal },
        substeps: s.mc.substeps,
    };
    let bundle = simulate(&r.model, &r.x0, &r.time, s.mc.n_outer, seed, opts)?;
    let gap = bundle.martingale_gap();
    let frozen = bundle.frozen_exact();
    let means: Vec<NodeMean> = bundle
        .terminal_mean()
        .iter()
        .zip(r.grid.nodes())
        .zip(r.x0.values())
        .map(|((e, &maturity), &initial)| NodeMean { maturity, initial, mean: e.mean, stderr: e.stderr })
        .collect();
    let mut files = Vec::new();
    if dump_paths {
        let rows = bundle.paths.iter().flat_map(|p| {
            p.trajectory.states.iter().enumerate().flat_map(move |(l, x)| {
                let t = r.time.time(l);
                r.grid.nodes().iter().zip(x).map(move |(&maturity, &value)| PathRow { path_id: p.id, t, maturity, value })
            })
        });
        files.push(("paths.csv".to_string(), csv_bytes(rows)?));
    }
    Ok(Outcome {
        checks: vec![
            Check::at_most("worst node martingale gap (s.e.)", gap, 3.0),
            Check::holds("expired nodes frozen bit-exact", frozen),
        ],
        result: json!({
            "model": r.model.kind(),
            "horizon": r.time.horizon(),
            "steps": r.time.steps,
            "n_paths": bundle.len(),
            "flagged_paths": bundle.flagged(),
            "martingale_gap_se": gap,
            "frozen_exact": frozen,
            "terminal_mean": means,
        }),
        files,
    })
}

pub fn price_cmd(s: &Scenario, r: &Resolved, seed: u64) -> Result<Outcome, CliError> {
    let setup = HedgeSetup::new(&r.model, r.model.default_scheme(), r.time, &r.payout)?;
    let est = price_mc(&setup, r.x0.values(), s.mc.price_paths, seed, s.mc.substeps)?;
    let exact = match gaussian(&r.model).filter(|_| r.payout.as_zcb_call().is_some()) {
        Some(g) => Some(gaussian_call(g, &r.payout, 0.0, r.x0.values())?.price),
        None => None,
    };
    let mut checks = vec![Check::holds("price is finite", est.mean.is_finite())];
    if let Some(p) = exact {
        checks.push(Check::within_se("price vs closed form (s.e.)", est, p, 3.0));
    }
    Ok(Outcome {
        checks,
        result: json!({ "v0": est, "closed_form_price": exact, "n_paths": s.mc.price_paths }),
        files: Vec::new(),
    })
}

/// Time-zero hedge portfolio with its support verdict.
pub fn hedge_cmd(s: &Scenario, r: &Resolved, seed: u64) -> Result<Outcome, CliError> {
    let m = r.grid.len();
    let x = r.x0.values();
    let (method, v0, weights, stderr, reference) = match s.hedge.method {
        HedgeMethod::FiniteFactor => {
            let g = gaussian(&r.model)
                .ok_or_else(|| CliError::Precondition("finite-factor hedging needs a Gaussian model".into()))?;
            let hedger = FiniteFactorHedger::new(g, &r.payout, &s.hedge.hedge_maturities)?;
            let (call, phi) = hedger.weights(0.0, x)?;
            let mut w = vec![0.0; m];
            for (&mat, &c) in s.hedge.hedge_maturities.iter().zip(&phi) {
                w[r.grid.node_index(mat)?] += c;
            }
            ("finite_factor", call.price, w, vec![0.0; m], None)
        }
        HedgeMethod::ClarkOcone => {
            let exact = match gaussian(&r.model).filter(|_| r.payout.as_zcb_call().is_some()) {
                Some(g) => Some(gaussian_call(g, &r.payout, 0.0, x)?),
                None => None,
            };
            match closed_form(s, r)? {
                Some(_) => {
                    let call = exact.expect("closed form exists");
                    let (underlying, _) = r.payout.as_zcb_call().expect("single-bond call");
                    let mut w = vec![0.0; m];
                    w[r.grid.node_index(underlying)?] += call.weight_underlying;
                    w[r.grid.node_index(r.payout.expiry())?] += call.weight_expiry;
                    ("clark_ocone_closed_form", call.price, w, vec![0.0; m], None)
                }
                None => {
                    let setup = HedgeSetup::new(&r.model, r.model.default_scheme(), r.time, &r.payout)?;
                    let budget = InnerBudget { n_inner: s.mc.n_inner, substeps: s.mc.substeps };
                    let ph = prehedge(&setup, 0, x, budget, seed, 0)?;
                    ("clark_ocone_nested", ph.value.mean, ph.weights, ph.stderr, exact.map(|c| (c, ph.value)))
                }
            }
        }
    };
    let verdict = support_check(&r.grid, 0.0, &weights, &stderr, (0.0, r.payout.support_horizon()), SUPPORT_ABS_TOL);
    let phi = PortfolioMeasure::from_dense(r.grid.clone(), &weights);
    let position = self_financing_complete(&phi, v0, x)?;
    let rows: Vec<WeightRow> = r
        .grid
        .nodes()
        .iter()
        .enumerate()
        .filter(|&(i, _)| weights[i] != 0.0)
        .map(|(i, &maturity)| WeightRow { t: 0.0, maturity, weight: weights[i], stderr: stderr[i] })
        .collect();
    let mut checks = vec![Check::holds("support within [0, horizon]", verdict.pass)];
    if let Some((call, value)) = &reference {
        let (underlying, _) = r.payout.as_zcb_call().expect("single-bond call");
        let iu = r.grid.node_index(underlying)?;
        let ie = r.grid.node_index(r.payout.expiry())?;
        let est = |i: usize| termhedge::stats::Estimate { mean: weights[i], stderr: stderr[i] };
        checks.push(Check::within_se("price vs closed form (s.e.)", *value, call.price, 3.0));
        checks.push(Check::within_se("underlying weight vs closed form (s.e.)", est(iu), call.weight_underlying, 3.0));
        checks.push(Check::within_se("expiry weight vs closed form (s.e.)", est(ie), call.weight_expiry, 3.0));
    }
    Ok(Outcome {
        checks,
        result: json!({
            "method": method,
            "v0": v0,
            "weights": rows,
            "cash": position.cash,
            "dual_norm": phi.dual_norm(),
            "support": verdict,
            "closed_form": reference.map(|(c, _)| c),
        }),
        files: vec![("hedge_weights.csv".to_string(), csv_bytes(&rows)?)],
    })
}

fn support_summary(report: &HedgeReport, horizon: f64) -> String {
    if report.support.pass {
        "pass".to_string()
    } else {
        format!("fail beyond {horizon}y")
    }
}

pub fn replicate_cmd(s: &Scenario, r: &Resolved, seed: u64) -> Result<Outcome, CliError> {
    let x = r.x0.values();
    let report = match s.hedge.method {
        HedgeMethod::FiniteFactor => {
            let g = gaussian(&r.model)
                .ok_or_else(|| CliError::Precondition("finite-factor hedging needs a Gaussian model".into()))?;
            let cfg = backtest_config(s, seed, false);
            finite_factor_hedge(g, &r.payout, &s.hedge.hedge_maturities, x, r.time, &cfg)?
        }
        HedgeMethod::ClarkOcone => {
            let analytic = closed_form(s, r)?;
            let cfg = backtest_config(s, seed, analytic.is_none());
            let setup = HedgeSetup::new(&r.model, r.model.default_scheme(), r.time, &r.payout)?;
            replicate(&setup, x, &cfg, analytic)?
        }
    };
    let horizon = r.payout.support_horizon();
    let mut checks = vec![Check::holds(format!("support within [t, {horizon}y]"), report.support.pass)];
    if let Some(bound) = report.dual_norm_bound {
        checks.push(Check::at_most("max pre-hedge dual norm", report.max_dual_norm, bound));
    }
    let mut weights = Vec::new();
    report.write_weights_csv(&mut weights)?;
    Ok(Outcome {
        checks,
        result: json!({ "support_verdict": support_summary(&report, horizon), "report": to_value(&report) }),
        files: vec![("hedge_weights.csv".to_string(), weights)],
    })
}

fn run_criteria(ids: &[usize], seed: u64) -> Result<(Vec<Check>, Vec<experiments::CriterionResult>), CliError> {
    let mut checks = Vec::new();
    let mut results = Vec::new();
    for &id in ids {
        let res = experiments::run(id, seed)?;
        eprintln!("{}", res.line());
        checks.push(Check::holds(format!("criterion {id} {}", res.name), res.pass));
        results.push(res);
    }
    Ok((checks, results))
}

/// Criteria run by `verify` unless a list is given: the ones that finish in seconds.
pub const VERIFY_CRITERIA: [usize; 4] = [1, 4, 5, 10];

pub fn verify_cmd(s: &Scenario, r: &Resolved, seed: u64, ids: &[usize]) -> Result<Outcome, CliError> {
    let c = weight_constants(r.grid.weight_v(), r.grid.weight_w())?;
    let mut checks = vec![
        Check::holds("C_v finite", c.c_v.is_finite()),
        Check::holds("C_w finite", c.c_w.is_finite()),
        Check::holds("C_vw finite", c.c_vw.is_finite()),
    ];
    if s.weights.v_power == 2.0 && s.weights.w_power == 5.0 {
        checks.push(Check::at_most("|C_v - 1|", (c.c_v - 1.0).abs(), 1e-6));
        checks.push(Check::at_most("|C_w - 1/3|", (c.c_w - 1.0 / 3.0).abs(), 1e-6));
        checks.push(Check::at_most("|C_vw - 1/4|", (c.c_vw - 0.25).abs(), 1e-6));
    }
    let hedge = hedge_cmd(s, r, seed)?;
    let support = hedge.result["support"].clone();
    checks.extend(hedge.checks);
    let (crit_checks, results) = run_criteria(ids, seed)?;
    checks.extend(crit_checks);
    Ok(Outcome {
        checks,
        result: json!({
            "sobolev_constants": { "C_v": c.c_v, "C_w": c.c_w, "C_vw": c.c_vw },
            "support": support,
            "criteria": results,
        }),
        files: Vec::new(),
    })
}

#[derive(Serialize)]
struct TableRow {
    id: usize,
    name: String,
    pass: bool,
    seconds: f64,
    checks: String,
}

pub fn table_cmd(seed: u64, ids: &[usize]) -> Result<Outcome, CliError> {
    let (checks, results) = run_criteria(ids, seed)?;
    let rows = results.iter().map(|r| TableRow {
        id: r.id,
        name: r.name.clone(),
        pass: r.pass,
        seconds: r.seconds,
        checks: r
            .checks
            .iter()
            .map(|c| format!("{}={:.6e} ({})", c.name, c.value, c.limit))
            .collect::<Vec<_>>()
            .join("; "),
    });
    let table = csv_bytes(rows)?;
    Ok(Outcome { checks, result: json!({ "criteria": results }), files: vec![("table.csv".to_string(), table)] })
}

/// Parses `1,3-5` style criterion lists.
pub fn parse_criteria(spec: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Parse(format!("bad criterion list `{spec}`"));
    let mut ids = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                ids.extend(a..=b);
            }
            None => ids.push(part.parse().map_err(|_| bad())?),
        }
    }
    if ids.is_empty() || ids.iter().any(|id| !CRITERIA.iter().any(|c| c.0 == *id)) {
        return Err(bad());
    }
    Ok(ids)
}
