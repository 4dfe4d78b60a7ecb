use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::curvespace::{pair, DiscountedCurve, ForwardCurve, MaturityGrid, PortfolioMeasure};
use crate::dynamics::{GaussianHjm, Kappa, LocalHjm, Scheme, TimeGrid, Volatility};
use crate::malliavin::InnerBudget;
use crate::Error;

fn grid(s_max: f64, n: usize) -> Arc<MaturityGrid> {
    Arc::new(MaturityGrid::uniform(s_max, n).unwrap())
}

fn curve(g: &Arc<MaturityGrid>, rate: f64) -> Vec<f64> {
    DiscountedCurve::initial(&ForwardCurve::flat(g.clone(), rate, 0.0).unwrap()).unwrap().into_values()
}

fn with_nodes(g: &Arc<MaturityGrid>, pairs: &[(f64, f64)]) -> Vec<f64> {
    let mut x = curve(g, 0.03);
    for &(s, v) in pairs {
        x[g.node_index(s).unwrap()] = v;
    }
    x
}

fn atm_strike(x: &[f64], g: &MaturityGrid, t: f64, t1: f64) -> f64 {
    x[g.node_index(t1).unwrap()] / x[g.node_index(t).unwrap()]
}

#[test]
fn call_modified_payout_by_substitution() {
    let g = grid(10.0, 20);
    let p = Payout::zcb_call(g.clone(), 2.0, 4.0, 0.85).unwrap();
    let x = with_nodes(&g, &[(2.0, 0.9), (4.0, 0.8)]);
    assert!((p.modified_payout(&x).unwrap() - 0.035).abs() < 1e-15);
    let otm = with_nodes(&g, &[(2.0, 0.9), (4.0, 0.7)]);
    assert_eq!(p.modified_payout(&otm).unwrap(), 0.0);
    let mut bad = x.clone();
    bad[g.node_index(2.0).unwrap()] = 0.0;
    assert!(matches!(p.modified_payout(&bad), Err(Error::NonPositive { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn call_payout_is_positively_homogeneous(
        lam in 0.1f64..10.0,
        a in 0.3f64..1.0,
        b in 0.3f64..1.0,
        k in 0.0f64..1.5,
    ) {
        let g = grid(10.0, 20);
        let p = Payout::zcb_call(g.clone(), 2.0, 4.0, k).unwrap();
        let x = with_nodes(&g, &[(2.0, a), (4.0, b)]);
        let y: Vec<f64> = x.iter().map(|v| lam * v).collect();
        let lhs = p.modified_payout(&y).unwrap();
        let rhs = lam * p.modified_payout(&x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + rhs.abs()));
    }

    #[test]
    fn completion_matches_wealth(v in -2.0f64..2.0, w in proptest::collection::vec(-3.0f64..3.0, 21)) {
        let g = grid(10.0, 20);
        let x = curve(&g, 0.03);
        let phi = PortfolioMeasure::from_dense(g.clone(), &w);
        let pos = self_financing_complete(&phi, v, &x).unwrap();
        prop_assert!((pos.value(&x).unwrap() - v).abs() <= 1e-14 * (1.0 + v.abs() + pair(&phi, &x).unwrap().abs()));
    }
}

#[test]
fn arrears_reduces_to_spot_and_substitutes() {
    let g = grid(10.0, 20);
    let x = with_nodes(&g, &[(2.0, 0.9), (3.0, 0.86), (4.0, 0.8)]);
    let spot = Payout::zcb_call(g.clone(), 2.0, 4.0, 0.85).unwrap();
    let (v, carry) = spot.arrears_payout(&x).unwrap();
    assert_eq!(v, spot.modified_payout(&x).unwrap());
    assert_eq!(carry.from, carry.to);
    let late = PayoutSpec::ZcbCall { expiry: 2.0, underlying: 4.0, strike: 0.85, arrears: 1.0 }.build(g.clone()).unwrap();
    let (v, carry) = late.arrears_payout(&x).unwrap();
    let units = (0.8f64 / 0.9 - 0.85).max(0.0);
    assert!((v - 0.86 * units).abs() < 1e-15);
    assert_eq!((carry.bond_maturity, carry.from, carry.to), (3.0, 2.0, 3.0));
    assert!((carry.units - units).abs() < 1e-15);
}

#[test]
fn call_subgradient_is_indicator_weighted() {
    let g = grid(10.0, 20);
    let p = Payout::zcb_call(g.clone(), 2.0, 4.0, 0.85).unwrap();
    let x = with_nodes(&g, &[(2.0, 0.9), (4.0, 0.8)]);
    let d = p.payout_subgradient(&x).unwrap();
    let expect = PortfolioMeasure::new(g.clone(), &[(2.0, -0.85), (4.0, 1.0)]).unwrap();
    assert_eq!(d.dense(), expect.dense());
    assert!(d.dual_norm() <= p.lipschitz_constant());
    let otm = with_nodes(&g, &[(2.0, 0.9), (4.0, 0.7)]);
    assert!(p.payout_subgradient(&otm).unwrap().dense().iter().all(|&c| c == 0.0));
    // right-continuous convention: exactly at the kink the indicator is off
    let kink = with_nodes(&g, &[(2.0, 1.0), (4.0, 0.85)]);
    assert!(p.gradient_dense(&kink).unwrap().iter().all(|&c| c == 0.0));
}

#[test]
fn smooth_basket_subgradient_matches_finite_differences() {
    let g = grid(10.0, 20);
    let spec = PayoutSpec::Basket {
        expiry: 2.0,
        maturities: vec![3.0, 5.0, 8.0],
        weights: vec![0.5, 0.3, -0.2],
        strike: 0.5,
        smoothing: 0.05,
        arrears: 0.5,
    };
    let p = spec.build(g.clone()).unwrap();
    let x: Vec<f64> = g.nodes().iter().map(|s| (-0.03 * s - 0.002 * s.sin()).exp()).collect();
    let grad = p.payout_subgradient(&x).unwrap();
    for k in 0..4 {
        let h: Vec<f64> = g.nodes().iter().map(|s| ((k + 1) as f64 * s).cos() * 0.1).collect();
        let eps = 1e-5;
        let up: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a + eps * b).collect();
        let dn: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a - eps * b).collect();
        let fd = (p.hedged_value(&up).unwrap() - p.hedged_value(&dn).unwrap()) / (2.0 * eps);
        let an = pair(&grad, &h).unwrap();
        assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-8), "{k}: {fd} vs {an}");
    }
    let sampled = p.validate_lipschitz(&x, 200, 3).unwrap();
    assert!(sampled > 0.0);
}

#[test]
fn payout_rejects_bad_maturities() {
    let g = grid(10.0, 20);
    assert!(Payout::zcb_call(g.clone(), 4.0, 4.0, 0.9).is_err());
    assert!(Payout::zcb_call(g.clone(), 2.0, 4.2, 0.9).is_err());
    assert!(PayoutSpec::ZcbCall { expiry: 8.0, underlying: 9.0, strike: 0.9, arrears: 3.0 }.build(g).is_err());
}

#[test]
fn self_financing_completion_examples() {
    let g = grid(10.0, 20);
    let x = curve(&g, 0.03);
    let phi = PortfolioMeasure::new(g.clone(), &[(2.0, 1.5), (6.0, -0.3)]).unwrap();
    let v = pair(&phi, &x).unwrap();
    let pos = self_financing_complete(&phi, v, &x).unwrap();
    assert_eq!(pos.cash, 0.0);
    assert_eq!(pos.bonds, phi);
    let cash = self_financing_complete(&PortfolioMeasure::empty(g.clone()), 0.7, &x).unwrap();
    assert_eq!(cash.cash, 0.7);
    assert!(cash.bonds.atoms().is_empty());
}

fn zero_vol_setup(g: &Arc<MaturityGrid>) -> GaussianHjm {
    GaussianHjm::ho_lee(g.clone(), 0.0).unwrap()
}

#[test]
fn zero_vol_prehedge_is_the_payout_gradient() {
    let g = grid(10.0, 20);
    let model = zero_vol_setup(&g);
    let x = curve(&g, 0.03);
    let k = 0.9 * atm_strike(&x, &g, 2.0, 4.0);
    let payout = Payout::zcb_call(g.clone(), 2.0, 4.0, k).unwrap();
    let setup = HedgeSetup::new(&model, Scheme::Euler, TimeGrid::new(2.0, 8).unwrap(), &payout).unwrap();
    let ph = prehedge(&setup, 0, &x, InnerBudget { n_inner: 4, substeps: 1 }, 1, 0).unwrap();
    let mut expect = vec![0.0; g.len()];
    expect[g.node_index(4.0).unwrap()] = 1.0;
    expect[g.node_index(2.0).unwrap()] = -k;
    assert_eq!(ph.weights, expect);
    assert!(ph.stderr.iter().all(|&s| s == 0.0));
    let verdict = support_check(&g, 0.0, &ph.weights, &ph.stderr, (0.0, 4.0), SUPPORT_ABS_TOL);
    assert!(verdict.pass);
    let support: Vec<f64> = ph.measure(g.clone()).atoms().iter().map(|a| a.maturity).collect();
    assert_eq!(support, vec![2.0, 4.0]);
}

#[test]
fn prehedge_needs_two_inner_paths() {
    let g = grid(10.0, 20);
    let model = zero_vol_setup(&g);
    let payout = Payout::zcb_call(g.clone(), 2.0, 4.0, 0.9).unwrap();
    let setup = HedgeSetup::new(&model, Scheme::Euler, TimeGrid::new(2.0, 8).unwrap(), &payout).unwrap();
    let err = prehedge(&setup, 0, &curve(&g, 0.03), InnerBudget { n_inner: 1, substeps: 1 }, 1, 0);
    assert!(matches!(err, Err(Error::InvalidArgument(_))));
    assert!(HedgeSetup::new(&model, Scheme::Euler, TimeGrid::new(3.0, 8).unwrap(), &payout).is_err());
}

#[test]
fn zero_vol_replication_is_exact_with_arrears_carry() {
    let g = grid(10.0, 20);
    let model = zero_vol_setup(&g);
    let x = curve(&g, 0.03);
    let k = 0.95 * atm_strike(&x, &g, 2.0, 4.0);
    let payout =
        PayoutSpec::ZcbCall { expiry: 2.0, underlying: 4.0, strike: k, arrears: 1.5 }.build(g.clone()).unwrap();
    let setup = HedgeSetup::new(&model, Scheme::Euler, TimeGrid::new(2.0, 8).unwrap(), &payout).unwrap();
    let cfg = BacktestConfig {
        n_paths: 3,
        inner: Some(InnerBudget { n_inner: 2, substeps: 1 }),
        price_paths: 2,
        ..Default::default()
    };
    let report = replicate(&setup, &x, &cfg, None).unwrap();
    assert_eq!(report.error.rms_error, 0.0);
    assert!(report.support.pass);
    // carrying ξ units of the settlement bond from T to T + ΔT keeps the discounted value
    let (value, carry) = payout.arrears_payout(&x).unwrap();
    assert_eq!(carry.value(&g, &x).unwrap(), value);
    let units = (x[8] / x[4] - k).max(0.0);
    assert_eq!(value, units * x[g.node_index(3.5).unwrap()]);
    assert_eq!(report.v0, value);
}

fn ho_lee_call(g: &Arc<MaturityGrid>, sigma: f64, t: f64, t1: f64) -> (GaussianHjm, Vec<f64>, Payout) {
    let model = GaussianHjm::ho_lee(g.clone(), sigma).unwrap();
    let x = curve(g, 0.03);
    let k = atm_strike(&x, g, t, t1) * 1.01;
    let payout = Payout::zcb_call(g.clone(), t, t1, k).unwrap();
    (model, x, payout)
}

#[test]
fn ho_lee_prehedge_matches_closed_form_weights() {
    let g = grid(10.0, 20);
    let (model, x, payout) = ho_lee_call(&g, 0.01, 2.0, 4.0);
    let setup = HedgeSetup::new(&model, Scheme::Euler, TimeGrid::new(2.0, 40).unwrap(), &payout).unwrap();
    let ph = prehedge(&setup, 0, &x, InnerBudget { n_inner: 6000, substeps: 1 }, 11, 0).unwrap();
    let cf = gaussian_call(&model, &payout, 0.0, &x).unwrap();
    let (i1, i0) = (g.node_index(4.0).unwrap(), g.node_index(2.0).unwrap());
    assert!((ph.weights[i1] - cf.weight_underlying).abs() <= 3.0 * ph.stderr[i1], "{ph:?} {cf:?}");
    assert!((ph.weights[i0] - cf.weight_expiry).abs() <= 3.0 * ph.stderr[i0], "{ph:?} {cf:?}");
    assert!(ph.value.within(cf.price, 3.0), "{:?} vs {}", ph.value, cf.price);
    assert!(ph.dual_norm <= prehedge_bound(payout.lipschitz_constant(), 0.0, 2.0) * 1.05);
    let others: f64 = ph.weights.iter().enumerate().filter(|&(i, _)| i != i0 && i != i1).map(|(_, w)| w.abs()).sum();
    assert_eq!(others, 0.0);
}

#[test]
fn bump_revalue_examples() {
    let g = grid(10.0, 20);
    let (model, x, payout) = ho_lee_call(&g, 0.01, 2.0, 4.0);
    let time = TimeGrid::new(2.0, 40).unwrap();
    let setup = HedgeSetup::new(&model, Scheme::Euler, time, &payout).unwrap();
    let zero = vec![0.0; g.len()];
    assert_eq!(bump_revalue(&setup, &x, &zero, 1e-4, 64, 3, 1).unwrap().mean, 0.0);
    assert!(bump_revalue(&setup, &x, &zero, 0.0, 64, 3, 1).is_err());

    let mut h = vec![0.0; g.len()];
    h[g.node_index(4.0).unwrap()] = 1.0;
    let bump = bump_revalue(&setup, &x, &h, 1e-3, 20_000, 5, 1).unwrap();
    let cf = gaussian_call(&model, &payout, 0.0, &x).unwrap();
    assert!(bump.within(cf.weight_underlying, 3.0), "{bump:?} vs {}", cf.weight_underlying);

    let flat = zero_vol_setup(&g);
    let itm = Payout::zcb_call(g.clone(), 2.0, 4.0, 0.5).unwrap();
    let setup = HedgeSetup::new(&flat, Scheme::Euler, time, &itm).unwrap();
    let d = bump_revalue(&setup, &x, &h, 1e-3, 4, 3, 1).unwrap();
    assert!((d.mean - 1.0).abs() < 1e-9 && d.stderr < 1e-9, "{d:?}");
}

#[test]
fn price_matches_closed_form() {
    let g = grid(10.0, 20);
    let (model, x, payout) = ho_lee_call(&g, 0.01, 2.0, 4.0);
    let setup = HedgeSetup::new(&model, Scheme::Euler, TimeGrid::new(2.0, 40).unwrap(), &payout).unwrap();
    let mc = price_mc(&setup, &x, 20_000, 9, 1).unwrap();
    let cf = gaussian_call(&model, &payout, 0.0, &x).unwrap();
    assert!(mc.within(cf.price, 3.0), "{mc:?} vs {}", cf.price);
}

#[test]
fn uniqueness_gap_examples() {
    let g = grid(10.0, 20);
    let (model, x, payout) = ho_lee_call(&g, 0.01, 2.0, 4.0);
    let setup = HedgeSetup::new(&model, Scheme::Euler, TimeGrid::new(2.0, 40).unwrap(), &payout).unwrap();
    let sigma = model.sigma(0.0, &x).unwrap();
    let ph = prehedge(&setup, 0, &x, InnerBudget { n_inner: 4000, substeps: 1 }, 21, 0).unwrap();
    let same = uniqueness_gap(&g, (&ph.weights, &ph.stderr), (&ph.weights, &ph.stderr), &sigma, 1);
    assert_eq!(same.dual_distance, 0.0);
    assert_eq!(same.sigma_distance, 0.0);
    assert!(same.pass);

    let mut bumped = Vec::new();
    let mut bumped_se = Vec::new();
    for i in 0..g.len() {
        let mut h = vec![0.0; g.len()];
        h[i] = 1.0;
        let b = if ph.weights[i] == 0.0 {
            crate::stats::Estimate::exact(0.0)
        } else {
            bump_revalue(&setup, &x, &h, 1e-3, 4000, 22, 1).unwrap()
        };
        bumped.push(b.mean);
        bumped_se.push(b.stderr);
    }
    let gap = uniqueness_gap(&g, (&ph.weights, &ph.stderr), (&bumped, &bumped_se), &sigma, 1);
    assert!(gap.pass, "{gap:?}");

    let mut faulty = bumped.clone();
    faulty[g.node_index(4.0).unwrap()] += 0.1;
    let gap = uniqueness_gap(&g, (&ph.weights, &ph.stderr), (&faulty, &bumped_se), &sigma, 1);
    assert!(!gap.pass, "{gap:?}");
}

#[test]
fn finite_factor_bond_claim_is_replicated_exactly() {
    let g = grid(10.0, 10);
    let model = GaussianHjm::ho_lee(g.clone(), 0.01).unwrap();
    let x = curve(&g, 0.03);
    let bond = Payout::zcb_call(g.clone(), 2.0, 5.0, 0.0).unwrap();
    let hedger = FiniteFactorHedger::new(&model, &bond, &[5.0]).unwrap();
    let (_, w) = hedger.weights(1.0, &x).unwrap();
    assert!((w[0] - 1.0).abs() < 1e-14);
    let cfg = BacktestConfig { n_paths: 16, ..Default::default() };
    let report = hedger.backtest(&x, TimeGrid::new(2.0, 50).unwrap(), &cfg).unwrap();
    assert!(report.error.rms_error < 1e-14, "{:?}", report.error);
    for step in &report.schedule {
        assert_eq!(step.phi.len(), 1);
        assert!((step.phi[0].weight - 1.0).abs() < 1e-14);
    }
}

#[test]
fn finite_factor_ho_lee_replication() {
    let g = grid(10.0, 10);
    let model = GaussianHjm::ho_lee(g.clone(), 0.01).unwrap();
    let x = curve(&g, 0.03);
    let k = atm_strike(&x, &g, 5.0, 7.0) * 0.99;
    let payout = Payout::zcb_call(g.clone(), 5.0, 7.0, k).unwrap();
    let cfg = BacktestConfig { n_paths: 400, seed: 4, ..Default::default() };
    let report = finite_factor_hedge(&model, &payout, &[10.0], &x, TimeGrid::with_dt(5.0, 1.0 / 500.0).unwrap(), &cfg)
        .unwrap();
    assert!(report.error.relative_rms <= 0.02, "{:?}", report.error);
    // weights sit on the 10y bond only, beyond the underlying
    assert!(!report.support.pass);
    assert_eq!(report.support.worst.unwrap().maturity, 10.0);
}

#[test]
fn finite_factor_rejects_degenerate_hedges() {
    let g = grid(10.0, 10);
    let model = GaussianHjm::new(
        g.clone(),
        vec![
            crate::dynamics::TauFactor::Constant { sigma: 0.01 },
            crate::dynamics::TauFactor::Constant { sigma: 0.005 },
        ],
    )
    .unwrap();
    let x = curve(&g, 0.03);
    let payout = Payout::zcb_call(g.clone(), 2.0, 5.0, 0.9).unwrap();
    let hedger = FiniteFactorHedger::new(&model, &payout, &[6.0, 8.0]).unwrap();
    assert!(matches!(hedger.weights(0.0, &x), Err(Error::Singular { .. })));
    assert!(FiniteFactorHedger::new(&model, &payout, &[6.0]).is_err());
    assert!(FiniteFactorHedger::new(&model, &payout, &[2.0, 8.0]).is_err());
}

#[test]
fn analytic_replication_halves_with_order_one_half() {
    let g = grid(10.0, 10);
    let model = GaussianHjm::ho_lee(g.clone(), 0.01).unwrap();
    let x = curve(&g, 0.03);
    let k = atm_strike(&x, &g, 2.0, 4.0) * 0.99;
    let payout = Payout::zcb_call(g.clone(), 2.0, 4.0, k).unwrap();
    let time = TimeGrid::new(2.0, 256).unwrap();
    let setup = HedgeSetup::new(&model, Scheme::Euler, time, &payout).unwrap();
    let run = |every| {
        let cfg = BacktestConfig { n_paths: 2000, rebalance_every: every, seed: 8, ..Default::default() };
        replicate(&setup, &x, &cfg, Some(&model)).unwrap().error.rms_error
    };
    let ratio = run(2) / run(1);
    assert!((1.25..=1.6).contains(&ratio), "{ratio}");
}

#[test]
fn local_prehedge_has_no_weight_beyond_the_underlying() {
    let g = grid(10.0, 20);
    let model = LocalHjm::with_defaults(g.clone(), 6, Kappa::default()).unwrap();
    let x = curve(&g, 0.03);
    let k = atm_strike(&x, &g, 2.0, 4.0);
    let payout = Payout::zcb_call(g.clone(), 2.0, 4.0, k).unwrap();
    let setup = HedgeSetup::new(&model, Scheme::LogEuler, TimeGrid::new(2.0, 16).unwrap(), &payout).unwrap();
    let ph = prehedge(&setup, 0, &x, InnerBudget { n_inner: 400, substeps: 1 }, 3, 0).unwrap();
    let verdict = support_check(&g, 0.0, &ph.weights, &ph.stderr, (0.0, 4.0), SUPPORT_ABS_TOL);
    assert!(verdict.pass, "{verdict:?}");
    assert!(ph.weights[g.node_index(4.0).unwrap()].abs() > 0.1);
}

#[test]
fn report_csv_has_header_and_rows() {
    let g = grid(10.0, 10);
    let model = GaussianHjm::ho_lee(g.clone(), 0.01).unwrap();
    let x = curve(&g, 0.03);
    let payout = Payout::zcb_call(g.clone(), 2.0, 5.0, 0.9).unwrap();
    let cfg = BacktestConfig { n_paths: 4, rebalance_every: 5, ..Default::default() };
    let report = finite_factor_hedge(&model, &payout, &[6.0], &x, TimeGrid::new(2.0, 10).unwrap(), &cfg).unwrap();
    let mut buf = Vec::new();
    report.write_weights_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,maturity,weight,stderr");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("1.0,6.0,"));
}
