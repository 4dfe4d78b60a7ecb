use std::sync::Arc;

use termhedge::curvespace::{DiscountedCurve, ForwardCurve, MaturityGrid};
use termhedge::dynamics::{
    simulate, GaussianHjm, Kappa, LocalHjm, Scheme, SimOptions, TimeGrid, Volatility, VolatilityModel,
};
use termhedge::hedging::{
    gaussian_call, prehedge, price_mc, replicate, support_check, BacktestConfig, HedgeSetup, Payout, SUPPORT_ABS_TOL,
};
use termhedge::malliavin::InnerBudget;

fn flat(grid: &Arc<MaturityGrid>, rate: f64) -> DiscountedCurve {
    DiscountedCurve::initial(&ForwardCurve::flat(grid.clone(), rate, 0.0).unwrap()).unwrap()
}

fn ho_lee_call() -> (GaussianHjm, DiscountedCurve, Payout) {
    let grid = Arc::new(MaturityGrid::uniform(10.0, 20).unwrap());
    let x0 = flat(&grid, 0.03);
    let model = GaussianHjm::ho_lee(grid.clone(), 0.01).unwrap();
    let payout = Payout::zcb_call(grid, 2.0, 4.0, 0.93).unwrap();
    (model, x0, payout)
}

#[test]
fn simulation_is_independent_of_the_worker_count() {
    let grid = Arc::new(MaturityGrid::uniform(6.0, 12).unwrap());
    let x0 = flat(&grid, 0.02);
    let model = VolatilityModel::Local(LocalHjm::with_defaults(grid, 4, Kappa::default()).unwrap());
    let time = TimeGrid::new(2.0, 16).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| simulate(&model, &x0, &time, 64, 11, SimOptions::for_model(&model)).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert!(a.bit_identical(&b));
    assert!(a.frozen_exact());
}

#[test]
fn nested_prehedge_and_price_match_the_gaussian_closed_form() {
    let (model, x0, payout) = ho_lee_call();
    let time = TimeGrid::new(2.0, 20).unwrap();
    let setup = HedgeSetup::new(&model, Scheme::Euler, time, &payout).unwrap();
    let cf = gaussian_call(&model, &payout, 0.0, x0.values()).unwrap();
    let ph = prehedge(&setup, 0, x0.values(), InnerBudget { n_inner: 4000, substeps: 1 }, 5, 0).unwrap();
    let grid = model.grid();
    let (i1, i0) = (grid.node_index(4.0).unwrap(), grid.node_index(2.0).unwrap());
    assert!((ph.weights[i1] - cf.weight_underlying).abs() <= 4.0 * ph.stderr[i1]);
    assert!((ph.weights[i0] - cf.weight_expiry).abs() <= 4.0 * ph.stderr[i0]);
    assert!(ph.value.within(cf.price, 4.0));
    let price = price_mc(&setup, x0.values(), 20_000, 6, 1).unwrap();
    assert!(price.within(cf.price, 4.0));
    let verdict = support_check(grid, 0.0, &ph.weights, &ph.stderr, (0.0, 4.0), SUPPORT_ABS_TOL);
    assert!(verdict.pass);
}

#[test]
fn closed_form_replication_tracks_the_payout() {
    let (model, x0, payout) = ho_lee_call();
    let time = TimeGrid::new(2.0, 200).unwrap();
    let setup = HedgeSetup::new(&model, Scheme::Euler, time, &payout).unwrap();
    let cfg = BacktestConfig { n_paths: 200, seed: 9, ..Default::default() };
    let report = replicate(&setup, x0.values(), &cfg, Some(&model)).unwrap();
    assert_eq!(report.method, "clark_ocone_closed_form");
    assert!(report.error.relative_rms < 0.05, "relative RMS {}", report.error.relative_rms);
    assert!(report.support.pass);
    assert!(report.payout_mean.within(report.v0, 4.0));
    let mut csv = Vec::new();
    report.write_weights_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 2 * 200);
}

#[test]
fn local_model_prehedge_stays_inside_the_underlying_maturity() {
    let grid = Arc::new(MaturityGrid::uniform(8.0, 16).unwrap());
    let x0 = flat(&grid, 0.03);
    let model = LocalHjm::with_defaults(grid.clone(), 6, Kappa::default()).unwrap();
    let payout = Payout::zcb_call(grid.clone(), 2.0, 4.0, 0.94).unwrap();
    let setup = HedgeSetup::new(&model, Scheme::LogEuler, TimeGrid::new(2.0, 8).unwrap(), &payout).unwrap();
    let ph = prehedge(&setup, 0, x0.values(), InnerBudget { n_inner: 64, substeps: 1 }, 1, 0).unwrap();
    let beyond = grid.node_index(4.0).unwrap() + 1;
    assert!(ph.weights[beyond..].iter().all(|&w| w == 0.0));
    assert!(ph.weights[..beyond].iter().any(|&w| w != 0.0));
}
