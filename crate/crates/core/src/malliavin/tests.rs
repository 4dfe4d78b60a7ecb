use std::sync::Arc;

use super::*;
use crate::curvespace::{DiscountedCurve, ForwardCurve, MaturityGrid};
use crate::dynamics::{
    evolve, GaussianHjm, Kappa, LocalHjm, Record, Scheme, TauFactor, TimeGrid, Volatility, VolatilityModel,
};
use crate::rng::Increments;
use crate::Result;

fn grid() -> Arc<MaturityGrid> {
    Arc::new(MaturityGrid::uniform(12.0, 24).unwrap())
}

fn x0(g: &Arc<MaturityGrid>) -> Vec<f64> {
    DiscountedCurve::initial(&ForwardCurve::flat(g.clone(), 0.03, 0.0).unwrap()).unwrap().into_values()
}

/// `σ_i = τ x_i` on live nodes: every node is an independent geometric Brownian motion.
struct Lognormal {
    grid: Arc<MaturityGrid>,
    tau: f64,
}

impl Volatility for Lognormal {
    fn grid(&self) -> &Arc<MaturityGrid> {
        &self.grid
    }
    fn n_factors(&self) -> usize {
        1
    }
    fn sigma_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let first = self.grid.expired_count(t);
        for (i, o) in out.iter_mut().enumerate() {
            *o = if i < first { 0.0 } else { self.tau * x[i] };
        }
        Ok(())
    }
}

fn catalog(g: &Arc<MaturityGrid>) -> Vec<VolatilityModel> {
    vec![
        VolatilityModel::Gaussian(GaussianHjm::new(g.clone(), vec![
            TauFactor::Constant { sigma: 0.01 },
            TauFactor::Exponential { sigma: 0.012, decay: 0.2 },
        ]).unwrap()),
        VolatilityModel::Local(LocalHjm::with_defaults(g.clone(), 5, Kappa::default()).unwrap()),
        VolatilityModel::Local(LocalHjm::with_defaults(g.clone(), 3, Kappa { level: 0.02, amplitude: 0.015, scale: 0.02 }).unwrap()),
    ]
}

fn run<V: Volatility + ?Sized>(m: &V, scheme: Scheme, time: &TimeGrid, x: &[f64], incs: &Increments) -> Vec<Vec<f64>> {
    evolve(m, scheme, time, 0, x, incs, Record::Full).unwrap().states
}

#[test]
fn zero_volatility_variation_is_identity() {
    let g = grid();
    let m = GaussianHjm::ho_lee(g.clone(), 0.0).unwrap();
    let time = TimeGrid::with_dt(3.0, 0.1).unwrap();
    let incs = Increments::sample(&[1], time.steps, 1, time.dt, 1);
    let x = x0(&g);
    let states = run(&m, Scheme::Euler, &time, &x, &incs);
    let seg = PathSegment::new(0, &states, &incs).unwrap();
    let flow = Flow::new(&m, Scheme::Euler, time);
    for from in [0, 10, 30] {
        let y = flow.variation(&seg, from).unwrap();
        assert_eq!(y.y, nalgebra::DMatrix::identity(g.len(), g.len()));
    }
    assert!(flow.derivative_curve(&seg, 4).unwrap().iter().all(|&v| v == 0.0));
    let pic = flow.picard(&seg, 0, &x, 2).unwrap();
    assert_eq!(pic[0], x);
    assert_eq!(pic[1], x);
}

#[test]
fn lognormal_node_variation_is_the_price_ratio() {
    let g = grid();
    let m = Lognormal { grid: g.clone(), tau: 0.2 };
    let time = TimeGrid::with_dt(4.0, 0.02).unwrap();
    let x = x0(&g);
    for scheme in [Scheme::Euler, Scheme::LogEuler] {
        for p in 0..4 {
            let incs = Increments::sample(&[7, p], time.steps, 1, time.dt, 1);
            let states = run(&m, scheme, &time, &x, &incs);
            let seg = PathSegment::new(0, &states, &incs).unwrap();
            let flow = Flow::new(&m, scheme, time);
            let from = 50;
            let i = 20;
            let mut e = vec![0.0; g.len()];
            e[i] = 1.0;
            let y = flow.tangent(&seg, from, &e).unwrap();
            let ratio = states[time.steps][i] / states[from][i];
            assert!((y[i] / ratio - 1.0).abs() < 1e-7, "{scheme:?}: {} vs {ratio}", y[i]);
            assert!(y.iter().enumerate().all(|(j, v)| j == i || v.abs() < 1e-9));
            if scheme == Scheme::LogEuler {
                let d = flow.derivative_curve(&seg, from).unwrap();
                assert!((d[(i, 0)] / (states[time.steps][i] * 0.2) - 1.0).abs() < 1e-7);
            }
        }
    }
}

#[test]
fn gaussian_variation_ignores_the_curve_level() {
    let g = grid();
    let m = GaussianHjm::ho_lee(g.clone(), 0.015).unwrap();
    let time = TimeGrid::with_dt(5.0, 0.05).unwrap();
    let incs = Increments::sample(&[3], time.steps, 1, time.dt, 1);
    let a = x0(&g);
    let b: Vec<f64> = a.iter().map(|v| 0.8 * v).collect();
    let flow = Flow::new(&m, Scheme::Euler, time);
    let sa = run(&m, Scheme::Euler, &time, &a, &incs);
    let sb = run(&m, Scheme::Euler, &time, &b, &incs);
    let ya = flow.variation(&PathSegment::new(0, &sa, &incs).unwrap(), 0).unwrap();
    let yb = flow.variation(&PathSegment::new(0, &sb, &incs).unwrap(), 0).unwrap();
    assert_eq!(ya.y, yb.y);
    // directions already expired at the start act as the identity
    let from = time.index_of(2.0).unwrap();
    let y = flow.variation(&PathSegment::new(0, &sa, &incs).unwrap(), from).unwrap();
    for i in 0..g.expired_count(2.0) {
        for j in 0..g.len() {
            assert_eq!(y.y[(i, j)], if i == j { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn first_picard_iterate_is_the_single_integral() {
    let g = grid();
    let m = LocalHjm::with_defaults(g.clone(), 3, Kappa::default()).unwrap();
    let time = TimeGrid::with_dt(2.0, 0.05).unwrap();
    let incs = Increments::sample(&[5], time.steps, 3, time.dt, 1);
    let x = x0(&g);
    let states = run(&m, Scheme::LogEuler, &time, &x, &incs);
    let seg = PathSegment::new(0, &states, &incs).unwrap();
    let flow = Flow::new(&m, Scheme::LogEuler, time);
    let h: Vec<f64> = g.nodes().iter().map(|s| (-0.2 * s).exp()).collect();
    let pic = flow.picard(&seg, 0, &h, 1).unwrap();
    let mut expect = h.clone();
    let mut d = vec![0.0; g.len() * 3];
    for l in 0..time.steps {
        m.sigma_jvp_into(time.time(l), &states[l], &h, &mut d).unwrap();
        for i in 0..g.len() {
            expect[i] += (0..3).map(|k| d[i * 3 + k] * incs.step(l)[k]).sum::<f64>();
        }
    }
    assert_eq!(pic[1], expect);
    let mats = flow.picard_matrices(&seg, 0, 1).unwrap();
    let col: Vec<f64> = (&mats[1] * nalgebra::DVector::from_column_slice(&h)).iter().copied().collect();
    for (a, b) in col.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn tangent_matches_central_differences() {
    let g = grid();
    let time = TimeGrid::with_dt(5.0, 0.02).unwrap();
    let x = x0(&g);
    let h: Vec<f64> = g.nodes().iter().map(|s| x[0] * 0.1 * (0.5 * s).sin() * (-0.1 * s).exp()).collect();
    for m in catalog(&g) {
        let scheme = m.default_scheme();
        let incs = Increments::sample(&[11], time.steps, m.n_factors(), time.dt, 1);
        let states = run(&m, scheme, &time, &x, &incs);
        let seg = PathSegment::new(0, &states, &incs).unwrap();
        let y = Flow::new(&m, scheme, time).tangent(&seg, 0, &h).unwrap();
        let eps = 1e-4;
        let up: Vec<f64> = x.iter().zip(&h).map(|(x, h)| x + eps * h).collect();
        let dn: Vec<f64> = x.iter().zip(&h).map(|(x, h)| x - eps * h).collect();
        let pu = run(&m, scheme, &time, &up, &incs);
        let pd = run(&m, scheme, &time, &dn, &incs);
        let fd: Vec<f64> = pu[time.steps].iter().zip(&pd[time.steps]).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let err = y.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let size = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= 1e-6 * size, "{}: {err} vs {size}", m.kind());
    }
}

#[test]
fn adjoint_is_the_transpose_and_the_flow_composes() {
    let g = grid();
    let time = TimeGrid::with_dt(4.0, 0.05).unwrap();
    let x = x0(&g);
    for m in catalog(&g) {
        let scheme = m.default_scheme();
        let incs = Increments::sample(&[13], time.steps, m.n_factors(), time.dt, 1);
        let states = run(&m, scheme, &time, &x, &incs);
        let seg = PathSegment::new(0, &states, &incs).unwrap();
        let flow = Flow::new(&m, scheme, time);
        let y = flow.variation(&seg, 0).unwrap();
        let lam: Vec<f64> = (0..g.len()).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
        let adj = flow.adjoint(&seg, &lam).unwrap();
        let yt = y.y.transpose() * nalgebra::DVector::from_column_slice(&lam);
        for (a, b) in adj[0].iter().zip(yt.iter()) {
            assert!((a - b).abs() < 1e-12, "{}", m.kind());
        }
        // Y_{0,T} = Y_{u,T} Y_{0,u}
        let u = 30;
        let head = incs.prefix(u);
        let seg_head = PathSegment::new(0, &states[..=u], &head).unwrap();
        let y0u = flow.variation(&seg_head, 0).unwrap();
        let yut = flow.variation(&seg, u).unwrap();
        let composed = &yut.y * &y0u.y;
        assert!((composed - &y.y).abs().max() < 1e-12);
        // terminal identity
        let d = flow.derivative_curve(&seg, time.steps).unwrap();
        let sig = m.sigma(time.horizon(), &states[time.steps]).unwrap();
        assert_eq!(d.transpose().as_slice(), &sig[..]);
    }
}

#[test]
fn integrands_of_elementary_functionals() {
    let time = TimeGrid::with_dt(1.0, 0.05).unwrap();
    let budget = InnerBudget { n_inner: 4000, substeps: 1 };
    let outer = Increments::sample(&[21], time.steps, 2, time.dt, 1);
    let l = 8;

    let lin = LinearFunctional { h: (0..time.steps).map(|l| vec![0.5 + l as f64 * 0.01, -0.2]).collect() };
    let a = clark_ocone_integrand(&lin, &outer, l, budget, 1, 0).unwrap();
    assert_eq!(a[0].mean, lin.h[l][0]);
    assert_eq!(a[0].stderr, 0.0);

    let sq = SquaredBrownian { factor: 1 };
    let a = clark_ocone_integrand(&sq, &outer, l, budget, 2, 0).unwrap();
    assert!(a[1].within(2.0 * outer.brownian(l, 1), 3.0), "{:?}", a[1]);
    assert_eq!(a[0].mean, 0.0);

    let em = ExponentialMartingale { h: vec![0.7, -0.4] };
    let a = clark_ocone_integrand(&em, &outer, l, budget, 3, 0).unwrap();
    let m_t = em.running(&outer, l);
    for k in 0..2 {
        assert!(a[k].within(m_t * em.h[k], 3.0), "{k}: {:?} vs {}", a[k], m_t * em.h[k]);
    }
    assert!(clark_ocone_integrand(&em, &outer, l, InnerBudget { n_inner: 1, substeps: 1 }, 3, 0).is_err());
}

#[test]
fn linear_functionals_reconstruct_exactly() {
    let time = TimeGrid::with_dt(1.0, 0.01).unwrap();
    let lin = LinearFunctional { h: (0..time.steps).map(|l| vec![(l as f64 * 0.1).sin()]).collect() };
    let paths: Vec<Increments> = (0..50).map(|p| Increments::sample(&[p], time.steps, 1, time.dt, 1)).collect();
    let h = lin.h.clone();
    let alpha = move |_: &Increments, l: usize| h[l].clone();
    let r = reconstruct(&lin, 0.0, &paths, &IntegrandSource::Analytic(&alpha)).unwrap();
    assert!(r.rms_residual < 1e-14, "{}", r.rms_residual);
    let r = reconstruct(&lin, 0.0, &paths[..3], &IntegrandSource::Nested {
        budget: InnerBudget { n_inner: 2, substeps: 1 },
        seed: 4,
    }).unwrap();
    assert!(r.rms_residual < 1e-14);
}

#[test]
fn integration_by_parts_pairs() {
    let (steps, dt) = (20, 0.05);
    let e1 = |_: &Increments, _: usize| vec![1.0];
    let c = integration_by_parts_check(&ConstantFunctional(2.0), &e1, steps, 1, dt, 20_000, 1).unwrap();
    assert_eq!(c.lhs.mean, 0.0);
    assert!(c.passes(3.0), "{c:?}");
    let c = integration_by_parts_check(&TerminalBrownian { factor: 0 }, &e1, steps, 1, dt, 20_000, 2).unwrap();
    assert!((c.lhs.mean - 1.0).abs() < 1e-12);
    assert!(c.passes(3.0), "{c:?}");
    let c = integration_by_parts_check(&SquaredBrownian { factor: 0 }, &e1, steps, 1, dt, 20_000, 3).unwrap();
    assert!(c.lhs.within(0.0, 3.0) && c.passes(3.0), "{c:?}");
    // an adapted, path-dependent β
    let beta = |incs: &Increments, l: usize| vec![incs.brownian(l, 0).tanh()];
    let c = integration_by_parts_check(&ExponentialMartingale { h: vec![0.8] }, &beta, steps, 1, dt, 20_000, 4).unwrap();
    assert!(c.passes(3.0), "{c:?}");
}

struct NodeSpread;

impl CurveFunction for NodeSpread {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(x[14] - 0.9 * x[10] + 0.5 * x[14] * x[14])
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        g[14] = 1.0 + x[14];
        g[10] = -0.9;
        Ok(g)
    }
}

#[test]
fn curve_functional_derivative_matches_noise_bumps() {
    let g = grid();
    let time = TimeGrid::with_dt(4.0, 0.05).unwrap();
    let x = x0(&g);
    for m in catalog(&g) {
        let flow = Flow::new(&m, m.default_scheme(), time);
        let f = TerminalCurveFunctional { flow, x0: &x, g: &NodeSpread };
        let incs = Increments::sample(&[17], time.steps, m.n_factors(), time.dt, 1);
        for l in [0, 33, 79] {
            let d = f.derivative(&incs, l).unwrap();
            for k in 0..m.n_factors() {
                let eps = 1e-5;
                let mut up = incs.clone();
                up.step_mut(l)[k] += eps;
                let mut dn = incs.clone();
                dn.step_mut(l)[k] -= eps;
                let fd = (f.value(&up).unwrap() - f.value(&dn).unwrap()) / (2.0 * eps);
                assert!((d[k] - fd).abs() <= 1e-6 * fd.abs().max(1e-4), "{} l={l} k={k}: {} vs {fd}", m.kind(), d[k]);
            }
        }
    }
}
