use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::model::Volatility;
use crate::curvespace::{sobolev_norm, CurveSpace, MaturityGrid};
use crate::rng::stream;
use crate::Result;

/// `‖A‖_{L_HS(R^N, F)} = (Σ_k ‖A e_k‖²_F)^{1/2}` for a row-major `(nodes × N)` matrix.
pub fn hs_norm(grid: &MaturityGrid, a: &[f64], n_factors: usize, space: CurveSpace) -> Result<f64> {
    let m = grid.len();
    let mut col = vec![0.0; m];
    let mut acc = 0.0;
    for k in 0..n_factors {
        for i in 0..m {
            col[i] = a[i * n_factors + k];
        }
        acc += sobolev_norm(grid, &col, space)?.powi(2);
    }
    Ok(acc.sqrt())
}

/// Structural report on a volatility model.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub lipschitz_est: f64,
    pub locality_max_change: f64,
    pub locality_pass: bool,
    /// `(t, smallest singular value of σ(t, x)` restricted to live nodes`)`.
    pub min_singular_value: Vec<(f64, f64)>,
}

/// Random perturbation: either a smooth mix of decaying exponentials or a
/// bump localised on a few nodes.
fn perturbation<R: Rng>(rng: &mut R, grid: &MaturityGrid, x: &[f64], scale: f64) -> Vec<f64> {
    let m = x.len();
    let mut h = vec![0.0; m];
    if rng.gen_bool(0.5) {
        for _ in 0..3 {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.gen_range(0.02..1.0);
            for (hi, s) in h.iter_mut().zip(grid.nodes()) {
                *hi += a * (-b * s).exp();
            }
        }
    } else {
        let c = rng.gen_range(0..m);
        let w = rng.gen_range(0..3usize);
        for i in c.saturating_sub(w)..(c + w + 1).min(m) {
            h[i] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let hn = h.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    h.iter().zip(x).map(|(h, x)| scale * x.abs().max(1e-3) * h / hn).collect()
}

/// `max ‖σ(t,x) - σ(t,y)‖_HS / ‖x - y‖_F1v` over `pairs` random pairs
/// built around the sample states, at each of the given times.
pub fn lipschitz_estimate<V: Volatility + ?Sized>(
    model: &V,
    times: &[f64],
    states: &[Vec<f64>],
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let grid = model.grid();
    let n = model.n_factors();
    let mut rng = stream(&[seed, 0x11b5]);
    let mut best: f64 = 0.0;
    let mut sx = vec![0.0; grid.len() * n];
    let mut sy = vec![0.0; grid.len() * n];
    for p in 0..pairs {
        let x = &states[p % states.len()];
        let t = times[p % times.len()];
        let scale = [0.3, 0.03, 3e-3][p % 3];
        let h = perturbation(&mut rng, grid, x, scale);
        let y: Vec<f64> = x.iter().zip(&h).map(|(x, h)| x + h).collect();
        if y.iter().any(|v| !(*v > 0.0)) {
            continue;
        }
        model.sigma_into(t, x, &mut sx)?;
        model.sigma_into(t, &y, &mut sy)?;
        let diff: Vec<f64> = sx.iter().zip(&sy).map(|(a, b)| a - b).collect();
        let num = hs_norm(grid, &diff, n, CurveSpace::F1v)?;
        let den = sobolev_norm(grid, &h, CurveSpace::F1v)?;
        if den > 0.0 {
            best = best.max(num / den);
        }
    }
    Ok(best)
}

/// Largest change of `σ(t, ·)*δ_{s_i}` when only nodes outside `[t, s_i]` move.
pub fn locality_max_change<V: Volatility + ?Sized>(
    model: &V,
    times: &[f64],
    states: &[Vec<f64>],
    seed: u64,
) -> Result<f64> {
    let grid = model.grid();
    let nodes = grid.nodes();
    let n = model.n_factors();
    let mut rng = stream(&[seed, 0x10ca1]);
    let mut worst: f64 = 0.0;
    let mut base = vec![0.0; grid.len() * n];
    let mut moved = vec![0.0; grid.len() * n];
    for (p, x) in states.iter().enumerate() {
        let t = times[p % times.len()];
        model.sigma_into(t, x, &mut base)?;
        for i in grid.expired_count(t)..grid.len() {
            let y: Vec<f64> = x
                .iter()
                .zip(nodes)
                .map(|(&v, &s)| {
                    if s > nodes[i] || s < t - crate::curvespace::NODE_TOL {
                        v * (1.0 + 0.2 * rng.gen_range(-1.0..1.0))
                    } else {
                        v
                    }
                })
                .collect();
            model.sigma_into(t, &y, &mut moved)?;
            for k in 0..n {
                worst = worst.max((base[i * n + k] - moved[i * n + k]).abs());
            }
        }
    }
    Ok(worst)
}

/// Rows of `σ(t, x)` at the live nodes `s_i > t`.
pub fn restricted_operator<V: Volatility + ?Sized>(model: &V, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = model.n_factors();
    let sig = model.sigma(t, x)?;
    let first = model.grid().expired_count(t);
    let rows = x.len() - first;
    Ok(DMatrix::from_row_slice(rows, n, &sig[first * n..]))
}

/// Rows of `σ(t, x)` at the given node indices, e.g. the hedge maturities.
pub fn selected_rows<V: Volatility + ?Sized>(model: &V, t: f64, x: &[f64], rows: &[usize]) -> Result<DMatrix<f64>> {
    let n = model.n_factors();
    let sig = model.sigma(t, x)?;
    Ok(DMatrix::from_fn(rows.len(), n, |r, k| sig[rows[r] * n + k]))
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Numerical rank with relative tolerance `rtol`.
pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    let s = singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&v| v > rtol * top && v > 0.0).count()
}

/// Runs the Lipschitz, locality and nondegeneracy diagnostics on sample states.
pub fn diagnostics<V: Volatility + ?Sized>(
    model: &V,
    times: &[f64],
    states: &[Vec<f64>],
    pairs: usize,
    seed: u64,
) -> Result<Diagnostics> {
    let lipschitz_est = lipschitz_estimate(model, times, states, pairs, seed)?;
    let locality_max_change = locality_max_change(model, times, states, seed)?;
    let min_singular_value = times
        .iter()
        .map(|&t| {
            let m = restricted_operator(model, t, &states[0])?;
            Ok((t, min_singular_value(&m)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Diagnostics {
        lipschitz_est,
        locality_max_change,
        locality_pass: locality_max_change < 1e-12,
        min_singular_value,
    })
}

/// Integrand of the finite-energy condition at one state:
/// `|P̃'_t(t)| ‖P̃_t‖_{F2w} / P̃_t(t)² + (1 + P̃_t(t)^{-2}) ‖σ_t‖²_{HS(F2w)}`.
pub fn energy_integrand<V: Volatility + ?Sized>(model: &V, t: f64, x: &[f64]) -> Result<f64> {
    let grid = model.grid();
    let nodes = grid.nodes();
    let j = grid.last_node_at_or_before(t).min(nodes.len() - 2);
    let slope = (x[j + 1] - x[j]) / (nodes[j + 1] - nodes[j]);
    let w = (t - nodes[j]) / (nodes[j + 1] - nodes[j]);
    let p_tt = x[j] * (1.0 - w) + x[j + 1] * w;
    let sig = model.sigma(t, x)?;
    let hs = hs_norm(grid, &sig, model.n_factors(), CurveSpace::F2w)?;
    let curve = sobolev_norm(grid, x, CurveSpace::F2w)?;
    Ok(slope.abs() * curve / (p_tt * p_tt) + (1.0 + 1.0 / (p_tt * p_tt)) * hs * hs)
}
