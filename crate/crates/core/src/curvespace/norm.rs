use serde::{Deserialize, Serialize};

use super::grid::MaturityGrid;
use crate::{Error, Result};

/// Which discrete Sobolev norm to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveSpace {
    /// `(∫ x'(u)² v(u) du)^{1/2}` from first differences.
    F1v,
    /// `(∫ x''(u)² w(u) du)^{1/2}` from second differences.
    F2w,
}

fn slopes(grid: &MaturityGrid, x: &[f64]) -> Vec<f64> {
    let spacing = grid.extended_spacing();
    let m = x.len();
    (0..m)
        .map(|i| {
            let next = if i + 1 < m { x[i + 1] } else { 0.0 };
            (next - x[i]) / spacing[i]
        })
        .collect()
}

/// Discrete weighted Sobolev norm of node values, with the ghost node pinned to zero.
///
/// `F1v` sums squared slopes weighted by `v` at interval midpoints. `F2w`
/// sums squared slope jumps over dual cells weighted by `w` at the nodes;
/// the ghost node contributes the jump from the tail slope to zero over a
/// half cell.
pub fn sobolev_norm(grid: &MaturityGrid, x: &[f64], space: CurveSpace) -> Result<f64> {
    if x.len() != grid.len() {
        return Err(Error::InvalidArgument(format!(
            "curve has {} values for {} nodes",
            x.len(),
            grid.len()
        )));
    }
    let spacing = grid.extended_spacing();
    let ext = grid.extended_nodes();
    let d = slopes(grid, x);
    let sq = match space {
        CurveSpace::F1v => {
            let v = grid.weight_v();
            d.iter()
                .zip(&spacing)
                .zip(ext.windows(2))
                .map(|((di, h), w)| di * di * v.eval(0.5 * (w[0] + w[1])) * h)
                .sum::<f64>()
        }
        CurveSpace::F2w => {
            if x.len() < 3 {
                return Err(Error::InvalidArgument("F2w norm needs at least 3 nodes".into()));
            }
            let w = grid.weight_w();
            let mut acc = 0.0;
            for k in 1..ext.len() {
                let (right, cell) = if k < d.len() {
                    (d[k], 0.5 * (spacing[k - 1] + spacing[k]))
                } else {
                    (0.0, 0.5 * spacing[k - 1])
                };
                let jump = (right - d[k - 1]) / cell;
                acc += jump * jump * w.eval(ext[k]) * cell;
            }
            acc
        }
    };
    Ok(sq.sqrt())
}

/// Norm of the linear functional `x ↦ Σ a_i x(s_i)` in the dual of discrete `F1v`.
///
/// Writing node values through the slopes, `x_i = -Σ_{j>=i} d_j Δ_j`, the
/// supremum over `‖x‖ <= 1` is `(Σ_j Δ_j A_j² / v(mid_j))^{1/2}` with
/// `A_j = Σ_{i<=j} a_i`.
pub fn dual_norm(grid: &MaturityGrid, a: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), grid.len());
    let spacing = grid.extended_spacing();
    let ext = grid.extended_nodes();
    let v = grid.weight_v();
    let mut partial = 0.0;
    let mut acc = 0.0;
    for j in 0..a.len() {
        partial += a[j];
        let mid = 0.5 * (ext[j] + ext[j + 1]);
        acc += spacing[j] * partial * partial / v.eval(mid);
    }
    acc.sqrt()
}

/// Coefficients of the forward-difference derivative `x ↦ (x_{i+1} - x_i)/Δ_i`
/// at node `i` (the last node differences against the ghost zero).
pub fn derivative_functional(grid: &MaturityGrid, i: usize) -> Vec<f64> {
    let spacing = grid.extended_spacing();
    let mut a = vec![0.0; grid.len()];
    a[i] = -1.0 / spacing[i];
    if i + 1 < a.len() {
        a[i + 1] = 1.0 / spacing[i];
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_curve_has_zero_norm() {
        let g = MaturityGrid::uniform(10.0, 10).unwrap();
        let z = vec![0.0; g.len()];
        assert_eq!(sobolev_norm(&g, &z, CurveSpace::F1v).unwrap(), 0.0);
        assert_eq!(sobolev_norm(&g, &z, CurveSpace::F2w).unwrap(), 0.0);
    }

    #[test]
    fn exponential_curve_matches_closed_form() {
        // ∫_0^∞ e^{-2s} (1+s)² ds = 1/2 + 1/2 + 1/4
        let g = MaturityGrid::uniform(40.0, 4000).unwrap();
        let x: Vec<f64> = g.nodes().iter().map(|s| (-s).exp()).collect();
        let n = sobolev_norm(&g, &x, CurveSpace::F1v).unwrap();
        assert!((n * n / 1.25 - 1.0).abs() < 0.01, "{}", n * n);
    }

    #[test]
    fn evaluation_functional_bounded_by_c_v() {
        let g = MaturityGrid::uniform(30.0, 60).unwrap();
        for i in 0..g.len() {
            let mut a = vec![0.0; g.len()];
            a[i] = 1.0;
            assert!(dual_norm(&g, &a) <= g.constants().c_v.sqrt());
        }
    }

    #[test]
    fn dual_norm_is_attained() {
        // the maximiser has slopes proportional to A_j / v(mid_j)
        let g = MaturityGrid::uniform(5.0, 5).unwrap();
        let a = vec![0.3, -1.0, 0.0, 2.0, 0.5, -0.2];
        let spacing = g.extended_spacing();
        let ext = g.extended_nodes();
        let mut partial = 0.0;
        let d: Vec<f64> = (0..a.len())
            .map(|j| {
                partial += a[j];
                -partial / g.weight_v().eval(0.5 * (ext[j] + ext[j + 1]))
            })
            .collect();
        let mut x = vec![0.0; a.len()];
        for i in (0..a.len()).rev() {
            let next = if i + 1 < a.len() { x[i + 1] } else { 0.0 };
            x[i] = next - d[i] * spacing[i];
        }
        let norm = sobolev_norm(&g, &x, CurveSpace::F1v).unwrap();
        let value: f64 = a.iter().zip(&x).map(|(a, x)| a * x).sum();
        assert!((value / norm - dual_norm(&g, &a)).abs() < 1e-12);
    }

    #[test]
    fn derivative_functional_diverges_under_refinement() {
        let mut g = MaturityGrid::uniform(10.0, 10).unwrap();
        let mut prev = 0.0;
        for _ in 0..5 {
            let i = g.index_of(3.0).unwrap();
            let n = dual_norm(&g, &derivative_functional(&g, i));
            assert!(n > prev, "{n} after {prev}");
            prev = n;
            g = g.refine(2);
        }
    }

    proptest! {
        #[test]
        fn smooth_curves_embed(
            a in proptest::collection::vec(-1.0f64..1.0, 3),
            b in proptest::collection::vec(0.2f64..1.5, 3),
        ) {
            let g = MaturityGrid::uniform(40.0, 400).unwrap();
            let x: Vec<f64> = g
                .nodes()
                .iter()
                .map(|s| a.iter().zip(&b).map(|(a, b)| a * (-b * s).exp()).sum())
                .collect();
            let n1 = sobolev_norm(&g, &x, CurveSpace::F1v).unwrap();
            let n2 = sobolev_norm(&g, &x, CurveSpace::F2w).unwrap();
            prop_assert!(n1 <= (g.constants().c_vw.sqrt() + 0.01) * n2, "{} {}", n1, n2);
        }

        #[test]
        fn norms_are_homogeneous(
            xs in proptest::collection::vec(-2.0f64..2.0, 11),
            lambda in -5.0f64..5.0,
        ) {
            let g = MaturityGrid::uniform(10.0, 10).unwrap();
            let scaled: Vec<f64> = xs.iter().map(|x| lambda * x).collect();
            for space in [CurveSpace::F1v, CurveSpace::F2w] {
                let a = sobolev_norm(&g, &scaled, space).unwrap();
                let b = lambda.abs() * sobolev_norm(&g, &xs, space).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
            }
        }

        #[test]
        fn point_evaluation_bound(xs in proptest::collection::vec(-1.0f64..1.0, 21)) {
            let g = MaturityGrid::uniform(20.0, 20).unwrap();
            let n = sobolev_norm(&g, &xs, CurveSpace::F1v).unwrap();
            let cv = g.constants().c_v.sqrt();
            for &x in &xs {
                prop_assert!(x.abs() <= cv * n + 1e-12);
            }
        }
    }
}
