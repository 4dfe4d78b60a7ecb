use serde::Serialize;

use crate::curvespace::{dual_norm, MaturityGrid, NODE_TOL};

/// The atom furthest beyond its noise threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Offender {
    pub t: f64,
    pub maturity: f64,
    pub weight: f64,
    pub threshold: f64,
}

/// Outcome of a maturity-support check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportVerdict {
    pub pass: bool,
    pub interval: (f64, f64),
    pub atoms_checked: usize,
    pub violations: usize,
    pub worst: Option<Offender>,
}

impl SupportVerdict {
    /// Combines verdicts from several times or paths.
    pub fn merge(mut self, other: SupportVerdict) -> SupportVerdict {
        self.pass &= other.pass;
        self.atoms_checked += other.atoms_checked;
        self.violations += other.violations;
        let excess = |o: &Option<Offender>| o.map_or(f64::NEG_INFINITY, |o| o.weight.abs() / o.threshold);
        if excess(&other.worst) > excess(&self.worst) {
            self.worst = other.worst;
        }
        self.interval = (self.interval.0.min(other.interval.0), self.interval.1.max(other.interval.1));
        self
    }
}

/// Passes iff every atom with maturity outside `[lo, hi]` has
/// `|weight| <= max(abs_tol, 3 s.e.)`. The cash atom is held separately and never checked.
pub fn support_check(
    grid: &MaturityGrid,
    t: f64,
    weights: &[f64],
    stderr: &[f64],
    interval: (f64, f64),
    abs_tol: f64,
) -> SupportVerdict {
    let (lo, hi) = interval;
    let mut atoms_checked = 0;
    let mut violations = 0;
    let mut worst: Option<Offender> = None;
    for (i, &s) in grid.nodes().iter().enumerate() {
        if s >= lo - NODE_TOL && s <= hi + NODE_TOL {
            continue;
        }
        atoms_checked += 1;
        let threshold = abs_tol.max(3.0 * stderr[i]);
        let w = weights[i];
        if w.abs() > threshold {
            violations += 1;
        }
        let ratio = w.abs() / threshold;
        if worst.is_none_or(|o| ratio > o.weight.abs() / o.threshold) {
            worst = Some(Offender { t, maturity: s, weight: w, threshold });
        }
    }
    SupportVerdict { pass: violations == 0, interval, atoms_checked, violations, worst }
}

/// Distance between two estimates of the same hedge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniquenessGap {
    /// `‖A - B‖` in the dual of `F1v`.
    pub dual_distance: f64,
    /// Three times the root-mean-square dual norm of the combined estimation noise.
    pub dual_threshold: f64,
    /// `|σ*(A - B)|`, the part of the difference the market can see.
    pub sigma_distance: f64,
    pub sigma_threshold: f64,
    pub pass: bool,
}

/// Compares strategies `A` and `B` (dense weights with per-atom standard
/// errors) given `σ(t, x)` as a row-major `(nodes × N)` matrix.
pub fn uniqueness_gap(
    grid: &MaturityGrid,
    a: (&[f64], &[f64]),
    b: (&[f64], &[f64]),
    sigma: &[f64],
    n_factors: usize,
) -> UniquenessGap {
    let diff: Vec<f64> = a.0.iter().zip(b.0).map(|(x, y)| x - y).collect();
    let var: Vec<f64> = a.1.iter().zip(b.1).map(|(x, y)| x * x + y * y).collect();
    let dual_distance = dual_norm(grid, &diff);
    // E‖e‖*² for independent atom noise e: Σ_j Δ_j/v(mid_j) Σ_{i<=j} var_i
    let spacing = grid.extended_spacing();
    let ext = grid.extended_nodes();
    let mut partial = 0.0;
    let mut mean_sq = 0.0;
    for j in 0..var.len() {
        partial += var[j];
        mean_sq += spacing[j] * partial / grid.weight_v().eval(0.5 * (ext[j] + ext[j + 1]));
    }
    let mut proj = vec![0.0; n_factors];
    let mut proj_var = 0.0;
    for k in 0..n_factors {
        for i in 0..diff.len() {
            proj[k] += sigma[i * n_factors + k] * diff[i];
            proj_var += sigma[i * n_factors + k].powi(2) * var[i];
        }
    }
    let sigma_distance = proj.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dual_threshold = 3.0 * mean_sq.sqrt();
    let sigma_threshold = 3.0 * proj_var.sqrt();
    UniquenessGap {
        dual_distance,
        dual_threshold,
        sigma_distance,
        sigma_threshold,
        pass: dual_distance <= dual_threshold && sigma_distance <= sigma_threshold,
    }
}
