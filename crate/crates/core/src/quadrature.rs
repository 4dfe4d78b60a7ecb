//! Gauss–Legendre quadrature helpers, including integrals over `[a, ∞)`.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::{Error, Result};

const PANEL_DEGREE: usize = 20;
const MAX_PANELS: usize = 200;
const TAIL_RTOL: f64 = 1e-15;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(PANEL_DEGREE).expect("nonzero degree")))
}

/// Composite Gauss–Legendre quadrature of `f` over `[a, b]` with `panels` equal panels.
pub fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, mut f: F) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            rule().integrate(lo, lo + h, &mut f)
        })
        .sum()
}

/// Integral of `f` over `[a, ∞)`.
///
/// Panels double in length measured by `1 + s`, so power-law integrands give
/// geometrically shrinking panel contributions. The remaining tail is closed
/// with the geometric series of the last two contributions. If the partial
/// sums fail to settle within the panel budget the integral is declared
/// divergent.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    a: f64,
    name: &'static str,
    mut f: F,
) -> Result<f64> {
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    let mut lo = a;
    for k in 0..MAX_PANELS {
        let hi = (1.0 + a) * 2f64.powi(k as i32 + 1) - 1.0;
        let c = rule().integrate(lo, hi, &mut f);
        if !c.is_finite() {
            return Err(Error::DivergentIntegral { name });
        }
        total += c;
        if let Some(p) = prev {
            if c == 0.0 && p == 0.0 {
                return Ok(total);
            }
            if p != 0.0 {
                let r = c / p;
                if (0.0..0.95).contains(&r) {
                    let tail = c * r / (1.0 - r);
                    if tail.abs() <= TAIL_RTOL * total.abs().max(f64::MIN_POSITIVE) {
                        return Ok(total + tail);
                    }
                }
            }
        }
        prev = Some(c);
        lo = hi;
    }
    Err(Error::DivergentIntegral { name })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(0.0, 2.0, 1, |x| x * x * x);
        assert!((v - 4.0).abs() < 1e-13);
    }

    #[test]
    fn power_law_tail() {
        let v = integrate_to_infinity(0.0, "test", |s| (1.0 + s).powi(-2)).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
        let v = integrate_to_infinity(3.0, "test", |s| (1.0 + s).powi(-3)).unwrap();
        assert!((v - 0.5 / 16.0).abs() < 1e-14, "{v}");
    }

    #[test]
    fn exponential_tail() {
        let v = integrate_to_infinity(0.0, "test", |s| (-s).exp()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_tail_is_divergent() {
        let e = integrate_to_infinity(0.0, "harmonic", |s| 1.0 / (1.0 + s)).unwrap_err();
        assert_eq!(e, Error::DivergentIntegral { name: "harmonic" });
    }
}
