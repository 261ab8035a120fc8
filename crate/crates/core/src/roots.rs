//! Real roots of `1 - y ξ^{α-l} (ξ-1)^l = 0`.
//!
//! Write `h(x) = x^{α-l}(x-1)^l`. On `(1, ∞)` it increases from 0 to ∞, so
//! there is exactly one root there for every `y > 0`. On `(0, 1)` it is
//! negative for odd `l` (no root) and, for even `l`, decreases from ∞ to 0
//! (exactly one root). Both roots are found in log form with a safeguarded
//! Newton iteration: the outer one in `s = ln(x - 1)`, the inner one in
//! `s = logit(x)`. In those variables the equation is monotone and
//! well-scaled even when `y` is many orders of magnitude below 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `y` above which results are outside the small-`y` regime the
/// two-real-roots structure is established for.
pub const LEMMA_REGIME_Y: f64 = 0.5;

const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularitySolution {
    pub l: u64,
    pub alpha: f64,
    pub y: f64,
    /// The root in `(1, ∞)`.
    pub outer: f64,
    /// The root in `(0, 1)`; present iff `l` is even.
    pub inner: Option<f64>,
    /// Set when `y > 0.5`, where other (complex) roots are not ruled out.
    pub outside_lemma_regime: bool,
}

impl SingularitySolution {
    /// `|1 - y x^{α-l}(x-1)^l|` evaluated directly at `x`.
    pub fn residual(&self, x: f64) -> f64 {
        residual(self.l, self.alpha, self.y, x)
    }
}

pub fn residual(l: u64, alpha: f64, y: f64, x: f64) -> f64 {
    let lf = l as f64;
    let log_h = (alpha - lf) * x.ln() + lf * (x - 1.0).abs().ln();
    let sign = if x < 1.0 && l % 2 == 1 { -1.0 } else { 1.0 };
    (1.0 - sign * (y.ln() + log_h).exp()).abs()
}

/// Locate the real roots of `1 - y ξ^{α-l}(ξ-1)^l`.
pub fn solve_singularities(l: u64, alpha: f64, y: f64) -> Result<SingularitySolution> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::domain(format!("y must be positive, got {y}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if l == 0 {
        return Err(Error::domain("l must be at least 1"));
    }
    let lf = l as f64;
    let log_y = y.ln();

    // outer: g(s) = (α-l) ln(1+e^s) + l s + ln y, increasing in s
    let outer_s = solve_increasing(
        |s| {
            let lp = crate::special::log1p_exp(s);
            let sig = logistic(s);
            ((alpha - lf) * lp + lf * s + log_y, (alpha - lf) * sig + lf)
        },
        initial_outer_bracket(alpha, y),
    )?;
    let outer = 1.0 + outer_s.exp();

    // inner (even l): x = σ(s), g(s) = (α-l) ln σ(s) + l ln(1-σ(s)) + ln y, decreasing
    let inner = if l.is_multiple_of(2) {
        let s = solve_increasing(
            |s| {
                let log_x = -crate::special::log1p_exp(-s);
                let log_1mx = -crate::special::log1p_exp(s);
                let x = logistic(s);
                let g = (alpha - lf) * log_x + lf * log_1mx + log_y;
                // dg/ds = (α-l)(1-x) - l x; negate both to make it increasing
                (-g, -((alpha - lf) * (1.0 - x) - lf * x))
            },
            (-10.0, 10.0),
        )?;
        Some(logistic(s))
    } else {
        None
    };

    Ok(SingularitySolution {
        l,
        alpha,
        y,
        outer,
        inner,
        outside_lemma_regime: y > LEMMA_REGIME_Y,
    })
}

fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Bracket in `s = ln(x-1)` from `x ∈ [1 + 1e-12, max(2, 2 y^{-1/α})]`.
fn initial_outer_bracket(alpha: f64, y: f64) -> (f64, f64) {
    let hi_x_minus_1 = (2.0 * y.powf(-1.0 / alpha)).max(2.0) - 1.0;
    (1e-12f64.ln(), hi_x_minus_1.ln())
}

/// Root of an increasing function given as `s -> (g, g')`, expanding the
/// bracket outward until it straddles zero, then Newton steps that fall
/// back to bisection whenever they would leave the bracket.
fn solve_increasing(f: impl Fn(f64) -> (f64, f64), bracket: (f64, f64)) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    let mut width = (hi - lo).max(1.0);
    let mut expansions = 0;
    while f(lo).0 > 0.0 {
        lo -= width;
        width *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Internal("lower bracket expansion failed".into()));
        }
    }
    width = (hi - lo).max(1.0);
    while f(hi).0 < 0.0 {
        hi += width;
        width *= 2.0;
        expansions += 1;
        if expansions > 400 {
            return Err(Error::Internal("upper bracket expansion failed".into()));
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let (g, dg) = f(s);
        if g == 0.0 {
            return Ok(s);
        }
        if g < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - g / dg;
        let next = if dg > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - s).abs() <= 1e-15 * s.abs().max(1.0) || hi - lo <= 1e-15 * s.abs().max(1.0) {
            return Ok(next);
        }
        s = next;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_for_l1_alpha_half() {
        // with s = sqrt(ξ): y s² - s - y = 0
        let y: f64 = 0.5;
        let s = (1.0 + (1.0 + 4.0 * y * y).sqrt()) / (2.0 * y);
        let sol = solve_singularities(1, 0.5, y).unwrap();
        assert!((sol.outer - s * s).abs() < 1e-10);
        assert!((sol.outer - 5.8284271).abs() < 1e-6);
        assert!(sol.inner.is_none());
        assert!(sol.residual(sol.outer) <= 1e-12);
    }

    #[test]
    fn inner_root_asymptotics() {
        let y = 1e-4f64;
        let sol = solve_singularities(2, 0.5, y).unwrap();
        let inner = sol.inner.unwrap();
        let approx = y.powf(1.0 / 1.5);
        assert!((inner / approx - 1.0).abs() < 0.05, "{inner} vs {approx}");
        assert!(sol.residual(inner) <= 1e-12);
    }

    #[test]
    fn residuals_and_parity() {
        for &alpha in &[0.1, 0.3, 0.5, 0.7, 0.95] {
            for l in 1..=6u64 {
                for k in 0..=14 {
                    let y = 10f64.powi(-k) * 3.0;
                    let sol = solve_singularities(l, alpha, y).unwrap();
                    assert!(sol.outer > 1.0);
                    assert!(sol.residual(sol.outer) <= 1e-12, "l={l} a={alpha} y={y}");
                    assert_eq!(sol.inner.is_some(), l % 2 == 0);
                    if let Some(x) = sol.inner {
                        assert!(x > 0.0 && x < 1.0);
                        assert!(sol.residual(x) <= 1e-12, "inner l={l} a={alpha} y={y}");
                    }
                    assert_eq!(sol.outside_lemma_regime, y > 0.5);
                }
            }
        }
    }

    #[test]
    fn odd_l_has_negative_h_below_one() {
        for l in [1u64, 3, 5] {
            for i in 1..100 {
                let x = i as f64 / 100.0;
                let h = x.powf(0.4 - l as f64) * (x - 1.0).powi(l as i32);
                assert!(h < 0.0);
            }
        }
    }

    #[test]
    fn outer_root_scales_like_inverse_power() {
        for &alpha in &[0.3, 0.5, 0.7] {
            for l in 1..=3u64 {
                let mut prev = f64::INFINITY;
                for k in 4..=8 {
                    let y = 10f64.powi(-k);
                    let sol = solve_singularities(l, alpha, y).unwrap();
                    let dev = (sol.outer * y.powf(1.0 / alpha) - 1.0).abs();
                    assert!(dev < prev || dev < 1e-12, "alpha={alpha} l={l} k={k}");
                    prev = dev;
                }
                assert!(prev <= 1e-2, "alpha={alpha} l={l}: {prev}");
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_singularities(1, 0.5, 0.0).is_err());
        assert!(solve_singularities(1, 0.5, -1.0).is_err());
        assert!(solve_singularities(0, 0.5, 0.1).is_err());
        assert!(solve_singularities(1, 1.5, 0.1).is_err());
    }

    #[test]
    fn newton_stays_inside_bracket() {
        let f = |s: f64| (s.powi(3) - 2.0, 3.0 * s * s);
        let r = solve_increasing(f, (-5.0, 5.0)).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }
}
