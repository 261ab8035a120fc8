//! Leading terms, limiting log-Laplace transforms and rate functions.
//!
//! The leading term of each moment generating function is minus the residue
//! of its integrand at the dominant pole (`y^{-1/α}`, or the outer root of
//! `1 - y_l ξ^{α-l}(ξ-1)^l`). For `K` and `Ml` the pole is simple and the
//! residue has a closed form. The posterior poles have order `j`; their
//! residue is computed from Taylor coefficients at the pole, with the
//! reciprocal `(ξ-P)^j / D(ξ)^j` expanded by [`recip_deriv`].

use serde::{Deserialize, Serialize};

use crate::contour::{dominant_pole, log_prefactor};
use crate::error::{Error, Result};
use crate::mgf::{log_freq_weight, series_weight};
use crate::special::{binomial_series, ln_factorial, recip_deriv, series_mul, series_pow, PowerSeriesHead, SignedLog};
use crate::{StatParams, Statistic};

fn check_t(stat: Statistic, p: &StatParams, t: f64) -> Result<f64> {
    p.validate(stat)?;
    if !(t > 0.0) {
        return Err(Error::domain("leading terms need t > 0"));
    }
    if stat.is_posterior() && p.m == 0 {
        return Err(Error::domain("posterior leading terms need m >= 1"));
    }
    let w = series_weight(stat, p, t)?;
    if !stat.needs_l() && !(w < 1.0) {
        return Err(Error::domain("need y < 1"));
    }
    Ok(w)
}

/// Residue of the integrand of `stat` at its dominant pole, for weight `w`.
pub fn dominant_residue(stat: Statistic, p: &StatParams, w: f64) -> Result<SignedLog> {
    p.validate(stat)?;
    let pole = dominant_pole(stat, p, w)?;
    let (a, b, order) = match stat {
        Statistic::K => ((p.n - 1) as f64, p.n as f64, 1usize),
        Statistic::Ml => (p.n as f64, (p.n + 1) as f64, 1),
        Statistic::Kpost | Statistic::Mlpost => ((p.n + p.m - 1) as f64, (p.m + 1) as f64, p.j as usize),
    };
    let len = order + 1;
    // H(P+h) = P^a (P-1)^{-b} (1+h/P)^a (1+h/(P-1))^{-b}
    let log_h0 = a * pole.ln() - b * (pole - 1.0).ln();
    let h = series_mul(
        &binomial_series(a, pole, len),
        &binomial_series(-b, pole - 1.0, len),
        len,
    );
    // D(P+h) = 1 - ψ(P+h)/ψ(P), since w ψ(P) = 1
    let psi = if stat.needs_l() {
        let l = p.l as f64;
        series_mul(
            &binomial_series(p.alpha - l, pole, len),
            &binomial_series(l, pole - 1.0, len),
            len,
        )
    } else {
        binomial_series(p.alpha, pole, len)
    };
    // F(h) = D(P+h)/h
    let f: Vec<f64> = (0..order).map(|k| -psi[k + 1]).collect();
    let fj = series_pow(&f, order as u32, order);
    let head = PowerSeriesHead::from_taylor(order as u32, &fj)?;
    let mut sum = 0.0;
    for k in 0..order {
        let g_k = recip_deriv(&head, k as u32)? / ln_factorial(k as u64).exp();
        sum += h[order - 1 - k] * g_k;
    }
    Ok(SignedLog::new(sum < 0.0, log_h0 + sum.abs().ln()))
}

/// Log of the leading term: minus the dominant residue times the
/// statistic's prefactor. For `Ml` the integrand is the tilde one.
pub fn leading_log_mgf(stat: Statistic, p: &StatParams, t: f64) -> Result<f64> {
    let w = check_t(stat, p, t)?;
    match stat {
        Statistic::K => {
            let log_a = w.ln() / p.alpha;
            Ok(-p.alpha.ln() - p.n as f64 * (-log_a.exp()).ln_1p())
        }
        Statistic::Ml => {
            let xi = dominant_pole(stat, p, w)?;
            let (n, l, a) = (p.n as f64, p.l as f64, p.alpha);
            Ok((n + l - a + 1.0) * xi.ln() - w.ln() - (n + l) * (xi - 1.0).ln() - (a * xi + l - a).ln())
        }
        Statistic::Kpost | Statistic::Mlpost => {
            let res = dominant_residue(stat, p, w)?;
            if !res.negative {
                // happens when m is small next to the pole's distance from 1
                return Err(Error::Convergence {
                    what: "leading term",
                    detail: "dominant residue is not negative; m is too small for this t".into(),
                });
            }
            Ok(res.log_abs + log_prefactor(stat, p, t)?)
        }
    }
}

/// The large-`m` displays for the posterior leading terms, with `y` (or the
/// outer root `ξ`) at the given `t`. `K` and `Ml` return [`leading_log_mgf`].
pub fn display_log_mgf(stat: Statistic, p: &StatParams, t: f64) -> Result<f64> {
    let w = check_t(stat, p, t)?;
    let (n, m, j, a) = (p.n as f64, p.m as f64, p.j as f64, p.alpha);
    let head = -(ln_factorial(p.j - 1) + j * a.ln());
    match stat {
        Statistic::K | Statistic::Ml => leading_log_mgf(stat, p, t),
        Statistic::Kpost => {
            let r = w.powf(1.0 / a);
            Ok(head - (m + j) * (-r).ln_1p() - (n - 1.0) * (m * r).ln())
        }
        Statistic::Mlpost => {
            let xi = dominant_pole(stat, p, w)?;
            Ok(head - (n - j) * (m / xi).ln() - (m + j) * (-1.0 / xi).ln_1p())
        }
    }
}

/// `α(1-α)_(l-1)/l!`
fn freq_weight(l: u64, alpha: f64) -> Result<f64> {
    Ok(log_freq_weight(l, alpha)?.exp())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Limiting log-Laplace transform: `λ^{1/α}` (K, Kpost) or
/// `(α(1-α)_(l-1) λ / l!)^{1/α}` (Ml, Mlpost) for `λ > 0`, zero otherwise.
pub fn psi(stat: Statistic, lambda: f64, alpha: f64, l: u64) -> Result<f64> {
    check_alpha(alpha)?;
    if lambda <= 0.0 {
        return Ok(0.0);
    }
    let scale = if stat.needs_l() { freq_weight(l, alpha)? } else { 1.0 };
    Ok((scale * lambda).powf(1.0 / alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub x: f64,
    /// `+∞` off the finite domain.
    pub value: f64,
}

fn rate_k(x: f64, alpha: f64) -> f64 {
    if x < 0.0 {
        return f64::INFINITY;
    }
    if x == 0.0 {
        return 0.0;
    }
    (1.0 - alpha) * alpha.powf(alpha / (1.0 - alpha)) * x.powf(1.0 / (1.0 - alpha))
}

/// Rate function: the Legendre transform of [`psi`]. Finite on `x ≥ 0`.
/// For `Ml`/`Mlpost` it is the `K` rate at `x` divided by `α(1-α)_(l-1)/l!`.
pub fn rate(stat: Statistic, x: f64, alpha: f64, l: u64) -> Result<RatePoint> {
    check_alpha(alpha)?;
    let arg = if stat.needs_l() { x / freq_weight(l, alpha)? } else { x };
    Ok(RatePoint {
        x,
        value: rate_k(arg, alpha),
    })
}

/// `I_l(x) = (1-α)(l!/(1-α)_(l-1))^{α/(1-α)} x^{1/(1-α)}` on `x ≥ 0`, the
/// constant as printed with the moderate-deviation statement. It is not the
/// Legendre transform of `ψ_l` (for `l = 1`, `α = 1/2` it gives `x²/2`, the
/// transform gives `x²`). Kept for comparison with [`rate`].
pub fn printed_rate_l(x: f64, alpha: f64, l: u64) -> Result<RatePoint> {
    check_alpha(alpha)?;
    let log_c = ln_factorial(l) - crate::special::log_rising(1.0 - alpha, l.saturating_sub(1))?;
    let value = if x < 0.0 {
        f64::INFINITY
    } else if x == 0.0 {
        0.0
    } else {
        (1.0 - alpha) * (alpha / (1.0 - alpha) * log_c).exp() * x.powf(1.0 / (1.0 - alpha))
    };
    Ok(RatePoint { x, value })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegendreEstimate {
    pub value: f64,
    /// Maximising `λ`; `0` when the supremum sits at the boundary.
    pub lambda: f64,
    /// The maximum kept moving with `λ_max` for 60 doublings.
    pub unbounded: bool,
}

const GRID_POINTS: usize = 400;
const LAMBDA_MIN: f64 = 1e-6;

/// `sup_{λ>0} (λx - ψ(λ))` over a geometric grid in `[1e-6, λ_max]`,
/// growing `λ_max` until the maximiser is interior, then refined by
/// golden-section search. The boundary value `0` (as `λ → 0`) is included.
pub fn legendre_numeric(psi: impl Fn(f64) -> f64, x: f64) -> LegendreEstimate {
    let obj = |lam: f64| lam * x - psi(lam);
    let mut lambda_max = 1.0f64;
    for doubling in 0..=60 {
        let ratio = (lambda_max / LAMBDA_MIN).ln() / (GRID_POINTS - 1) as f64;
        let grid = |i: usize| LAMBDA_MIN * (ratio * i as f64).exp();
        let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
        for i in 0..GRID_POINTS {
            let v = obj(grid(i));
            if v > best {
                best = v;
                best_i = i;
            }
        }
        if best_i == GRID_POINTS - 1 {
            if doubling == 60 {
                return LegendreEstimate {
                    value: f64::INFINITY,
                    lambda: lambda_max,
                    unbounded: true,
                };
            }
            lambda_max *= 2.0;
            continue;
        }
        if best <= 0.0 && best_i == 0 {
            return LegendreEstimate {
                value: 0.0,
                lambda: 0.0,
                unbounded: false,
            };
        }
        let (lam, v) = golden_max(&obj, grid(best_i.saturating_sub(1)), grid(best_i + 1));
        let (lam, v) = if v >= best { (lam, v) } else { (grid(best_i), best) };
        if v <= 0.0 {
            return LegendreEstimate {
                value: 0.0,
                lambda: 0.0,
                unbounded: false,
            };
        }
        return LegendreEstimate {
            value: v,
            lambda: lam,
            unbounded: false,
        };
    }
    unreachable!()
}

fn golden_max(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a <= 1e-15 * b.abs() {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let m = 0.5 * (a + b);
    (m, f(m))
}
