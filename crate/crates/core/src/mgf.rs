//! Exact moment generating functions at `θ = 0`, evaluated as log-values.
//!
//! With `y = 1 - e^{-t}` and `y_l = α(1-α)_(l-1)/l! · (e^t - 1)`:
//!
//! ```text
//! E e^{tK_n}        = Σ_{i≥0} y^i C(αi+n-1, n-1)
//! E e^{tM_{l,n}}    = Σ_{i≤n/l} y_l^i n/(n-il+iα) C(n-il+iα, n-il)
//! E e^{tK_m^(n)}    = (1-y)^j Σ_{i≥0} y^i C(j+i-1, i) (n+iα)_(m) / n_(m)
//! E e^{tM_{l,m}^(n)} = m!/n_(m) Σ_{i≤m/l} y_l^i C(j+i-1, i) C(n+m-il+iα-1, m-il)
//! ```
//!
//! Infinite series need `|y| < 1`, i.e. `t > -ln 2`. For `t ≥ 0` all terms are
//! positive and unimodal in `i`; summation stops once the terms are past
//! their peak and below `1e-17` of the accumulated mass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_factorial, log_binom_real, log_rising, SignedLog, SignedLogSum};
use crate::{StatParams, Statistic};

/// Relative size below which a post-peak term ends an infinite series.
pub const TRUNCATION_RATIO: f64 = 1e-17;

/// Default cap on the number of terms of an infinite series.
pub const DEFAULT_MAX_TERMS: u64 = 10_000_000;

/// `1 - e^{-t}`
pub fn y_of_t(t: f64) -> f64 {
    -(-t).exp_m1()
}

/// log of `α(1-α)_(l-1)/l!`, the weight that turns `e^t - 1` into `y_l`.
pub fn log_freq_weight(l: u64, alpha: f64) -> Result<f64> {
    if l == 0 {
        return Err(Error::domain("l must be at least 1"));
    }
    Ok(alpha.ln() + log_rising(1.0 - alpha, l - 1)? - ln_factorial(l))
}

/// `y_l = α(1-α)_(l-1)/l! · y/(1-y)`, using `y/(1-y) = e^t - 1`.
pub fn y_l_of_t(t: f64, l: u64, alpha: f64) -> Result<f64> {
    Ok(log_freq_weight(l, alpha)?.exp() * t.exp_m1())
}

/// The weight a statistic's series is written in: `y` for `K`/`Kpost`,
/// `y_l` for `Ml`/`Mlpost`.
pub fn series_weight(stat: Statistic, params: &StatParams, t: f64) -> Result<f64> {
    if stat.needs_l() {
        y_l_of_t(t, params.l, params.alpha)
    } else {
        Ok(y_of_t(t))
    }
}

/// `β(n) = c (ln n)^a n^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModerationScale {
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

impl ModerationScale {
    pub fn new(c: f64, a: f64, b: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() || !a.is_finite() || !b.is_finite() {
            return Err(Error::domain(format!("invalid scale c = {c}, a = {a}, b = {b}")));
        }
        if b < 0.0 || (b == 0.0 && a <= 0.0) {
            return Err(Error::domain("beta(n) must diverge: need b > 0, or b = 0 and a > 0"));
        }
        Ok(ModerationScale { c, a, b })
    }

    /// `(ln n)^{power}`
    pub fn log_power(power: f64) -> Self {
        ModerationScale {
            c: 1.0,
            a: power,
            b: 0.0,
        }
    }

    /// Checks `b < 1 - α` so that `n^α β(n) ≪ n`.
    pub fn validate_for(&self, alpha: f64) -> Result<()> {
        if self.b >= 1.0 - alpha {
            return Err(Error::domain(format!(
                "scale exponent b = {} must be below 1 - alpha = {}",
                self.b,
                1.0 - alpha
            )));
        }
        Ok(())
    }

    pub fn beta(&self, n: u64) -> f64 {
        let nf = n as f64;
        self.c * nf.ln().powf(self.a) * nf.powf(self.b)
    }

    /// MDP speed `β(n)^{1/(1-α)}`.
    pub fn speed(&self, n: u64, alpha: f64) -> f64 {
        self.beta(n).powf(1.0 / (1.0 - alpha))
    }
}

/// The scaling bundle `(λ, n, β)` and the series argument it induces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledArgument {
    pub lambda: f64,
    pub n: u64,
    pub beta: f64,
    pub alpha: f64,
    /// `λ β^{α/(1-α)} / n^α`
    pub t: f64,
    /// `1 - e^{-t}`
    pub y: f64,
}

impl ScaledArgument {
    pub fn new(lambda: f64, n: u64, beta: f64, alpha: f64) -> Result<Self> {
        if n == 0 || !(beta > 0.0) || !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!(
                "invalid scaling n = {n}, beta = {beta}, alpha = {alpha}"
            )));
        }
        let t = lambda * beta.powf(alpha / (1.0 - alpha)) / (n as f64).powf(alpha);
        Ok(ScaledArgument {
            lambda,
            n,
            beta,
            alpha,
            t,
            y: y_of_t(t),
        })
    }

    pub fn from_scale(lambda: f64, n: u64, scale: &ModerationScale, alpha: f64) -> Result<Self> {
        scale.validate_for(alpha)?;
        Self::new(lambda, n, scale.beta(n), alpha)
    }

    /// `y_{l}` at this scale.
    pub fn y_l(&self, l: u64) -> Result<f64> {
        y_l_of_t(self.t, l, self.alpha)
    }

    /// `β^{1/(1-α)}`
    pub fn speed(&self) -> f64 {
        self.beta.powf(1.0 / (1.0 - self.alpha))
    }
}

/// Whether `M_{l,n}` keeps the factor `n/(n-il+iα)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MlMode {
    Exact,
    /// Drops `n/(n-il+iα)`; this is the form with a Cauchy-integral representation.
    Tilde,
}

/// A series evaluation and how many terms it took.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEval {
    pub log_value: f64,
    pub terms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub max_terms: u64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            max_terms: DEFAULT_MAX_TERMS,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_infinite_series_t(t: f64) -> Result<()> {
    if !t.is_finite() || t <= -std::f64::consts::LN_2 {
        return Err(Error::domain(format!("series diverges: need t > -ln 2, got t = {t}")));
    }
    Ok(())
}

/// `i·ln|w|` with the convention `0^0 = 1`.
fn log_power(log_abs_w: f64, i: u64) -> f64 {
    if i == 0 {
        0.0
    } else {
        i as f64 * log_abs_w
    }
}

/// Sum `Σ_i w^i e^{log_coeff(i)}` for `i = 0..` until the truncation rule fires.
fn infinite_series(w: f64, opts: &SeriesOptions, mut log_coeff: impl FnMut(u64) -> Result<f64>) -> Result<SeriesEval> {
    let log_abs_w = w.abs().ln();
    let mut acc = SignedLogSum::default();
    let mut prev = f64::NEG_INFINITY;
    let mut past_peak = false;
    for i in 0..opts.max_terms {
        let log_term = log_power(log_abs_w, i) + log_coeff(i)?;
        acc.add(SignedLog::new(w < 0.0 && i % 2 == 1, log_term));
        if i > 0 && log_term <= prev {
            past_peak = true;
        }
        prev = log_term;
        if past_peak && log_term < TRUNCATION_RATIO.ln() + acc.log_abs_mass() {
            return finish(acc, i + 1);
        }
    }
    Err(Error::Convergence {
        what: "infinite series",
        detail: format!("term cap {} reached", opts.max_terms),
    })
}

fn finite_series(w: f64, last: u64, mut log_coeff: impl FnMut(u64) -> Result<f64>) -> Result<SeriesEval> {
    let log_abs_w = w.abs().ln();
    let mut acc = SignedLogSum::default();
    for i in 0..=last {
        if i > 0 && w == 0.0 {
            break;
        }
        let log_term = log_power(log_abs_w, i) + log_coeff(i)?;
        acc.add(SignedLog::new(w < 0.0 && i % 2 == 1, log_term));
    }
    finish(acc, last + 1)
}

fn finish(acc: SignedLogSum, terms: u64) -> Result<SeriesEval> {
    let v = acc.value();
    if v.negative || v.log_abs == f64::NEG_INFINITY {
        return Err(Error::Convergence {
            what: "series",
            detail: "nonpositive sum (cancellation exhausted precision)".into(),
        });
    }
    Ok(SeriesEval {
        log_value: v.log_abs,
        terms,
    })
}

/// `log E e^{tK_n}`
pub fn log_mgf_k(n: u64, alpha: f64, t: f64) -> Result<f64> {
    log_mgf_k_with(n, alpha, t, &SeriesOptions::default()).map(|e| e.log_value)
}

pub fn log_mgf_k_with(n: u64, alpha: f64, t: f64, opts: &SeriesOptions) -> Result<SeriesEval> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    check_infinite_series_t(t)?;
    if t == 0.0 {
        return Ok(SeriesEval {
            log_value: 0.0,
            terms: 1,
        });
    }
    let nm1 = n - 1;
    infinite_series(y_of_t(t), opts, |i| log_binom_real(alpha * i as f64 + nm1 as f64, nm1))
}

/// `log E e^{tM_{l,n}}`, or its tilde variant.
pub fn log_mgf_ml(n: u64, l: u64, alpha: f64, t: f64, mode: MlMode) -> Result<f64> {
    log_mgf_ml_with(n, l, alpha, t, mode).map(|e| e.log_value)
}

pub fn log_mgf_ml_with(n: u64, l: u64, alpha: f64, t: f64, mode: MlMode) -> Result<SeriesEval> {
    check_alpha(alpha)?;
    if l == 0 || l > n {
        return Err(Error::domain(format!("need 1 <= l <= n, got l = {l}, n = {n}")));
    }
    if !t.is_finite() {
        return Err(Error::domain("t must be finite"));
    }
    if t == 0.0 {
        return Ok(SeriesEval {
            log_value: 0.0,
            terms: 1,
        });
    }
    let w = y_l_of_t(t, l, alpha)?;
    let nf = n as f64;
    finite_series(w, n / l, |i| {
        let top = n - i * l;
        let a = top as f64 + i as f64 * alpha;
        let factor = match mode {
            MlMode::Exact => nf.ln() - a.ln(),
            MlMode::Tilde => 0.0,
        };
        Ok(factor + log_binom_real(a, top)?)
    })
}

/// `log E[e^{tK_m^(n)} | K_n = j]`
pub fn log_mgf_k_post(n: u64, m: u64, j: u64, alpha: f64, t: f64) -> Result<f64> {
    log_mgf_k_post_with(n, m, j, alpha, t, &SeriesOptions::default()).map(|e| e.log_value)
}

pub fn log_mgf_k_post_with(n: u64, m: u64, j: u64, alpha: f64, t: f64, opts: &SeriesOptions) -> Result<SeriesEval> {
    check_alpha(alpha)?;
    if j == 0 || j > n {
        return Err(Error::domain(format!("need 1 <= j <= n, got j = {j}, n = {n}")));
    }
    check_infinite_series_t(t)?;
    if t == 0.0 || m == 0 {
        return Ok(SeriesEval {
            log_value: 0.0,
            terms: 1,
        });
    }
    let nf = n as f64;
    let base = log_rising(nf, m)?;
    let eval = infinite_series(y_of_t(t), opts, |i| {
        Ok(log_binom_real((j + i - 1) as f64, i)? + log_rising(nf + i as f64 * alpha, m)? - base)
    })?;
    // (1 - y)^j = e^{-jt}
    Ok(SeriesEval {
        log_value: eval.log_value - j as f64 * t,
        terms: eval.terms,
    })
}

/// `log E[e^{tM_{l,m}^(n)} | K_n = j]`
pub fn log_mgf_ml_post(n: u64, m: u64, j: u64, l: u64, alpha: f64, t: f64) -> Result<f64> {
    log_mgf_ml_post_with(n, m, j, l, alpha, t).map(|e| e.log_value)
}

pub fn log_mgf_ml_post_with(n: u64, m: u64, j: u64, l: u64, alpha: f64, t: f64) -> Result<SeriesEval> {
    check_alpha(alpha)?;
    if j == 0 || j > n {
        return Err(Error::domain(format!("need 1 <= j <= n, got j = {j}, n = {n}")));
    }
    if !t.is_finite() {
        return Err(Error::domain("t must be finite"));
    }
    if m == 0 {
        return Ok(SeriesEval {
            log_value: 0.0,
            terms: 1,
        });
    }
    if l == 0 || l > m {
        return Err(Error::domain(format!("need 1 <= l <= m, got l = {l}, m = {m}")));
    }
    if t == 0.0 {
        return Ok(SeriesEval {
            log_value: 0.0,
            terms: 1,
        });
    }
    let w = y_l_of_t(t, l, alpha)?;
    let prefactor = ln_factorial(m) - log_rising(n as f64, m)?;
    let eval = finite_series(w, m / l, |i| {
        let rest = m - i * l;
        let a = (n + rest) as f64 + i as f64 * alpha - 1.0;
        Ok(log_binom_real((j + i - 1) as f64, i)? + log_binom_real(a, rest)?)
    })?;
    Ok(SeriesEval {
        log_value: eval.log_value + prefactor,
        terms: eval.terms,
    })
}

/// Series value for any statistic (`Ml` in the given mode).
pub fn log_mgf(stat: Statistic, p: &StatParams, t: f64, mode: MlMode) -> Result<SeriesEval> {
    p.validate(stat)?;
    let opts = SeriesOptions::default();
    match stat {
        Statistic::K => log_mgf_k_with(p.n, p.alpha, t, &opts),
        Statistic::Ml => log_mgf_ml_with(p.n, p.l, p.alpha, t, mode),
        Statistic::Kpost => log_mgf_k_post_with(p.n, p.m, p.j, p.alpha, t, &opts),
        Statistic::Mlpost => log_mgf_ml_post_with(p.n, p.m, p.j, p.l, p.alpha, t),
    }
}

/// `E K_n = Π_{k=1}^{n-1} (1 + α/k)` at `θ = 0`.
pub fn mean_k_exact(n: u64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let log: f64 = (1..n).map(|k| (alpha / k as f64).ln_1p()).sum();
    Ok(log.exp())
}
