//! Residue-plus-Hankel decomposition of `E e^{tK_n}`.
//!
//! Deforming the `K` contour out to infinity around the cut `(-∞, 0]` picks
//! up the pole at `y^{-1/α}` and leaves a real integral along the cut:
//!
//! ```text
//! E e^{tK_n} = 1/(α(1-a)^n) - (sin απ/π) ∫_0^∞ du / ((1+au)^n u (u^{-α} + u^α - 2cos απ))
//! ```
//!
//! with `a = y^{1/α}`. The remainder is positive and stays bounded by
//! `1/α` as `n` grows, so the pole term dominates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mgf::y_of_t;
use crate::quad::{integrate, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HankelDecomposition {
    /// `ln(1/(α(1-a)^n))`
    pub log_pole_term: f64,
    /// The cut integral including its `sin απ/π` factor.
    pub remainder: f64,
    pub remainder_error: f64,
    /// `ln(pole term - remainder)`
    pub log_value: f64,
}

/// The cut integral for `E e^{tK_n}` at weight `y ∈ (0, 1)`.
pub fn hankel_remainder(n: u64, alpha: f64, y: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::domain("the cut integral needs y in (0, 1)"));
    }
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let a = y.powf(1.0 / alpha);
    let nf = n as f64;
    let c = (alpha * std::f64::consts::PI).cos();
    let opts = QuadOptions {
        rel_tol: 1e-13,
        ..Default::default()
    };
    // u ∈ (0, 1] with u = v^{1/α}
    let inner = integrate(
        |v| {
            let u = v.powf(1.0 / alpha);
            (-nf * (a * u).ln_1p()).exp() / (1.0 + v * v - 2.0 * c * v)
        },
        0.0,
        1.0,
        &opts,
    )?;
    // u ∈ [1, ∞) with u = v^{-1/α}
    let outer = integrate(
        |v| {
            if v == 0.0 {
                return 0.0;
            }
            let s = v.powf(1.0 / alpha);
            (nf * (s / (s + a)).ln()).exp() / (1.0 + v * v - 2.0 * c * v)
        },
        0.0,
        1.0,
        &opts,
    )?;
    let scale = (alpha * std::f64::consts::PI).sin() / (std::f64::consts::PI * alpha);
    Ok((scale * (inner.value + outer.value), scale * (inner.error + outer.error)))
}

pub fn hankel_decomposition(n: u64, alpha: f64, t: f64) -> Result<HankelDecomposition> {
    if !(t > 0.0) {
        return Err(Error::domain("the decomposition needs t > 0"));
    }
    let y = y_of_t(t);
    if !(y < 1.0) {
        return Err(Error::domain("t is too large for y < 1 in double precision"));
    }
    let (remainder, remainder_error) = hankel_remainder(n, alpha, y)?;
    let log_a = y.ln() / alpha;
    let log_pole_term = -alpha.ln() - n as f64 * (-log_a.exp()).ln_1p();
    let ratio = remainder * (-log_pole_term).exp();
    if !(ratio < 1.0) {
        return Err(Error::Internal(format!("remainder {remainder} exceeds the pole term")));
    }
    Ok(HankelDecomposition {
        log_pole_term,
        remainder,
        remainder_error,
        log_value: log_pole_term + (-ratio).ln_1p(),
    })
}
