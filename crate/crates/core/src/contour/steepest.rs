//! Steepest-descent contour for the posterior integrands.
//!
//! With `p = (n+m-1)/(m+1)` the curve `ξ(θ) = R(θ) e^{iθ}`,
//! `R(θ) = sin(pθ)/sin((p-1)θ)`, `|θ| ≤ π/p`, is the level set of
//! `arg(ξ^{n+m-1}/(ξ-1)^{m+1})` through the saddle `p/(p-1)`. It runs from
//! the origin around the saddle and back, enclosing 1 and every pole on
//! `(1, p/(p-1))`. Needs `n ≥ 3` so that `p > 1`.
//!
//! Used only for diagnostics: the identity against the circle integral and
//! the split of the modulus bound at an angle `θ_m`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::integrand_log;
use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};
use crate::special::SignedLog;
use crate::{StatParams, Statistic};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteepestContour {
    pub n: u64,
    pub m: u64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteepestPoint {
    pub theta: f64,
    pub r: f64,
    pub dr: f64,
    /// `ln|ξ^{n+m-1}/(ξ-1)^{m+1}|`
    pub h: f64,
}

impl SteepestContour {
    pub fn new(n: u64, m: u64) -> Result<Self> {
        if n < 3 {
            return Err(Error::domain("the steepest-descent contour needs n >= 3"));
        }
        let p = (n + m - 1) as f64 / (m + 1) as f64;
        Ok(SteepestContour { n, m, p })
    }

    pub fn theta_max(&self) -> f64 {
        std::f64::consts::PI / self.p
    }

    /// The saddle `p/(p-1)` where the curve crosses the positive axis.
    pub fn saddle(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn point(&self, theta: f64) -> Result<SteepestPoint> {
        let th = theta.abs();
        if th > self.theta_max() {
            return Err(Error::domain(format!(
                "|theta| must not exceed pi/p = {}",
                self.theta_max()
            )));
        }
        let p = self.p;
        let (r, dr) = if th < 1e-8 {
            (self.saddle(), 0.0)
        } else {
            let s = ((p - 1.0) * th).sin();
            let r = (p * th).sin() / s;
            let dr = ((2.0 * p - 1.0) * th).sin() - (2.0 * p - 1.0) * th.sin();
            (r, dr / (2.0 * s * s))
        };
        let r = r.max(0.0);
        let a = (self.n + self.m - 1) as f64;
        let b = (self.m + 1) as f64;
        let h = a * r.ln() - 0.5 * b * (1.0 + r * r - 2.0 * r * th.cos()).ln();
        Ok(SteepestPoint {
            theta,
            r,
            dr: dr * theta.signum(),
            h,
        })
    }
}

fn check_stat(stat: Statistic) -> Result<()> {
    if !stat.is_posterior() {
        return Err(Error::domain(
            "the steepest-descent contour is set up for Kpost and Mlpost",
        ));
    }
    Ok(())
}

/// `(1/2πi)∮ f dξ` along the steepest-descent curve, scaled to avoid overflow.
pub fn steepest_integral(stat: Statistic, p: &StatParams, w: f64) -> Result<SignedLog> {
    check_stat(stat)?;
    p.validate(stat)?;
    let c = SteepestContour::new(p.n, p.m)?;
    let x0 = Complex64::new(c.saddle(), 0.0);
    let shift = integrand_log(stat, x0, p, w)?.log_abs + c.saddle().ln();
    let f = |theta: f64| -> f64 {
        let pt = match c.point(theta) {
            Ok(pt) if pt.r > 0.0 => pt,
            _ => return 0.0,
        };
        let e = Complex64::from_polar(1.0, theta);
        let xi = e * pt.r;
        let dxi = e * Complex64::new(pt.dr, pt.r);
        match integrand_log(stat, xi, p, w) {
            Ok(lf) => (lf.log() + dxi.ln() - shift).exp().im,
            Err(_) => f64::NAN,
        }
    };
    let opts = QuadOptions {
        rel_tol: 1e-12,
        ..Default::default()
    };
    let r = integrate(f, 0.0, c.theta_max(), &opts)?;
    let v = r.value / std::f64::consts::PI;
    Ok(SignedLog::new(v < 0.0, v.abs().ln() + shift))
}

/// The bound `(1/π)∫ e^{h(θ)} (|R| + |R'|) / |D(ξ)|^j dθ`, split at `θ_m`
/// into the parts over `[θ_m, π/p]` and `[0, θ_m]`, as log-values.
pub fn bound_split(stat: Statistic, p: &StatParams, w: f64, theta_m: f64) -> Result<(f64, f64)> {
    check_stat(stat)?;
    p.validate(stat)?;
    let c = SteepestContour::new(p.n, p.m)?;
    if !(theta_m >= 0.0 && theta_m <= c.theta_max()) {
        return Err(Error::domain("theta_m must lie in [0, pi/p]"));
    }
    let x0 = Complex64::new(c.saddle(), 0.0);
    let shift = integrand_log(stat, x0, p, w)?.log_abs + c.saddle().ln();
    let f = |theta: f64| -> f64 {
        let pt = match c.point(theta) {
            Ok(pt) if pt.r > 0.0 => pt,
            _ => return 0.0,
        };
        let xi = Complex64::from_polar(pt.r, theta);
        match integrand_log(stat, xi, p, w) {
            Ok(lf) => (lf.log_abs - shift).exp() * (pt.r + pt.dr.abs()),
            Err(_) => f64::NAN,
        }
    };
    let opts = QuadOptions {
        rel_tol: 1e-10,
        ..Default::default()
    };
    let outer = integrate(f, theta_m, c.theta_max(), &opts)?.value / std::f64::consts::PI;
    let inner = integrate(f, 0.0, theta_m, &opts)?.value / std::f64::consts::PI;
    Ok((outer.ln() + shift, inner.ln() + shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{circle_integral_auto, residue_numeric};
    use crate::mgf::{series_weight, y_of_t};

    #[test]
    fn curve_shape() {
        let c = SteepestContour::new(5, 10).unwrap();
        let p0 = c.point(0.0).unwrap();
        assert!((p0.r - c.saddle()).abs() < 1e-12);
        let end = c.point(c.theta_max()).unwrap();
        assert!(end.r.abs() < 1e-12);
        // the argument of ξ^{n+m-1}/(ξ-1)^{m+1} is constant (zero) along the curve
        for i in 1..20 {
            let th = c.theta_max() * i as f64 / 20.0;
            let pt = c.point(th).unwrap();
            let xi = Complex64::from_polar(pt.r, th);
            let g = xi.ln() * 14.0 - (xi - 1.0).ln() * 11.0;
            let arg = g.im.rem_euclid(std::f64::consts::PI);
            assert!(arg.min(std::f64::consts::PI - arg) < 1e-9, "theta={th} arg={}", g.im);
        }
        assert!(SteepestContour::new(2, 10).is_err());
        assert!(c.point(4.0).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let c = SteepestContour::new(4, 7).unwrap();
        for i in 1..10 {
            let th = c.theta_max() * i as f64 / 11.0;
            let h = 1e-6;
            let fd = (c.point(th + h).unwrap().r - c.point(th - h).unwrap().r) / (2.0 * h);
            assert!((fd - c.point(th).unwrap().dr).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn steepest_equals_circle_plus_residue() {
        let p = StatParams::kpost(3, 20, 2, 0.5);
        let t = 0.5;
        let w = y_of_t(t);
        let st = steepest_integral(Statistic::Kpost, &p, w).unwrap().to_f64();
        let circle = circle_integral_auto(Statistic::Kpost, &p, w).unwrap().log_value.exp();
        let pole = w.powf(-2.0);
        let f = |xi: Complex64| integrand_log(Statistic::Kpost, xi, &p, w);
        let res = residue_numeric(&f, Complex64::new(pole, 0.0), 2, 0.25 * (pole - 1.0)).unwrap();
        let want = circle + res.value.to_complex().re;
        assert!((st - want).abs() < 1e-8 * circle.abs().max(st.abs()), "{st} vs {want}");
    }

    #[test]
    fn bound_split_dominates() {
        let p = StatParams::mlpost(4, 30, 2, 1, 0.5);
        let w = series_weight(Statistic::Mlpost, &p, 0.2).unwrap();
        let c = SteepestContour::new(4, 30).unwrap();
        let (a, b) = bound_split(Statistic::Mlpost, &p, w, 0.3 * c.theta_max()).unwrap();
        let (a0, b0) = bound_split(Statistic::Mlpost, &p, w, 0.0).unwrap();
        let total = (a.exp() + b.exp()).ln();
        assert!((total - a0).abs() < 1e-8);
        assert_eq!(b0, f64::NEG_INFINITY);
        let st = steepest_integral(Statistic::Mlpost, &p, w).unwrap();
        assert!(st.log_abs <= a0 + 1e-9);
    }
}
