//! Cauchy-integral representations of the moment generating functions.
//!
//! All four integrands share the shape
//!
//! ```text
//! ξ^a / ((ξ-1)^b D(ξ)^e),   D(ξ) = 1 - w ξ^α            (K, Kpost)
//!                           D(ξ) = 1 - w ξ^{α-l}(ξ-1)^l (Ml, Mlpost)
//! ```
//!
//! with `(a, b, e)` equal to `(n-1, n, 1)` for `K`, `(n, n+1, 1)` for `Ml`
//! and `(n+m-1, m+1, j)` for the posterior statistics. The `Ml` integral
//! reproduces the tilde series (it lacks the `n/(n-il+iα)` factor).
//!
//! The contour around `ξ = 1` is parametrised through `u = 1 - 1/ξ`. The
//! circle `|u| = ρ` is the `ξ`-circle with centre `1/(1-ρ²)` and radius
//! `ρ/(1-ρ²)`; it stays in `Re ξ > 1/2`, away from the branch cut, and
//! shrinks to the small circle about 1 as `ρ → 0`. In `u` the integral is a
//! Taylor coefficient, so the trapezoid rule converges geometrically and
//! `ρ` can be chosen to balance the size of the summands against the result.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mgf::series_weight;
use crate::roots::solve_singularities;
use crate::special::{ln_factorial, log_binom_real, log_rising};
use crate::{StatParams, Statistic};

pub mod hankel;
pub mod steepest;

/// `|D(ξ)|` below which an evaluation point counts as sitting on a pole.
pub const POLE_TOLERANCE: f64 = 1e-13;

/// Largest trapezoid node count tried.
pub const MAX_NODES: usize = 1 << 20;

/// Successive node-count doublings must agree to this in log-value.
pub const NODE_TOLERANCE: f64 = 1e-10;

/// Largest allowed `|Im| / |Re|` of a real-valued contour integral.
pub const IMAG_TOLERANCE: f64 = 1e-9;

/// A complex number held as its principal logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogComplex {
    pub log_abs: f64,
    pub arg: f64,
}

impl LogComplex {
    pub fn from_log(log: Complex64) -> Self {
        LogComplex {
            log_abs: log.re,
            arg: wrap_angle(log.im),
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z == Complex64::new(0.0, 0.0) {
            return LogComplex {
                log_abs: f64::NEG_INFINITY,
                arg: 0.0,
            };
        }
        LogComplex {
            log_abs: z.norm().ln(),
            arg: z.arg(),
        }
    }

    pub fn log(self) -> Complex64 {
        Complex64::new(self.log_abs, self.arg)
    }

    /// The value itself; overflows to infinity for large magnitudes.
    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.log_abs.exp(), self.arg)
    }

    pub fn re(self) -> f64 {
        self.log_abs.exp() * self.arg.cos()
    }
}

fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::PI;
    if x > -PI && x <= PI {
        return x;
    }
    let r = (x + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Running sum of complex numbers given by their logarithms.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ComplexLogSum {
    shift: f64,
    sum: Complex64,
}

impl Default for ComplexLogSum {
    fn default() -> Self {
        ComplexLogSum {
            shift: f64::NEG_INFINITY,
            sum: Complex64::new(0.0, 0.0),
        }
    }
}

impl ComplexLogSum {
    pub(crate) fn add(&mut self, log: Complex64) {
        if log.re == f64::NEG_INFINITY {
            return;
        }
        if log.re > self.shift {
            if self.shift > f64::NEG_INFINITY {
                self.sum *= (self.shift - log.re).exp();
            }
            self.shift = log.re;
        }
        self.sum += Complex64::new(log.re - self.shift, log.im).exp();
    }

    pub(crate) fn merge(&mut self, other: &ComplexLogSum) {
        if other.shift == f64::NEG_INFINITY {
            return;
        }
        self.add(Complex64::new(other.shift, 0.0) + other.sum.ln());
    }

    /// Largest `log|term|` seen.
    pub(crate) fn peak(&self) -> f64 {
        self.shift
    }

    /// `(log|Σ| , Σ / e^{peak})`
    pub(crate) fn finish(&self) -> (f64, Complex64) {
        (self.shift + self.sum.norm().ln(), self.sum)
    }
}

/// Exponents `(a, b, e)` of `ξ^a (ξ-1)^{-b} D^{-e}`.
fn exponents(stat: Statistic, p: &StatParams) -> (f64, f64, f64) {
    match stat {
        Statistic::K => ((p.n - 1) as f64, p.n as f64, 1.0),
        Statistic::Ml => (p.n as f64, (p.n + 1) as f64, 1.0),
        Statistic::Kpost | Statistic::Mlpost => ((p.n + p.m - 1) as f64, (p.m + 1) as f64, p.j as f64),
    }
}

/// Power of `u` extracted by the contour integral.
pub fn coefficient_index(stat: Statistic, p: &StatParams) -> u64 {
    match stat {
        Statistic::K => p.n - 1,
        Statistic::Ml => p.n,
        Statistic::Kpost | Statistic::Mlpost => p.m,
    }
}

/// `log D(ξ)` from `ln ξ` and `ln(ξ-1)`, with the pole-proximity check.
fn log_denominator(
    stat: Statistic,
    p: &StatParams,
    w: f64,
    ln_xi: Complex64,
    ln_xm1: Complex64,
    xi: Complex64,
) -> Result<Complex64> {
    if w == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let ln_w = Complex64::new(w, 0.0).ln();
    let log_z = if stat.needs_l() {
        let l = p.l as f64;
        ln_w + ln_xi * (p.alpha - l) + ln_xm1 * l
    } else {
        ln_w + ln_xi * p.alpha
    };
    let d = Complex64::new(1.0, 0.0) - log_z.exp();
    let mag = d.norm();
    if !(mag >= POLE_TOLERANCE) {
        return Err(Error::PoleProximity {
            re: xi.re,
            im: xi.im,
            magnitude: mag,
        });
    }
    Ok(d.ln())
}

fn log_integrand_parts(
    stat: Statistic,
    p: &StatParams,
    w: f64,
    ln_xi: Complex64,
    ln_xm1: Complex64,
    xi: Complex64,
) -> Result<Complex64> {
    let (a, b, e) = exponents(stat, p);
    let ln_d = log_denominator(stat, p, w, ln_xi, ln_xm1, xi)?;
    Ok(ln_xi * a - ln_xm1 * b - ln_d * e)
}

/// Log of the integrand of `stat` at `ξ` for series weight `w` (`y` or `y_l`).
pub fn integrand_log(stat: Statistic, xi: Complex64, p: &StatParams, w: f64) -> Result<LogComplex> {
    p.validate(stat)?;
    if xi.norm() == 0.0 || (xi - 1.0).norm() == 0.0 {
        return Err(Error::domain("the integrand is singular at xi = 0 and xi = 1"));
    }
    if xi.im == 0.0 && xi.re < 0.0 {
        return Err(Error::domain("xi lies on the branch cut (-inf, 0]"));
    }
    let ln_xi = xi.ln();
    let ln_xm1 = (xi - 1.0).ln();
    log_integrand_parts(stat, p, w, ln_xi, ln_xm1, xi).map(LogComplex::from_log)
}

/// Log of the constant that turns the contour integral into the moment
/// generating function (`0` for `K` and `Ml`).
pub fn log_prefactor(stat: Statistic, p: &StatParams, t: f64) -> Result<f64> {
    match stat {
        Statistic::K | Statistic::Ml => Ok(0.0),
        Statistic::Kpost => Ok(-(p.j as f64) * t - log_binom_real((p.n + p.m - 1) as f64, p.m)?),
        Statistic::Mlpost => Ok(ln_factorial(p.m) - log_rising(p.n as f64, p.m)?),
    }
}

/// The contour `|1 - 1/ξ| = ρ`, sampled at `nodes` equally spaced angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleContour {
    pub rho: f64,
    pub nodes: usize,
}

impl CircleContour {
    pub fn new(rho: f64, nodes: usize) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::domain(format!("rho must lie in (0, 1), got {rho}")));
        }
        if nodes < 4 {
            return Err(Error::domain("need at least 4 nodes"));
        }
        Ok(CircleContour { rho, nodes })
    }

    /// Centre of the contour in the `ξ`-plane.
    pub fn xi_center(&self) -> f64 {
        1.0 / (1.0 - self.rho * self.rho)
    }

    /// Radius of the contour in the `ξ`-plane.
    pub fn xi_radius(&self) -> f64 {
        self.rho / (1.0 - self.rho * self.rho)
    }
}

/// `ρ` below which the circle `|u| = ρ` encloses no zero of `D`.
pub fn zero_free_radius(stat: Statistic, p: &StatParams, w: f64) -> Result<f64> {
    if w == 0.0 {
        return Ok(1.0);
    }
    if stat.needs_l() {
        let sol = solve_singularities(p.l, p.alpha, w.abs())?;
        Ok(1.0 / sol.outer * (sol.outer - 1.0))
    } else {
        Ok(1.0 - w.abs().powf(1.0 / p.alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleEstimate {
    /// Log of the (real, positive) integral `(1/2πi)∮ f dξ`.
    pub log_value: f64,
    pub contour: CircleContour,
    /// `|Im| / |Re|` of the trapezoid sum.
    pub imag_ratio: f64,
    /// Log of the largest summand minus `log_value`: digits lost to cancellation.
    pub log_condition: f64,
}

/// Trapezoid sum of the summands `f(ξ) ξ² u` at angles `2π(k + offset)/nodes`.
fn trapezoid_sum(
    stat: Statistic,
    p: &StatParams,
    w: f64,
    rho: f64,
    nodes: usize,
    stride: usize,
    offset: usize,
) -> Result<ComplexLogSum> {
    let mut acc = ComplexLogSum::default();
    let ln_rho = rho.ln();
    let mut k = offset;
    while k < nodes {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / nodes as f64;
        let u = Complex64::from_polar(rho, theta);
        let ln_1mu = (Complex64::new(1.0, 0.0) - u).ln();
        let ln_u = Complex64::new(ln_rho, theta);
        let ln_xi = -ln_1mu;
        let ln_xm1 = ln_u - ln_1mu;
        let xi = Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) - u);
        let lf = log_integrand_parts(stat, p, w, ln_xi, ln_xm1, xi)?;
        acc.add(lf + ln_xi * 2.0 + ln_u);
        k += stride;
    }
    Ok(acc)
}

fn finish_estimate(acc: &ComplexLogSum, contour: CircleContour) -> Result<CircleEstimate> {
    let (_, scaled) = acc.finish();
    if !(scaled.re > 0.0) {
        return Err(Error::Quadrature(format!(
            "contour sum has nonpositive real part ({:e})",
            scaled.re
        )));
    }
    let imag_ratio = (scaled.im / scaled.re).abs();
    if imag_ratio > IMAG_TOLERANCE {
        return Err(Error::Quadrature(format!("imaginary part ratio {imag_ratio:e}")));
    }
    let log_value = acc.peak() + scaled.re.ln() - (contour.nodes as f64).ln();
    Ok(CircleEstimate {
        log_value,
        contour,
        imag_ratio,
        log_condition: acc.peak() - (log_value + (contour.nodes as f64).ln()),
    })
}

/// `(1/2πi)∮ f dξ` on a fixed contour.
pub fn circle_integral(stat: Statistic, p: &StatParams, w: f64, contour: &CircleContour) -> Result<CircleEstimate> {
    p.validate(stat)?;
    let rho_max = zero_free_radius(stat, p, w)?;
    if contour.rho >= rho_max {
        return Err(Error::domain(format!(
            "rho = {} does not lie inside the zero-free radius {rho_max}",
            contour.rho
        )));
    }
    let acc = trapezoid_sum(stat, p, w, contour.rho, contour.nodes, 1, 0)?;
    finish_estimate(&acc, *contour)
}

/// Largest summand magnitude over a coarse set of angles.
fn log_peak(stat: Statistic, p: &StatParams, w: f64, rho: f64) -> Result<f64> {
    Ok(trapezoid_sum(stat, p, w, rho, 64, 1, 0)?.peak())
}

/// `ρ` minimising the largest trapezoid summand. `log M(ρ) - N ln ρ` is
/// convex in `ln ρ`, so a golden-section search suffices.
pub fn choose_radius(stat: Statistic, p: &StatParams, w: f64) -> Result<f64> {
    let rho_max = zero_free_radius(stat, p, w)?;
    let big_n = coefficient_index(stat, p) as f64;
    let hi = (rho_max * (1.0 - 0.5 / (big_n + 2.0))).ln();
    let lo = (rho_max * 1e-4).ln();
    let phi = |s: f64| log_peak(stat, p, w, s.exp());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (phi(c)?, phi(d)?);
    for _ in 0..60 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = phi(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = phi(d)?;
        }
        if b - a < 1e-4 {
            break;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// `(1/2πi)∮ f dξ` with the radius chosen automatically and the node count
/// doubled until successive log-values agree to `NODE_TOLERANCE`.
pub fn circle_integral_auto(stat: Statistic, p: &StatParams, w: f64) -> Result<CircleEstimate> {
    p.validate(stat)?;
    let rho = choose_radius(stat, p, w)?;
    let big_n = coefficient_index(stat, p) as usize;
    let mut nodes = (4 * (big_n + 1)).max(64).next_power_of_two();
    let mut acc = trapezoid_sum(stat, p, w, rho, nodes, 1, 0)?;
    let mut prev = finish_estimate(&acc, CircleContour { rho, nodes })?;
    while nodes < MAX_NODES {
        // the new nodes are the odd ones of the doubled grid
        let fresh = trapezoid_sum(stat, p, w, rho, 2 * nodes, 2, 1)?;
        acc.merge(&fresh);
        nodes *= 2;
        let est = finish_estimate(&acc, CircleContour { rho, nodes })?;
        if (est.log_value - prev.log_value).abs() < NODE_TOLERANCE {
            return Ok(est);
        }
        prev = est;
    }
    Err(Error::Convergence {
        what: "circle quadrature",
        detail: format!("no agreement to {NODE_TOLERANCE:e} with {MAX_NODES} nodes"),
    })
}

/// The moment generating function evaluated through the contour integral.
/// For `Ml` this is the tilde variant.
pub fn contour_log_mgf(stat: Statistic, p: &StatParams, t: f64) -> Result<CircleEstimate> {
    p.validate(stat)?;
    if stat.is_posterior() && p.m == 0 {
        return Err(Error::domain("posterior contour integrals need m >= 1"));
    }
    if !stat.needs_l() && t <= -(2f64.ln()) {
        return Err(Error::domain("the series weight y must lie in (-1, 1)"));
    }
    let w = series_weight(stat, p, t)?;
    let mut est = circle_integral_auto(stat, p, w)?;
    est.log_value += log_prefactor(stat, p, t)?;
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidueEstimate {
    pub value: LogComplex,
    pub nodes: usize,
    /// Relative disagreement between the estimates at `r` and `r/2`.
    pub radius_check: f64,
}

fn residue_at_radius(
    f: &dyn Fn(Complex64) -> Result<LogComplex>,
    pole: Complex64,
    radius: f64,
    start_nodes: usize,
) -> Result<(Complex64, usize)> {
    let ring = |nodes: usize, stride: usize, offset: usize| -> Result<ComplexLogSum> {
        let mut acc = ComplexLogSum::default();
        let mut k = offset;
        while k < nodes {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / nodes as f64;
            let h = Complex64::from_polar(radius, theta);
            acc.add(f(pole + h)?.log() + Complex64::new(radius.ln(), theta));
            k += stride;
        }
        Ok(acc)
    };
    let value = |acc: &ComplexLogSum, nodes: usize| {
        let (_, s) = acc.finish();
        s * (acc.peak() - (nodes as f64).ln()).exp()
    };
    let mut nodes = start_nodes;
    let mut acc = ring(nodes, 1, 0)?;
    let mut prev = value(&acc, nodes);
    while nodes < MAX_NODES {
        acc.merge(&ring(2 * nodes, 2, 1)?);
        nodes *= 2;
        let v = value(&acc, nodes);
        if (v - prev).norm() <= 1e-12 * v.norm() {
            return Ok((v, nodes));
        }
        prev = v;
    }
    Err(Error::Convergence {
        what: "residue quadrature",
        detail: format!("no agreement with {MAX_NODES} nodes"),
    })
}

/// Residue of `f` at `pole` (of the given order) by the trapezoid rule on a
/// circle of the given radius, cross-checked at half the radius.
pub fn residue_numeric(
    f: &dyn Fn(Complex64) -> Result<LogComplex>,
    pole: Complex64,
    order: u32,
    radius: f64,
) -> Result<ResidueEstimate> {
    if !(radius > 0.0) || order == 0 {
        return Err(Error::domain("need a positive radius and order >= 1"));
    }
    let start = (16 * order as usize).max(64).next_power_of_two();
    let (v, nodes) = residue_at_radius(f, pole, radius, start)?;
    let (v_half, _) = residue_at_radius(f, pole, 0.5 * radius, start)?;
    let radius_check = (v - v_half).norm() / v.norm();
    if !(radius_check <= 1e-6) {
        return Err(Error::Quadrature(format!(
            "residue depends on the radius (relative change {radius_check:e}); \
             another singularity lies inside or the order is wrong"
        )));
    }
    Ok(ResidueEstimate {
        value: LogComplex::from_complex(v),
        nodes,
        radius_check,
    })
}

/// Dominant pole of the integrand on `(1, ∞)` for series weight `w > 0`.
pub fn dominant_pole(stat: Statistic, p: &StatParams, w: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::domain("the dominant pole exists only for a positive weight"));
    }
    if stat.needs_l() {
        Ok(solve_singularities(p.l, p.alpha, w)?.outer)
    } else {
        if w >= 1.0 {
            return Err(Error::domain("need y < 1"));
        }
        Ok(w.powf(-1.0 / p.alpha))
    }
}

/// Radius of a residue circle about the dominant pole that keeps clear of
/// 1 and, for even `l`, of the inner root.
pub fn residue_radius(pole: f64) -> f64 {
    0.25 * (pole - 1.0)
}

/// Residue of the integrand of `stat` at its dominant pole, numerically.
pub fn dominant_residue_numeric(stat: Statistic, p: &StatParams, t: f64) -> Result<ResidueEstimate> {
    p.validate(stat)?;
    if !(t > 0.0) {
        return Err(Error::domain("the dominant pole needs t > 0"));
    }
    let w = series_weight(stat, p, t)?;
    let pole = dominant_pole(stat, p, w)?;
    let order = if stat.is_posterior() { p.j as u32 } else { 1 };
    let f = |xi: Complex64| integrand_log(stat, xi, p, w);
    residue_numeric(&f, Complex64::new(pole, 0.0), order, residue_radius(pole))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mgf::{log_mgf, y_of_t, MlMode};

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        for &x in &[0.0, 3.0, -3.0, 7.0, -7.0, 100.0, PI, -PI] {
            let r = wrap_angle(x);
            assert!(r > -PI && r <= PI);
            assert!(((x - r) / (2.0 * PI)).fract().abs() < 1e-9 || ((x - r) / (2.0 * PI)).fract().abs() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn k_at_n4_matches_series() {
        let p = StatParams::k(4, 0.5);
        let t = 0.3;
        let series = log_mgf(Statistic::K, &p, t, MlMode::Exact).unwrap().log_value;
        let c = contour_log_mgf(Statistic::K, &p, t).unwrap();
        assert!((c.log_value - series).abs() < 1e-10, "{} vs {series}", c.log_value);
    }

    #[test]
    fn geometric_case() {
        // n = 1: E e^{tK_1} = e^t
        let p = StatParams::k(1, 0.4);
        let c = contour_log_mgf(Statistic::K, &p, 0.7).unwrap();
        assert!((c.log_value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn fixed_contour_agrees_with_auto() {
        let p = StatParams::k(10, 0.5);
        let w = y_of_t(0.5);
        let auto = circle_integral_auto(Statistic::K, &p, w).unwrap();
        let fixed = circle_integral(Statistic::K, &p, w, &CircleContour::new(0.3, 256).unwrap()).unwrap();
        assert!((auto.log_value - fixed.log_value).abs() < 1e-10);
        let too_big = CircleContour::new(0.99, 256).unwrap();
        assert!(circle_integral(Statistic::K, &p, w, &too_big).is_err());
    }

    #[test]
    fn contour_geometry() {
        let c = CircleContour::new(0.2, 64).unwrap();
        // ξ at u = ±ρ
        assert!((c.xi_center() + c.xi_radius() - 1.0 / 0.8).abs() < 1e-15);
        assert!((c.xi_center() - c.xi_radius() - 1.0 / 1.2).abs() < 1e-15);
        assert!(CircleContour::new(1.0, 64).is_err());
    }

    #[test]
    fn pole_proximity_is_reported() {
        let p = StatParams::k(5, 0.5);
        let y: f64 = 0.25;
        let pole = y.powf(-2.0);
        let e = integrand_log(Statistic::K, Complex64::new(pole, 0.0), &p, y).unwrap_err();
        assert!(matches!(e, Error::PoleProximity { .. }));
        assert!(integrand_log(Statistic::K, Complex64::new(1.0, 0.0), &p, y).is_err());
    }

    #[test]
    fn k_residue_closed_form() {
        let p = StatParams::k(5, 0.5);
        let t = 0.5f64;
        let y = y_of_t(t);
        let r = dominant_residue_numeric(Statistic::K, &p, t).unwrap();
        let want = -1.0 / (0.5 * (1.0 - y * y).powi(5));
        let got = r.value.to_complex();
        assert!((got.re - want).abs() < 1e-9 * want.abs(), "{got} vs {want}");
        assert!(got.im.abs() < 1e-9 * want.abs());
    }

    #[test]
    fn log_sum_merge() {
        let mut a = ComplexLogSum::default();
        let mut b = ComplexLogSum::default();
        a.add(Complex64::new(2f64.ln(), 0.0));
        b.add(Complex64::new(3f64.ln(), 0.0));
        b.add(Complex64::new(1000.0, 0.0));
        a.merge(&b);
        let (l, _) = a.finish();
        assert!((l - 1000.0).abs() < 1e-12);
    }
}
