//! Log-domain special functions and the reciprocal power-series machinery.
//!
//! Everything factorial-sized is carried as a natural logarithm. Alternating
//! sums are accumulated with [`SignedLogSum`], which keeps positive and
//! negative mass apart and folds adjacent terms pairwise before they meet.

use crate::error::{Error, Result};

/// Below this many factors, rising factorials and binomials are formed as
/// explicit products of logs instead of lgamma differences.
const DIRECT_PRODUCT_MAX: u64 = 32;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        0.0
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

/// log of the rising factorial `a_(k) = Γ(a+k)/Γ(a)`.
pub fn log_rising(a: f64, k: u64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain(format!("log_rising needs a > 0, got {a}")));
    }
    if k == 0 {
        return Ok(0.0);
    }
    if k <= DIRECT_PRODUCT_MAX {
        let mut acc = Neumaier::default();
        for i in 0..k {
            acc.add((a + i as f64).ln());
        }
        Ok(acc.sum())
    } else {
        Ok(ln_gamma(a + k as f64) - ln_gamma(a))
    }
}

/// log of the generalized binomial `Γ(a+1) / (Γ(k+1) Γ(a-k+1))`.
///
/// Only the all-positive-arguments regime is supported (`a - k + 1 > 0`).
pub fn log_binom_real(a: f64, k: u64) -> Result<f64> {
    let kf = k as f64;
    if !a.is_finite() || !(a - kf + 1.0 > 0.0) {
        return Err(Error::domain(format!(
            "log_binom_real needs a - k + 1 > 0, got a = {a}, k = {k}"
        )));
    }
    if k == 0 {
        return Ok(0.0);
    }
    if k <= DIRECT_PRODUCT_MAX {
        let mut acc = Neumaier::default();
        for r in 0..k {
            let r = r as f64;
            acc.add(((a - r) / (kf - r)).ln());
        }
        Ok(acc.sum())
    } else {
        Ok(ln_gamma(a + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(a - kf + 1.0))
    }
}

/// log(1 + e^x) without overflow.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// log(e^a + e^b).
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log(e^a - e^b) for a ≥ b.
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    let d = b - a;
    if d >= 0.0 {
        return f64::NEG_INFINITY;
    }
    // ln(1 - e^d), choosing the branch that keeps precision
    if d > -std::f64::consts::LN_2 {
        a + (-(d.exp_m1())).ln()
    } else {
        a + (-d.exp()).ln_1p()
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Streaming log-sum-exp over positive terms given by their logs.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    shift: f64,
    scaled: Neumaier,
}

impl Default for LogSum {
    fn default() -> Self {
        LogSum {
            shift: f64::NEG_INFINITY,
            scaled: Neumaier::default(),
        }
    }
}

impl LogSum {
    pub fn add(&mut self, log_term: f64) {
        if log_term == f64::NEG_INFINITY {
            return;
        }
        if log_term > self.shift {
            let factor = (self.shift - log_term).exp();
            let prev = self.scaled.sum() * factor;
            self.scaled = Neumaier::default();
            self.scaled.add(prev);
            self.scaled.add(1.0);
            self.shift = log_term;
        } else {
            self.scaled.add((log_term - self.shift).exp());
        }
    }

    pub fn value(&self) -> f64 {
        if self.shift == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.shift + self.scaled.sum().ln()
        }
    }
}

/// A real number stored as sign and log-magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub negative: bool,
    pub log_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        negative: false,
        log_abs: f64::NEG_INFINITY,
    };

    pub fn new(negative: bool, log_abs: f64) -> Self {
        SignedLog { negative, log_abs }
    }

    pub fn to_f64(self) -> f64 {
        let m = self.log_abs.exp();
        if self.negative {
            -m
        } else {
            m
        }
    }

    fn combine(self, other: SignedLog) -> SignedLog {
        if self.log_abs == f64::NEG_INFINITY {
            return other;
        }
        if other.log_abs == f64::NEG_INFINITY {
            return self;
        }
        if self.negative == other.negative {
            SignedLog::new(self.negative, log_add_exp(self.log_abs, other.log_abs))
        } else if self.log_abs >= other.log_abs {
            SignedLog::new(self.negative, log_sub_exp(self.log_abs, other.log_abs))
        } else {
            SignedLog::new(other.negative, log_sub_exp(other.log_abs, self.log_abs))
        }
    }
}

/// Signed log-domain accumulator with pairwise folding of adjacent terms.
#[derive(Debug, Clone, Default)]
pub struct SignedLogSum {
    pending: Option<SignedLog>,
    positive: LogSum,
    negative: LogSum,
    magnitude: LogSum,
}

impl SignedLogSum {
    pub fn add(&mut self, term: SignedLog) {
        self.magnitude.add(term.log_abs);
        match self.pending.take() {
            None => self.pending = Some(term),
            Some(prev) => self.push(prev.combine(term)),
        }
    }

    fn push(&mut self, v: SignedLog) {
        if v.negative {
            self.negative.add(v.log_abs);
        } else {
            self.positive.add(v.log_abs);
        }
    }

    /// log of Σ|terms|, used for stopping rules.
    pub fn log_abs_mass(&self) -> f64 {
        self.magnitude.value()
    }

    pub fn value(&self) -> SignedLog {
        let mut pos = self.positive;
        let mut neg = self.negative;
        if let Some(p) = self.pending {
            if p.negative {
                neg.add(p.log_abs);
            } else {
                pos.add(p.log_abs);
            }
        }
        let (lp, ln) = (pos.value(), neg.value());
        if lp >= ln {
            SignedLog::new(false, log_sub_exp(lp, ln))
        } else {
            SignedLog::new(true, log_sub_exp(ln, lp))
        }
    }
}

/// An ordered tuple of positive integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Composition {
    pub parts: Vec<u32>,
}

impl Composition {
    pub fn k(&self) -> u32 {
        self.parts.iter().sum()
    }

    pub fn s(&self) -> usize {
        self.parts.len()
    }
}

/// All compositions of `k` into exactly `s` positive parts, in lexicographic order.
pub fn compositions(k: u32, s: u32) -> Vec<Composition> {
    let mut out = Vec::new();
    if s == 0 || s > k {
        return out;
    }
    let mut buf = Vec::with_capacity(s as usize);
    fill_compositions(k, s, &mut buf, &mut out);
    out
}

fn fill_compositions(rest: u32, slots: u32, buf: &mut Vec<u32>, out: &mut Vec<Composition>) {
    if slots == 1 {
        buf.push(rest);
        out.push(Composition { parts: buf.clone() });
        buf.pop();
        return;
    }
    for first in 1..=(rest - slots + 1) {
        buf.push(first);
        fill_compositions(rest - first, slots - 1, buf, out);
        buf.pop();
    }
}

/// Leading coefficients `A_j, A_{j+1}, …` of `F(ξ) = Σ_v A_{v+j}/(v+j)! ξ^v`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeriesHead {
    j: u32,
    coefficients: Vec<f64>,
}

impl PowerSeriesHead {
    pub fn new(j: u32, coefficients: Vec<f64>) -> Result<Self> {
        if j == 0 {
            return Err(Error::domain("PowerSeriesHead needs j >= 1"));
        }
        match coefficients.first() {
            Some(&a) if a != 0.0 && a.is_finite() => Ok(PowerSeriesHead { j, coefficients }),
            _ => Err(Error::domain("PowerSeriesHead needs a finite nonzero A_j")),
        }
    }

    /// Head whose series `F` has the given Taylor coefficients `F(ξ) = Σ c_v ξ^v`.
    pub fn from_taylor(j: u32, taylor: &[f64]) -> Result<Self> {
        let coefficients = taylor
            .iter()
            .enumerate()
            .map(|(v, c)| c * ln_factorial(j as u64 + v as u64).exp())
            .collect();
        Self::new(j, coefficients)
    }

    pub fn j(&self) -> u32 {
        self.j
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Taylor coefficient `A_{j+v} / (j+v)!` in log-safe form.
    fn taylor(&self, v: usize) -> f64 {
        let a = self.coefficients[v];
        a.signum() * (a.abs().ln() - ln_factorial(self.j as u64 + v as u64)).exp()
    }

    fn require(&self, k: usize) -> Result<()> {
        if self.coefficients.len() < k + 1 {
            return Err(Error::domain(format!(
                "need {} coefficients for order {k}, head has {}",
                k + 1,
                self.coefficients.len()
            )));
        }
        Ok(())
    }
}

/// `G^{(k)}(0)` for `G = 1/F`, summed over compositions of `k`.
pub fn recip_deriv(head: &PowerSeriesHead, k: u32) -> Result<f64> {
    head.require(k as usize)?;
    let j = head.j as u64;
    let a_j = head.coefficients[0];
    let g0 = (ln_factorial(j) - a_j.abs().ln()).exp() * a_j.signum();
    if k == 0 {
        return Ok(g0);
    }
    // ratio[v] = j! A_{j+v} / ((j+v)! A_j) = c_v / c_0
    let ratio: Vec<f64> = (0..=k as usize)
        .map(|v| {
            let a = head.coefficients[v] / a_j;
            a.signum() * (a.abs().ln() + ln_factorial(j) - ln_factorial(j + v as u64)).exp()
        })
        .collect();
    let mut total = Neumaier::default();
    for s in 1..=k {
        let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
        for eta in compositions(k, s) {
            let prod: f64 = eta.parts.iter().map(|&p| ratio[p as usize]).product();
            total.add(sign * prod);
        }
    }
    Ok(ln_factorial(k as u64).exp() * total.sum() * g0)
}

/// Coefficients `g_0..g_K` of `1/F` from the convolution recurrence.
pub fn recip_series_oracle(head: &PowerSeriesHead, order: u32) -> Result<Vec<f64>> {
    head.require(order as usize)?;
    let f: Vec<f64> = (0..=order as usize).map(|v| head.taylor(v)).collect();
    let mut g = Vec::with_capacity(f.len());
    g.push(1.0 / f[0]);
    for v in 1..f.len() {
        let mut acc = Neumaier::default();
        for p in 1..=v {
            acc.add(f[p] * g[v - p]);
        }
        g.push(-acc.sum() / f[0]);
    }
    Ok(g)
}

/// Truncated product of two power series.
pub(crate) fn series_mul(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| {
            let mut acc = Neumaier::default();
            for i in 0..=k {
                if i < a.len() && k - i < b.len() {
                    acc.add(a[i] * b[k - i]);
                }
            }
            acc.sum()
        })
        .collect()
}

/// Truncated integer power of a power series.
pub(crate) fn series_pow(a: &[f64], power: u32, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    if len > 0 {
        out[0] = 1.0;
    }
    for _ in 0..power {
        out = series_mul(&out, a, len);
    }
    out
}

/// Taylor coefficients of `(1 + x/c)^e` up to `len` terms: `C(e, k) c^{-k}`.
pub(crate) fn binomial_series(e: f64, c: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut term = 1.0;
    for k in 0..len {
        out.push(term);
        term *= (e - k as f64) / ((k + 1) as f64 * c);
    }
    out
}
