//! Self-check batteries: each check compares two independent routes to the
//! same number and reports the discrepancy against a fixed tolerance.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{leading_log_mgf, legendre_numeric, psi, rate};
use crate::contour::hankel::{hankel_decomposition, hankel_remainder};
use crate::contour::steepest::steepest_integral;
use crate::contour::{
    circle_integral_auto, contour_log_mgf, dominant_residue_numeric, integrand_log, log_prefactor, residue_numeric,
};
use crate::error::{Error, Result};
use crate::mgf::{log_mgf, y_of_t, MlMode, ScaledArgument};
use crate::oracle::{oracle_log_mgf, shapes};
use crate::partition::replicate_rng;
use crate::roots::solve_singularities;
use crate::special::{ln_factorial, recip_deriv, recip_series_oracle, PowerSeriesHead};
use crate::{StatParams, Statistic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Oracles,
    Asymptotics,
    All,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Identities => "identities",
            Suite::Oracles => "oracles",
            Suite::Asymptotics => "asymptotics",
            Suite::All => "all",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identities" => Ok(Suite::Identities),
            "oracles" => Ok(Suite::Oracles),
            "asymptotics" => Ok(Suite::Asymptotics),
            "all" => Ok(Suite::All),
            other => Err(Error::Domain(format!("unknown suite {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    /// Largest discrepancy seen (or NaN when not applicable).
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

struct Tally {
    suite: Suite,
    name: String,
    tolerance: f64,
    worst: f64,
    failures: Vec<String>,
}

impl Tally {
    fn new(suite: Suite, name: &str, tolerance: f64) -> Self {
        Tally {
            suite,
            name: name.into(),
            tolerance,
            worst: 0.0,
            failures: Vec::new(),
        }
    }

    fn record(&mut self, case: impl FnOnce() -> String, err: f64) {
        if err.is_nan() || err > self.worst {
            self.worst = if err.is_nan() { f64::NAN } else { err };
        }
        if !(err <= self.tolerance) {
            self.failures.push(format!("{} (discrepancy {err:.3e})", case()));
        }
    }

    fn error(&mut self, case: String, e: Error) {
        self.worst = f64::NAN;
        self.failures.push(format!("{case}: {e}"));
    }

    fn require(&mut self, case: impl FnOnce() -> String, ok: bool) {
        if !ok {
            self.failures.push(case());
        }
    }

    fn finish(self) -> Check {
        let passed = self.failures.is_empty();
        let detail = if passed {
            "ok".to_string()
        } else {
            let shown: Vec<_> = self.failures.iter().take(5).cloned().collect();
            format!("{} failure(s): {}", self.failures.len(), shown.join("; "))
        };
        Check {
            suite: self.suite,
            name: self.name,
            passed,
            worst: self.worst,
            tolerance: self.tolerance,
            detail,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn series(stat: Statistic, p: &StatParams, t: f64, mode: MlMode) -> Result<f64> {
    log_mgf(stat, p, t, mode).map(|e| e.log_value)
}

fn series_vs_contour() -> Check {
    let mut c = Tally::new(Suite::Identities, "series equals circle quadrature", 1e-8);
    let mut cases = Vec::new();
    for n in [5u64, 20, 100] {
        for &a in &[0.3, 0.5, 0.7] {
            cases.push((Statistic::K, StatParams::k(n, a)));
            cases.push((Statistic::Ml, StatParams::ml(n, 2, a)));
        }
    }
    for j in [1u64, 5] {
        for l in [1u64, 2, 3] {
            cases.push((Statistic::Kpost, StatParams::kpost(20, 100, j, 0.5)));
            cases.push((Statistic::Mlpost, StatParams::mlpost(20, 100, j, l, 0.5)));
        }
    }
    for (stat, p) in cases {
        for &t in &[0.25, 0.5, 1.0] {
            let case = || format!("{stat} {p:?} t={t}");
            match (series(stat, &p, t, MlMode::Tilde), contour_log_mgf(stat, &p, t)) {
                (Ok(s), Ok(q)) => c.record(case, rel(q.log_value, s)),
                (Err(e), _) | (_, Err(e)) => c.error(case(), e),
            }
        }
    }
    c.finish()
}

fn hankel_check() -> Check {
    let mut c = Tally::new(Suite::Identities, "pole term minus cut integral equals series", 1e-6);
    for n in [10u64, 50] {
        for &a in &[0.3, 0.5, 0.7] {
            let case = || format!("n={n} alpha={a}");
            match (
                hankel_decomposition(n, a, 0.5),
                series(Statistic::K, &StatParams::k(n, a), 0.5, MlMode::Exact),
            ) {
                (Ok(d), Ok(s)) => c.record(case, ((d.log_value - s).exp() - 1.0).abs()),
                (Err(e), _) | (_, Err(e)) => c.error(case(), e),
            }
        }
    }
    let y = y_of_t(0.5);
    let rems: Vec<_> = [5u64, 10, 20, 40]
        .iter()
        .map(|&n| hankel_remainder(n, 0.5, y))
        .collect();
    match rems.into_iter().collect::<Result<Vec<_>>>() {
        Ok(r) => c.require(
            || format!("cut integral not decreasing in n: {r:?}"),
            r.windows(2).all(|w| w[1].0 < w[0].0),
        ),
        Err(e) => c.error("cut integral".into(), e),
    }
    c.finish()
}

fn degenerate_cases() -> Check {
    let mut c = Tally::new(Suite::Identities, "closed-form degenerate cases", 1e-12);
    for &a in &[0.3, 0.5, 0.7] {
        for &t in &[0.1, 0.5, 1.0, 2.0] {
            let k1 = series(Statistic::K, &StatParams::k(1, a), t, MlMode::Exact);
            let post = series(Statistic::Kpost, &StatParams::kpost(1, 1, 1, a), t, MlMode::Exact);
            let want = ((1.0 - a) + a * f64::exp(t)).ln();
            match (k1, post) {
                (Ok(k1), Ok(post)) => {
                    c.record(|| format!("K n=1 alpha={a} t={t}"), (k1 - t).abs());
                    c.record(|| format!("Kpost n=m=j=1 alpha={a} t={t}"), (post - want).abs());
                }
                (Err(e), _) | (_, Err(e)) => c.error(format!("alpha={a} t={t}"), e),
            }
        }
    }
    c.finish()
}

fn steepest_check() -> Check {
    let mut c = Tally::new(
        Suite::Identities,
        "steepest-descent integral equals circle plus residue",
        1e-8,
    );
    for (n, m, j) in [(3u64, 20u64, 2u64), (5, 30, 1), (4, 40, 3)] {
        let p = StatParams::kpost(n, m, j, 0.5);
        let w = y_of_t(0.5);
        let case = format!("n={n} m={m} j={j}");
        let pole = w.powf(-2.0);
        let f = |xi: Complex64| integrand_log(Statistic::Kpost, xi, &p, w);
        let r = (|| -> Result<(f64, f64)> {
            let st = steepest_integral(Statistic::Kpost, &p, w)?.to_f64();
            let circle = circle_integral_auto(Statistic::Kpost, &p, w)?.log_value.exp();
            let res = residue_numeric(&f, Complex64::new(pole, 0.0), j as u32, 0.25 * (pole - 1.0))?;
            Ok((st, circle + res.value.re()))
        })();
        match r {
            Ok((st, want)) => c.record(|| case.clone(), (st - want).abs() / want.abs().max(st.abs())),
            Err(e) => c.error(case, e),
        }
    }
    c.finish()
}

fn enumeration_check() -> Check {
    let mut c = Tally::new(Suite::Oracles, "decision-tree enumeration equals series", 1e-10);
    for n in 1..=6u64 {
        for &a in &[0.3, 0.5, 0.7] {
            for &t in &[-0.2, 0.3, 0.8] {
                let mut cases = vec![(Statistic::K, StatParams::k(n, a))];
                cases.extend((1..=n).map(|l| (Statistic::Ml, StatParams::ml(n, l, a))));
                for (stat, p) in cases {
                    let case = || format!("{stat} n={n} l={} alpha={a} t={t}", p.l);
                    match (oracle_log_mgf(stat, &p, None, t), series(stat, &p, t, MlMode::Exact)) {
                        (Ok(o), Ok(s)) => c.record(case, (o - s).abs()),
                        (Err(e), _) | (_, Err(e)) => c.error(case(), e),
                    }
                }
            }
        }
    }
    for n in 1..=3u64 {
        for j in 1..=n {
            for base in shapes(n, j) {
                for m in 1..=3u64 {
                    for &a in &[0.3, 0.5, 0.7] {
                        for &t in &[-0.2, 0.3, 0.8] {
                            let mut cases = vec![(Statistic::Kpost, StatParams::kpost(n, m, j, a))];
                            cases.extend((1..=m).map(|l| (Statistic::Mlpost, StatParams::mlpost(n, m, j, l, a))));
                            for (stat, p) in cases {
                                let case =
                                    || format!("{stat} base={:?} m={m} l={} alpha={a} t={t}", base.block_sizes(), p.l);
                                match (
                                    oracle_log_mgf(stat, &p, Some(&base), t),
                                    series(stat, &p, t, MlMode::Exact),
                                ) {
                                    (Ok(o), Ok(s)) => c.record(case, (o - s).abs()),
                                    (Err(e), _) | (_, Err(e)) => c.error(case(), e),
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    c.finish()
}

fn recip_check() -> Check {
    let mut c = Tally::new(Suite::Oracles, "composition formula equals reciprocal series", 1e-9);
    let mut rng = replicate_rng(20_240_601, 0);
    for case in 0..200 {
        let j = rng.gen_range(1..=4u32);
        let k = rng.gen_range(0..=6u32);
        let taylor: Vec<f64> = (0..=k)
            .map(|v| {
                let x: f64 = rng.gen_range(-2.0..2.0);
                if v == 0 && x.abs() < 0.1 {
                    1.0
                } else {
                    x
                }
            })
            .collect();
        let r = (|| -> Result<(f64, f64)> {
            let head = PowerSeriesHead::from_taylor(j, &taylor)?;
            let lemma = recip_deriv(&head, k)?;
            let conv = recip_series_oracle(&head, k)?[k as usize] * ln_factorial(k as u64).exp();
            Ok((lemma, conv))
        })();
        match r {
            Ok((lemma, conv)) => c.record(
                || format!("case {case}: j={j} k={k}"),
                (lemma - conv).abs() / conv.abs().max(1e-300).max(lemma.abs()),
            ),
            Err(e) => c.error(format!("case {case}"), e),
        }
    }
    let geo = PowerSeriesHead::from_taylor(1, &[1.0; 4]).and_then(|h| Ok((recip_deriv(&h, 1)?, recip_deriv(&h, 2)?)));
    match geo {
        Ok((d1, d2)) => {
            c.record(|| "geometric head k=1".into(), (d1 + 1.0).abs());
            c.record(|| "geometric head k=2".into(), d2.abs());
        }
        Err(e) => c.error("geometric head".into(), e),
    }
    c.finish()
}

fn roots_check() -> Check {
    let mut c = Tally::new(Suite::Oracles, "root residuals and structure", 1e-12);
    for &a in &[0.3, 0.5, 0.7] {
        for l in 1..=3u64 {
            for k in 1..=12 {
                let y = 10f64.powi(-k);
                match solve_singularities(l, a, y) {
                    Ok(s) => {
                        c.record(|| format!("outer l={l} alpha={a} y={y}"), s.residual(s.outer));
                        if let Some(x) = s.inner {
                            c.record(|| format!("inner l={l} alpha={a} y={y}"), s.residual(x));
                        }
                        c.require(|| format!("inner root parity l={l}"), s.inner.is_some() == (l % 2 == 0));
                    }
                    Err(e) => c.error(format!("l={l} alpha={a} y={y}"), e),
                }
            }
        }
    }
    match solve_singularities(1, 0.5, 0.5) {
        Ok(s) => c.require(
            || format!("quadratic root {}", s.outer),
            (s.outer - 5.8284271).abs() <= 1e-6,
        ),
        Err(e) => c.error("quadratic root".into(), e),
    }
    c.finish()
}

fn legendre_check() -> Check {
    let mut c = Tally::new(Suite::Oracles, "closed-form rate equals Legendre transform", 1e-6);
    for &a in &[0.3, 0.5, 0.7] {
        for &x in &[0.5, 1.0, 2.0] {
            for (stat, l) in [(Statistic::K, 1u64), (Statistic::Ml, 1), (Statistic::Ml, 2)] {
                let case = || format!("{stat} l={l} alpha={a} x={x}");
                match rate(stat, x, a, l) {
                    Ok(r) => {
                        let num = legendre_numeric(|lam| psi(stat, lam, a, l).unwrap_or(f64::NAN), x);
                        c.record(case, (r.value - num.value).abs());
                    }
                    Err(e) => c.error(case(), e),
                }
            }
        }
    }
    c.finish()
}

fn root_asymptotics() -> Check {
    let mut c = Tally::new(Suite::Asymptotics, "outer root approaches y^(-1/alpha)", 1e-2);
    for &a in &[0.3, 0.5, 0.7] {
        for l in 1..=3u64 {
            match solve_singularities(l, a, 1e-8) {
                Ok(s) => c.record(
                    || format!("l={l} alpha={a}"),
                    (s.outer * 1e-8f64.powf(1.0 / a) - 1.0).abs(),
                ),
                Err(e) => c.error(format!("l={l} alpha={a}"), e),
            }
        }
    }
    c.finish()
}

/// `ln φ / speed` against 1 along `n = 10³, 10⁴, 10⁵` for `K` at `α = 1/2`.
fn speed_ratios(beta_power: f64) -> Result<Vec<f64>> {
    let alpha = 0.5;
    [1_000u64, 10_000, 100_000]
        .iter()
        .map(|&n| {
            let beta = (n as f64).ln().powf(beta_power);
            let arg = ScaledArgument::new(1.0, n, beta, alpha)?;
            Ok(series(Statistic::K, &StatParams::k(n, alpha), arg.t, MlMode::Exact)? / arg.speed())
        })
        .collect()
}

fn slow_scale_check() -> Check {
    let mut c = Tally::new(
        Suite::Asymptotics,
        "log-Laplace ratio approaches 1 at the slow scale",
        0.25,
    );
    match speed_ratios(0.25) {
        Ok(r) => {
            c.require(
                || format!("ratios not decreasing: {r:?}"),
                r.windows(2).all(|w| w[1] < w[0]),
            );
            c.require(|| format!("ratios not above 1: {r:?}"), r.iter().all(|&x| x > 1.0));
            c.record(|| format!("ratio at n=1e5: {}", r[2]), (r[2] - 1.0).abs());
        }
        Err(e) => c.error("ratios".into(), e),
    }
    c.finish()
}

fn leading_vs_series() -> Check {
    let mut c = Tally::new(
        Suite::Asymptotics,
        "leading term approaches series for K",
        f64::INFINITY,
    );
    let mut prev = f64::INFINITY;
    for n in [1_000u64, 10_000, 100_000] {
        let beta = (n as f64).ln().powf(0.25);
        let t = beta / (n as f64).sqrt();
        let p = StatParams::k(n, 0.5);
        match (
            leading_log_mgf(Statistic::K, &p, t),
            series(Statistic::K, &p, t, MlMode::Exact),
        ) {
            (Ok(l), Ok(s)) => {
                let dev = (l / s - 1.0).abs();
                c.require(|| format!("not monotone at n={n}: {dev} after {prev}"), dev < prev);
                c.record(|| format!("n={n}"), dev);
                prev = dev;
            }
            (Err(e), _) | (_, Err(e)) => c.error(format!("n={n}"), e),
        }
    }
    c.finish()
}

fn posterior_leading_check() -> Check {
    let mut c = Tally::new(
        Suite::Asymptotics,
        "posterior leading term equals numeric residue",
        1e-6,
    );
    let cases = [
        (Statistic::Kpost, StatParams::kpost(3, 200, 2, 0.5), 0.5),
        (Statistic::Kpost, StatParams::kpost(8, 300, 4, 0.3), 0.4),
        (Statistic::Mlpost, StatParams::mlpost(5, 40, 3, 1, 0.5), 1.5),
        (Statistic::Mlpost, StatParams::mlpost(6, 60, 2, 2, 0.5), 1.5),
    ];
    for (stat, p, t) in cases {
        let case = || format!("{stat} {p:?} t={t}");
        let r = (|| -> Result<(f64, f64)> {
            let num = dominant_residue_numeric(stat, &p, t)?;
            Ok((
                leading_log_mgf(stat, &p, t)?,
                num.value.log_abs + log_prefactor(stat, &p, t)?,
            ))
        })();
        match r {
            Ok((a, b)) => c.record(case, rel(a, b)),
            Err(e) => c.error(case(), e),
        }
    }
    c.finish()
}

pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Identities => vec![
            series_vs_contour(),
            hankel_check(),
            degenerate_cases(),
            steepest_check(),
        ],
        Suite::Oracles => vec![enumeration_check(), recip_check(), roots_check(), legendre_check()],
        Suite::Asymptotics => {
            vec![
                root_asymptotics(),
                slow_scale_check(),
                leading_vs_series(),
                posterior_leading_check(),
            ]
        }
        Suite::All => [Suite::Identities, Suite::Oracles, Suite::Asymptotics]
            .into_iter()
            .flat_map(run_suite)
            .collect(),
    }
}
