//! Moderate-deviation numerics for the Ewens-Pitman sampling model.
//!
//! The crate evaluates the moment generating functions of the block count
//! `K_n`, the frequency counts `M_{l,n}` and their posterior (extension)
//! analogues `K_m^(n)`, `M_{l,m}^(n)` three ways: as exact series, as Cauchy
//! integrals, and through the dominant-residue asymptotics. It also carries
//! the limiting log-Laplace transforms, the rate functions, and a Monte Carlo
//! harness driven by a two-parameter Chinese restaurant process sampler.
//!
//! Module map:
//! - [`partition`]: the urn sampler and partition statistics
//! - [`special`]: log-domain special functions and reciprocal power series
//! - [`mgf`]: exact series for the four moment generating functions
//! - [`contour`]: integrands, circle quadrature, residues, Hankel remainder,
//!   steepest-descent contour
//! - [`roots`]: real singularities of `1 - y ξ^{α-l}(ξ-1)^l`
//! - [`asymptotics`]: leading terms, limiting transforms, rate functions
//! - [`mc`]: tail-probability estimation
//! - [`oracle`]: exhaustive enumeration of small urn trees
//! - [`verify`]: self-check suites shared by the CLI and tests

// NaN must fail domain checks, hence `!(x > 0.0)` style guards
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod asymptotics;
pub mod contour;
pub mod error;
pub mod mc;
pub mod mgf;
pub mod oracle;
pub mod partition;
pub mod quad;
pub mod roots;
pub mod special;
pub mod verify;

pub use error::{Error, Result};

/// Which of the four partition statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    /// `K_n`, number of blocks.
    K,
    /// `M_{l,n}`, number of blocks of size `l`.
    Ml,
    /// `K_m^(n)`, blocks born during an extension of `m` draws.
    Kpost,
    /// `M_{l,m}^(n)`, extension-born blocks of extension size `l`.
    Mlpost,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [Statistic::K, Statistic::Ml, Statistic::Kpost, Statistic::Mlpost];

    pub fn is_posterior(self) -> bool {
        matches!(self, Statistic::Kpost | Statistic::Mlpost)
    }

    pub fn needs_l(self) -> bool {
        matches!(self, Statistic::Ml | Statistic::Mlpost)
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::K => "K",
            Statistic::Ml => "Ml",
            Statistic::Kpost => "Kpost",
            Statistic::Mlpost => "Mlpost",
        })
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(Statistic::K),
            "Ml" | "ml" | "M" => Ok(Statistic::Ml),
            "Kpost" | "kpost" => Ok(Statistic::Kpost),
            "Mlpost" | "mlpost" => Ok(Statistic::Mlpost),
            other => Err(Error::Domain(format!("unknown statistic {other:?}"))),
        }
    }
}

/// Sizes and parameters a statistic is evaluated at. Fields that a statistic
/// does not use are ignored (`m`, `j` for `K`/`Ml`; `l` for `K`/`Kpost`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatParams {
    pub n: u64,
    pub m: u64,
    pub j: u64,
    pub l: u64,
    pub alpha: f64,
}

impl StatParams {
    pub fn k(n: u64, alpha: f64) -> Self {
        StatParams {
            n,
            m: 0,
            j: 1,
            l: 1,
            alpha,
        }
    }

    pub fn ml(n: u64, l: u64, alpha: f64) -> Self {
        StatParams {
            n,
            m: 0,
            j: 1,
            l,
            alpha,
        }
    }

    pub fn kpost(n: u64, m: u64, j: u64, alpha: f64) -> Self {
        StatParams { n, m, j, l: 1, alpha }
    }

    pub fn mlpost(n: u64, m: u64, j: u64, l: u64, alpha: f64) -> Self {
        StatParams { n, m, j, l, alpha }
    }

    /// Check the preconditions shared by every evaluation route.
    pub fn validate(&self, stat: Statistic) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        match stat {
            Statistic::K => {}
            Statistic::Ml => {
                if self.l == 0 || self.l > self.n {
                    return Err(Error::Domain(format!(
                        "need 1 <= l <= n, got l = {}, n = {}",
                        self.l, self.n
                    )));
                }
            }
            Statistic::Kpost | Statistic::Mlpost => {
                if self.j == 0 || self.j > self.n {
                    return Err(Error::Domain(format!(
                        "need 1 <= j <= n, got j = {}, n = {}",
                        self.j, self.n
                    )));
                }
                if stat == Statistic::Mlpost && self.m > 0 && (self.l == 0 || self.l > self.m) {
                    return Err(Error::Domain(format!(
                        "need 1 <= l <= m, got l = {}, m = {}",
                        self.l, self.m
                    )));
                }
            }
        }
        Ok(())
    }
}
