//! Monte Carlo estimates of moderate-deviation tail probabilities.
//!
//! The event is `{S ≥ x N^α β(N)}` with `N = n` for `K`, `Ml` and `N = m`
//! for the posterior statistics. Replicate `r` of a run seeded with `seed`
//! always uses stream `r` of that seed, so results do not depend on the
//! number of threads or on how a run is split and merged.

use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::rate;
use crate::error::{Error, Result};
use crate::mgf::ModerationScale;
use crate::partition::{
    continue_block_count_with, extend_sample_with, replicate_rng, sample_block_count_with, sample_partition_with,
    spectrum_of, EwensPitmanParams, PartitionState,
};
use crate::{StatParams, Statistic};

/// The size the statistic is normalised by.
pub fn normalizing_size(stat: Statistic, p: &StatParams) -> u64 {
    if stat.is_posterior() {
        p.m
    } else {
        p.n
    }
}

/// One draw of `stat`. Posterior statistics continue the state with
/// `n - j + 1, 1, …, 1` as block sizes; their law depends only on `(n, j)`.
pub fn sample_statistic<R: Rng + ?Sized>(
    stat: Statistic,
    p: &StatParams,
    params: &EwensPitmanParams,
    rng: &mut R,
) -> Result<u64> {
    Ok(match stat {
        Statistic::K => sample_block_count_with(p.n, params, rng),
        Statistic::Ml => spectrum_of(&sample_partition_with(p.n, params, rng)).get(p.l),
        Statistic::Kpost => continue_block_count_with(p.n, p.j, p.m, params, rng),
        Statistic::Mlpost => {
            let base = PartitionState::canonical(p.n, p.j)?;
            extend_sample_with(&base, p.m, params, rng)?.new_spectrum.get(p.l)
        }
    })
}

/// Draws of `stat` for the given replicate indices, in index order.
pub fn sample_pool(stat: Statistic, p: &StatParams, theta: f64, replicates: Range<u64>, seed: u64) -> Result<Vec<u64>> {
    p.validate(stat)?;
    let params = EwensPitmanParams::new(p.alpha, theta)?;
    replicates
        .into_par_iter()
        .map(|r| sample_statistic(stat, p, &params, &mut replicate_rng(seed, r)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub stat: Statistic,
    pub n: u64,
    pub m: u64,
    pub j: u64,
    pub l: u64,
    pub alpha: f64,
    pub theta: f64,
    pub x: f64,
    /// `x N^α β(N)` on the raw count scale.
    pub threshold: f64,
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub stderr: f64,
}

impl TailEstimate {
    fn from_counts(
        stat: Statistic,
        p: &StatParams,
        theta: f64,
        x: f64,
        threshold: f64,
        trials: u64,
        hits: u64,
    ) -> Self {
        let mut e = TailEstimate {
            stat,
            n: p.n,
            m: p.m,
            j: p.j,
            l: p.l,
            alpha: p.alpha,
            theta,
            x,
            threshold,
            trials,
            hits,
            p_hat: 0.0,
            stderr: 0.0,
        };
        e.recompute();
        e
    }

    fn recompute(&mut self) {
        if self.trials == 0 {
            self.p_hat = 0.0;
            self.stderr = 0.0;
            return;
        }
        let n = self.trials as f64;
        self.p_hat = self.hits as f64 / n;
        self.stderr = (self.p_hat * (1.0 - self.p_hat) / n).sqrt();
    }

    /// The same configuration with no trials; the identity for [`merge`].
    pub fn empty_like(&self) -> Self {
        TailEstimate {
            trials: 0,
            hits: 0,
            p_hat: 0.0,
            stderr: 0.0,
            ..self.clone()
        }
    }

    /// True when the estimate was taken away from `θ = 0`, where the rate
    /// functions do not apply.
    pub fn theta_flagged(&self) -> bool {
        self.theta != 0.0
    }

    fn same_config(&self, other: &Self) -> bool {
        self.stat == other.stat
            && self.n == other.n
            && self.m == other.m
            && self.j == other.j
            && self.l == other.l
            && self.alpha == other.alpha
            && self.theta == other.theta
            && self.threshold == other.threshold
    }
}

/// Pool two estimates of the same event.
pub fn merge(a: &TailEstimate, b: &TailEstimate) -> Result<TailEstimate> {
    if !a.same_config(b) {
        return Err(Error::Mismatch(format!(
            "cannot merge {} (n={}, m={}, threshold={}) with {} (n={}, m={}, threshold={})",
            a.stat, a.n, a.m, a.threshold, b.stat, b.n, b.m, b.threshold
        )));
    }
    let mut out = a.clone();
    out.trials += b.trials;
    out.hits += b.hits;
    out.recompute();
    Ok(out)
}

pub fn threshold(stat: Statistic, p: &StatParams, scale: &ModerationScale, x: f64) -> f64 {
    let big_n = normalizing_size(stat, p);
    x * (big_n as f64).powf(p.alpha) * scale.beta(big_n)
}

fn check_tail_inputs(stat: Statistic, p: &StatParams, scale: &ModerationScale) -> Result<()> {
    p.validate(stat)?;
    scale.validate_for(p.alpha)?;
    if normalizing_size(stat, p) < 2 {
        return Err(Error::domain(
            "the normalising size must be at least 2 so that ln N > 0",
        ));
    }
    Ok(())
}

/// Tail estimate from replicates `replicates` of `seed`.
pub fn estimate_tail_range(
    stat: Statistic,
    p: &StatParams,
    theta: f64,
    scale: &ModerationScale,
    x: f64,
    replicates: Range<u64>,
    seed: u64,
) -> Result<TailEstimate> {
    check_tail_inputs(stat, p, scale)?;
    let thr = threshold(stat, p, scale, x);
    let pool = sample_pool(stat, p, theta, replicates.clone(), seed)?;
    let hits = pool.iter().filter(|&&s| s as f64 >= thr).count() as u64;
    Ok(TailEstimate::from_counts(
        stat,
        p,
        theta,
        x,
        thr,
        replicates.end - replicates.start,
        hits,
    ))
}

/// Estimate `P(S ≥ x N^α β(N))` from `trials` replicates.
pub fn estimate_tail(
    stat: Statistic,
    p: &StatParams,
    theta: f64,
    scale: &ModerationScale,
    x: f64,
    trials: u64,
    seed: u64,
) -> Result<TailEstimate> {
    if trials == 0 {
        return Err(Error::domain("trials must be positive"));
    }
    estimate_tail_range(stat, p, theta, scale, x, 0..trials, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpRow {
    /// Normalising size `N`.
    pub size: u64,
    pub x: f64,
    pub beta: f64,
    pub speed: f64,
    pub estimate: TailEstimate,
    /// `-ln p̂ / β^{1/(1-α)}`; absent when there were no hits.
    pub normalized_decay: Option<f64>,
    /// With no hits: `-ln(3/trials) / β^{1/(1-α)}`, a lower bound on the decay.
    pub decay_lower_bound: Option<f64>,
    pub rate_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpProfile {
    pub stat: Statistic,
    pub alpha: f64,
    pub theta: f64,
    /// Set when `θ ≠ 0`.
    pub theta_flagged: bool,
    pub scale: ModerationScale,
    pub rows: Vec<MdpRow>,
}

/// Tail estimates over a grid of sizes and levels. For each size one pool
/// of draws is shared by every `x`, so `p̂` is nonincreasing in `x`.
/// `base` supplies `m`, `j`, `l` and `α`; the grid overrides `n` (or `m`
/// for posterior statistics).
#[allow(clippy::too_many_arguments)]
pub fn mdp_profile(
    stat: Statistic,
    base: &StatParams,
    size_grid: &[u64],
    x_grid: &[f64],
    theta: f64,
    scale: &ModerationScale,
    trials: u64,
    seed: u64,
) -> Result<MdpProfile> {
    if size_grid.is_empty() || x_grid.is_empty() {
        return Err(Error::domain("grids must be nonempty"));
    }
    if trials == 0 {
        return Err(Error::domain("trials must be positive"));
    }
    let mut rows = Vec::with_capacity(size_grid.len() * x_grid.len());
    for &size in size_grid {
        let mut p = *base;
        if stat.is_posterior() {
            p.m = size;
        } else {
            p.n = size;
        }
        check_tail_inputs(stat, &p, scale)?;
        let pool = sample_pool(stat, &p, theta, 0..trials, seed)?;
        let beta = scale.beta(size);
        let speed = scale.speed(size, p.alpha);
        for &x in x_grid {
            let thr = threshold(stat, &p, scale, x);
            let hits = pool.iter().filter(|&&s| s as f64 >= thr).count() as u64;
            let estimate = TailEstimate::from_counts(stat, &p, theta, x, thr, trials, hits);
            let (normalized_decay, decay_lower_bound) = if hits == 0 {
                (None, Some(-(3.0 / trials as f64).ln() / speed))
            } else {
                // -ln 1 is -0.0; report +0
                (Some((-estimate.p_hat.ln()).max(0.0) / speed), None)
            };
            rows.push(MdpRow {
                size,
                x,
                beta,
                speed,
                estimate,
                normalized_decay,
                decay_lower_bound,
                rate_value: rate(stat, x, p.alpha, p.l)?.value,
            });
        }
    }
    Ok(MdpProfile {
        stat,
        alpha: base.alpha,
        theta,
        theta_flagged: theta != 0.0,
        scale: *scale,
        rows,
    })
}

/// Sample mean of `stat` and its standard error.
pub fn sample_mean(stat: Statistic, p: &StatParams, theta: f64, trials: u64, seed: u64) -> Result<(f64, f64)> {
    if trials < 2 {
        return Err(Error::domain("need at least 2 trials"));
    }
    let pool = sample_pool(stat, p, theta, 0..trials, seed)?;
    let n = trials as f64;
    let mean = pool.iter().map(|&s| s as f64).sum::<f64>() / n;
    let var = pool.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// `ln` of the sample mean of `e^{tS}` and its standard error on the log
/// scale (delta method).
pub fn empirical_log_mgf(
    stat: Statistic,
    p: &StatParams,
    theta: f64,
    t: f64,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if trials < 2 {
        return Err(Error::domain("need at least 2 trials"));
    }
    let pool = sample_pool(stat, p, theta, 0..trials, seed)?;
    let n = trials as f64;
    let vals: Vec<f64> = pool.iter().map(|&s| (t * s as f64).exp()).collect();
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean.ln(), (var / n).sqrt() / mean))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scale() -> ModerationScale {
        ModerationScale::log_power(0.25)
    }

    #[test]
    fn trivial_threshold_always_hit() {
        let p = StatParams::k(100, 0.5);
        let e = estimate_tail(Statistic::K, &p, 0.0, &scale(), 1e-3, 200, 1).unwrap();
        assert_eq!(e.hits, 200);
        assert_eq!(e.p_hat, 1.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn deterministic_and_rejects_zero_trials() {
        let p = StatParams::kpost(10, 200, 3, 0.5);
        let a = estimate_tail(Statistic::Kpost, &p, 0.0, &scale(), 0.5, 500, 9).unwrap();
        let b = estimate_tail(Statistic::Kpost, &p, 0.0, &scale(), 0.5, 500, 9).unwrap();
        assert_eq!(a, b);
        assert!(estimate_tail(Statistic::Kpost, &p, 0.0, &scale(), 0.5, 0, 9).is_err());
    }

    #[test]
    fn merge_of_halves_equals_full() {
        let p = StatParams::ml(300, 1, 0.5);
        let s = scale();
        let full = estimate_tail_range(Statistic::Ml, &p, 0.0, &s, 0.5, 0..1000, 4).unwrap();
        let a = estimate_tail_range(Statistic::Ml, &p, 0.0, &s, 0.5, 0..400, 4).unwrap();
        let b = estimate_tail_range(Statistic::Ml, &p, 0.0, &s, 0.5, 400..1000, 4).unwrap();
        assert_eq!(merge(&a, &b).unwrap(), full);
        assert_eq!(merge(&b, &a).unwrap(), full);
        assert_eq!(merge(&a, &a.empty_like()).unwrap(), a);
        let other = estimate_tail_range(Statistic::Ml, &p, 0.0, &s, 0.7, 0..10, 4).unwrap();
        assert!(matches!(merge(&a, &other), Err(Error::Mismatch(_))));
    }

    #[test]
    fn profile_is_monotone_in_x() {
        let base = StatParams::k(1, 0.5);
        let xs: Vec<f64> = (0..12).map(|i| i as f64 * 0.25).collect();
        let prof = mdp_profile(Statistic::K, &base, &[500], &xs, 0.0, &scale(), 2000, 3).unwrap();
        assert_eq!(prof.rows[0].estimate.p_hat, 1.0);
        assert_eq!(prof.rows[0].normalized_decay, Some(0.0));
        assert_eq!(prof.rows[0].rate_value, 0.0);
        for w in prof.rows.windows(2) {
            assert!(w[1].estimate.p_hat <= w[0].estimate.p_hat);
        }
        let last = prof.rows.last().unwrap();
        if last.estimate.hits == 0 {
            assert!(last.decay_lower_bound.unwrap() > 0.0 && last.normalized_decay.is_none());
        }
        assert!(!prof.theta_flagged);
    }

    #[test]
    fn theta_flag() {
        let p = StatParams::k(50, 0.5);
        let e = estimate_tail(Statistic::K, &p, 1.0, &scale(), 0.5, 10, 1).unwrap();
        assert!(e.theta_flagged());
    }
}
