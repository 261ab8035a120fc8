//! Exhaustive enumeration of the urn's decision tree for small sizes.
//!
//! Every path of `d` draws is followed with its probability taken from
//! [`crp_step_probs`], so expectations are exact up to rounding and share no
//! code with the series in [`crate::mgf`].

use crate::error::{Error, Result};
use crate::partition::{crp_step_probs, EwensPitmanParams, PartitionState};
use crate::{StatParams, Statistic};

/// Largest number of draws enumerated.
pub const MAX_DRAWS: u64 = 12;

/// A leaf of the tree: final block sizes (base blocks first, then blocks in
/// order of birth) and the path probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub block_sizes: Vec<u64>,
}

/// All outcomes of `m` draws continuing `base`.
pub fn enumerate_extensions(base: &PartitionState, m: u64, params: &EwensPitmanParams) -> Result<Vec<Outcome>> {
    if m > MAX_DRAWS {
        return Err(Error::domain(format!("enumeration is limited to {MAX_DRAWS} draws")));
    }
    let mut out = Vec::new();
    walk(base.block_sizes().to_vec(), 1.0, m, params, &mut out)?;
    Ok(out)
}

/// All partitions of `n` items with their probabilities.
pub fn enumerate_partitions(n: u64, params: &EwensPitmanParams) -> Result<Vec<Outcome>> {
    enumerate_extensions(&PartitionState::empty(), n, params)
}

fn walk(sizes: Vec<u64>, prob: f64, left: u64, params: &EwensPitmanParams, out: &mut Vec<Outcome>) -> Result<()> {
    if left == 0 {
        out.push(Outcome {
            prob,
            block_sizes: sizes,
        });
        return Ok(());
    }
    let state = if sizes.is_empty() {
        PartitionState::empty()
    } else {
        PartitionState::from_block_sizes(sizes.clone())?
    };
    let step = crp_step_probs(&state, params);
    for (i, &q) in step.joins.iter().enumerate() {
        if q > 0.0 {
            let mut next = sizes.clone();
            next[i] += 1;
            walk(next, prob * q, left - 1, params, out)?;
        }
    }
    if step.p_new > 0.0 {
        let mut next = sizes;
        next.push(1);
        walk(next, prob * step.p_new, left - 1, params, out)?;
    }
    Ok(())
}

/// Value of `stat` on an outcome whose first `base_blocks` blocks predate
/// the draws.
pub fn statistic_of(stat: Statistic, l: u64, base_blocks: usize, sizes: &[u64]) -> u64 {
    match stat {
        Statistic::K => sizes.len() as u64,
        Statistic::Ml => sizes.iter().filter(|&&s| s == l).count() as u64,
        Statistic::Kpost => (sizes.len() - base_blocks) as u64,
        Statistic::Mlpost => sizes[base_blocks..].iter().filter(|&&s| s == l).count() as u64,
    }
}

/// `log E e^{t S}` by enumeration at `θ = 0`. Posterior statistics continue
/// `base` (or the canonical state with `n` items in `j` blocks).
pub fn oracle_log_mgf(stat: Statistic, p: &StatParams, base: Option<&PartitionState>, t: f64) -> Result<f64> {
    p.validate(stat)?;
    let params = EwensPitmanParams::stable(p.alpha)?;
    let (outcomes, base_blocks) = if stat.is_posterior() {
        let canonical;
        let base = match base {
            Some(b) => b,
            None => {
                canonical = PartitionState::canonical(p.n, p.j)?;
                &canonical
            }
        };
        (enumerate_extensions(base, p.m, &params)?, base.num_blocks())
    } else {
        (enumerate_partitions(p.n, &params)?, 0)
    };
    let mean: f64 = outcomes
        .iter()
        .map(|o| o.prob * (t * statistic_of(stat, p.l, base_blocks, &o.block_sizes) as f64).exp())
        .sum();
    Ok(mean.ln())
}

/// Exact law of `K_n`: entry `k` is `P(K_n = k)`, from the forward
/// recursion on the urn's new-block probabilities. `O(n²)`.
pub fn block_count_pmf(n: u64, params: &EwensPitmanParams) -> Vec<f64> {
    let (alpha, theta) = (params.alpha(), params.theta());
    let mut pmf = vec![0.0; n as usize + 1];
    if n == 0 {
        pmf[0] = 1.0;
        return pmf;
    }
    pmf[1] = 1.0;
    for size in 1..n {
        let denom = theta + size as f64;
        for k in (1..=size as usize).rev() {
            let p_new = (theta + k as f64 * alpha) / denom;
            pmf[k + 1] += pmf[k] * p_new;
            pmf[k] *= 1.0 - p_new;
        }
    }
    pmf
}

/// Every partition of `n` items into `j` blocks, as sorted block sizes.
pub fn shapes(n: u64, j: u64) -> Vec<PartitionState> {
    fn fill(rest: u64, slots: u64, max: u64, buf: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if slots == 0 {
            if rest == 0 {
                out.push(buf.clone());
            }
            return;
        }
        for s in (1..=max.min(rest)).rev() {
            buf.push(s);
            fill(rest - s, slots - 1, s, buf, out);
            buf.pop();
        }
    }
    let mut out = Vec::new();
    fill(n, j, n, &mut Vec::new(), &mut out);
    out.into_iter()
        .filter_map(|v| PartitionState::from_block_sizes(v).ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities_sum_to_one() {
        let params = EwensPitmanParams::new(0.4, 1.3).unwrap();
        for n in 0..=7 {
            let total: f64 = enumerate_partitions(n, &params).unwrap().iter().map(|o| o.prob).sum();
            assert!((total - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn three_blocks_from_three_draws() {
        // P(K_3 = 3) = α · 2α / 2 at θ = 0
        let params = EwensPitmanParams::stable(0.5).unwrap();
        let p: f64 = enumerate_partitions(3, &params)
            .unwrap()
            .iter()
            .filter(|o| o.block_sizes.len() == 3)
            .map(|o| o.prob)
            .sum();
        assert!((p - 0.25).abs() < 1e-15);
    }

    #[test]
    fn shape_counts() {
        // partitions of 6 into 1..=6 parts: 1, 3, 3, 2, 1, 1
        let counts: Vec<usize> = (1..=6).map(|j| shapes(6, j).len()).collect();
        assert_eq!(counts, vec![1, 3, 3, 2, 1, 1]);
        assert!(shapes(3, 4).is_empty());
    }

    #[test]
    fn block_count_law_matches_tree() {
        let params = EwensPitmanParams::new(0.3, 0.8).unwrap();
        for n in 1..=6 {
            let pmf = block_count_pmf(n, &params);
            let mut tree = vec![0.0; n as usize + 1];
            for o in enumerate_partitions(n, &params).unwrap() {
                tree[o.block_sizes.len()] += o.prob;
            }
            for (a, b) in pmf.iter().zip(&tree) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn block_count_mean() {
        let params = EwensPitmanParams::stable(0.5).unwrap();
        let pmf = block_count_pmf(1000, &params);
        let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let want = crate::mgf::mean_k_exact(1000, 0.5).unwrap();
        assert!((mean / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_draws() {
        let params = EwensPitmanParams::stable(0.5).unwrap();
        assert!(enumerate_partitions(13, &params).is_err());
    }
}
