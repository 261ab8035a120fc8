//! Sequential two-parameter Chinese restaurant process.
//!
//! A draw is made with a single uniform `u ∈ [0, 1)` compared against the
//! cumulative weights laid out as `[new block, block 1, block 2, …]`, blocks
//! in birth order. Putting the new-block mass first means the block count
//! trajectory depends only on `(u, K, n)`, so the counting-only samplers used
//! by the Monte Carlo harness replay exactly the same decisions as the full
//! sampler on the same stream.
//!
//! Streams: replicate `r` of a run seeded with `seed` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `r`
//! (see [`replicate_rng`]).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The pair `(α, θ)` governing the urn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwensPitmanParams {
    alpha: f64,
    theta: f64,
}

impl EwensPitmanParams {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(theta > -alpha) || !theta.is_finite() {
            return Err(Error::domain(format!(
                "theta must exceed -alpha = {}, got {theta}",
                -alpha
            )));
        }
        Ok(EwensPitmanParams { alpha, theta })
    }

    /// The `θ = 0` model the moment generating functions are written for.
    pub fn stable(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Block sizes of a partition of `{1..n}`, blocks in birth order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PartitionState {
    block_sizes: Vec<u64>,
    n: u64,
}

impl PartitionState {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_block_sizes(block_sizes: Vec<u64>) -> Result<Self> {
        if block_sizes.contains(&0) {
            return Err(Error::domain("block sizes must be positive"));
        }
        let n = block_sizes.iter().sum();
        Ok(PartitionState { block_sizes, n })
    }

    /// A partition of `n` items into `j` blocks: one block of size `n - j + 1`
    /// followed by singletons. At `θ = 0` the extension laws depend on the base
    /// only through `(n, j)`, so any such base will do.
    pub fn canonical(n: u64, j: u64) -> Result<Self> {
        if j == 0 || j > n {
            return Err(Error::domain(format!("need 1 <= j <= n, got n = {n}, j = {j}")));
        }
        let mut sizes = vec![1; j as usize];
        sizes[0] = n - j + 1;
        Self::from_block_sizes(sizes)
    }

    pub fn block_sizes(&self) -> &[u64] {
        &self.block_sizes
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }
}

/// Frequency-of-frequencies: `counts[l]` = number of blocks of size `l`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FreqSpectrum {
    counts: BTreeMap<u64, u64>,
}

impl FreqSpectrum {
    pub fn from_sizes<'a>(sizes: impl IntoIterator<Item = &'a u64>) -> Self {
        let mut counts = BTreeMap::new();
        for &s in sizes {
            *counts.entry(s).or_insert(0) += 1;
        }
        FreqSpectrum { counts }
    }

    pub fn get(&self, l: u64) -> u64 {
        self.counts.get(&l).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    /// `Σ_l l·M_l`
    pub fn mass(&self) -> u64 {
        self.counts.iter().map(|(l, c)| l * c).sum()
    }

    /// `Σ_l M_l`
    pub fn num_blocks(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

pub fn spectrum_of(state: &PartitionState) -> FreqSpectrum {
    FreqSpectrum::from_sizes(state.block_sizes())
}

/// Predictive probabilities of the next draw.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProbs {
    pub p_new: f64,
    pub joins: Vec<f64>,
}

pub fn crp_step_probs(state: &PartitionState, params: &EwensPitmanParams) -> StepProbs {
    if state.n == 0 {
        return StepProbs {
            p_new: 1.0,
            joins: Vec::new(),
        };
    }
    let denom = params.theta + state.n as f64;
    let k = state.num_blocks() as f64;
    StepProbs {
        p_new: (params.theta + k * params.alpha) / denom,
        joins: state
            .block_sizes
            .iter()
            .map(|&s| (s as f64 - params.alpha) / denom)
            .collect(),
    }
}

/// The random stream for replicate `replicate` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// True when a draw with uniform `u` opens a new block given `k` blocks over `n` items.
#[inline]
pub(crate) fn opens_new_block(u: f64, n: u64, k: u64, params: &EwensPitmanParams) -> bool {
    n == 0 || u * (params.theta + n as f64) < params.theta + k as f64 * params.alpha
}

/// Fenwick tree over block sizes supporting weighted descent on `size - α`.
#[derive(Debug, Clone, Default)]
struct BlockTree {
    sizes: Vec<u64>,
    tree_size: Vec<u64>,
    tree_count: Vec<u64>,
}

impl BlockTree {
    fn push(&mut self, size: u64) {
        self.sizes.push(size);
        let i = self.sizes.len();
        let low = i & i.wrapping_neg();
        let (mut s, mut c) = (size, 1u64);
        // node i covers (i - low, i]; gather the already-built sub-ranges
        let mut j = i - 1;
        while j > i - low {
            s += self.tree_size[j - 1];
            c += self.tree_count[j - 1];
            j -= j & j.wrapping_neg();
        }
        self.tree_size.push(s);
        self.tree_count.push(c);
    }

    fn increment(&mut self, index: usize) {
        self.sizes[index] += 1;
        let mut i = index + 1;
        while i <= self.sizes.len() {
            self.tree_size[i - 1] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest block index whose cumulative weight exceeds `target`.
    fn find(&self, mut target: f64, alpha: f64) -> usize {
        let len = self.sizes.len();
        let mut pos = 0usize;
        let mut step = len.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= len {
                let w = self.tree_size[next - 1] as f64 - alpha * self.tree_count[next - 1] as f64;
                if w <= target {
                    pos = next;
                    target -= w;
                }
            }
            step >>= 1;
        }
        pos.min(len - 1)
    }
}

/// Outcome of one urn draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Draw {
    New,
    Join(usize),
}

/// A CRP in progress.
#[derive(Debug, Clone)]
pub struct CrpSampler {
    params: EwensPitmanParams,
    blocks: BlockTree,
    n: u64,
}

impl CrpSampler {
    pub fn new(params: EwensPitmanParams) -> Self {
        CrpSampler {
            params,
            blocks: BlockTree::default(),
            n: 0,
        }
    }

    pub fn from_state(state: &PartitionState, params: EwensPitmanParams) -> Self {
        let mut s = Self::new(params);
        for &b in state.block_sizes() {
            s.blocks.push(b);
        }
        s.n = state.n();
        s
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.sizes.len()
    }

    /// Advance by one draw using the uniform `u ∈ [0, 1)`.
    pub fn step_with(&mut self, u: f64) -> Draw {
        let k = self.num_blocks() as u64;
        let draw = if opens_new_block(u, self.n, k, &self.params) {
            self.blocks.push(1);
            Draw::New
        } else {
            let p = &self.params;
            let target = u * (p.theta + self.n as f64) - (p.theta + k as f64 * p.alpha);
            let idx = self.blocks.find(target.max(0.0), p.alpha);
            self.blocks.increment(idx);
            Draw::Join(idx)
        };
        self.n += 1;
        draw
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Draw {
        let u: f64 = rng.gen();
        self.step_with(u)
    }

    pub fn state(&self) -> PartitionState {
        PartitionState {
            block_sizes: self.blocks.sizes.clone(),
            n: self.n,
        }
    }

    pub fn block_sizes(&self) -> &[u64] {
        &self.blocks.sizes
    }
}

pub fn sample_partition_with<R: Rng + ?Sized>(n: u64, params: &EwensPitmanParams, rng: &mut R) -> PartitionState {
    let mut s = CrpSampler::new(*params);
    for _ in 0..n {
        s.step(rng);
    }
    s.state()
}

/// Draw a partition of `n` items; replicate stream 0 of `seed`.
pub fn sample_partition(n: u64, params: &EwensPitmanParams, seed: u64) -> PartitionState {
    sample_partition_with(n, params, &mut replicate_rng(seed, 0))
}

/// Block count after `n` draws, without tracking block sizes.
pub fn sample_block_count_with<R: Rng + ?Sized>(n: u64, params: &EwensPitmanParams, rng: &mut R) -> u64 {
    continue_block_count_with(0, 0, n, params, rng)
}

/// Blocks born during `m` further draws from a state with `n` items in `j` blocks.
pub fn continue_block_count_with<R: Rng + ?Sized>(
    n: u64,
    j: u64,
    m: u64,
    params: &EwensPitmanParams,
    rng: &mut R,
) -> u64 {
    let mut k = j;
    for step in 0..m {
        let u: f64 = rng.gen();
        if opens_new_block(u, n + step, k, params) {
            k += 1;
        }
    }
    k - j
}

/// Statistics of an extension of a base sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub base_n: u64,
    pub base_blocks: u64,
    pub extension_m: u64,
    pub new_blocks: u64,
    pub new_spectrum: FreqSpectrum,
}

pub fn extend_sample_with<R: Rng + ?Sized>(
    base: &PartitionState,
    m: u64,
    params: &EwensPitmanParams,
    rng: &mut R,
) -> Result<PosteriorSample> {
    if base.n() == 0 {
        return Err(Error::domain("extension needs a nonempty base sample"));
    }
    let mut s = CrpSampler::from_state(base, *params);
    for _ in 0..m {
        s.step(rng);
    }
    let j = base.num_blocks();
    let born = &s.block_sizes()[j..];
    Ok(PosteriorSample {
        base_n: base.n(),
        base_blocks: j as u64,
        extension_m: m,
        new_blocks: born.len() as u64,
        new_spectrum: FreqSpectrum::from_sizes(born),
    })
}

/// Continue `base` for `m` draws; replicate stream 0 of `seed`.
pub fn extend_sample(base: &PartitionState, m: u64, params: &EwensPitmanParams, seed: u64) -> Result<PosteriorSample> {
    extend_sample_with(base, m, params, &mut replicate_rng(seed, 0))
}
