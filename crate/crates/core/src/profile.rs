//! Per-player block vectors: mixed profiles, score profiles, reduced scores
//! and supports.
//!
//! All of them share one flat storage layout, player-major, so the
//! integrators can work on a plain `&[f64]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability mass below which an action is treated as unplayed.
pub const SUPPORT_EPSILON: f64 = 1e-9;

/// Tolerance on per-player sums when validating a mixed profile.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A flat vector partitioned into one block per player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", from = "Vec<Vec<f64>>")]
pub struct Blocks {
    data: Vec<f64>,
    offsets: Vec<usize>,
}

impl Blocks {
    pub fn zeros(counts: &[usize]) -> Self {
        let offsets = offsets_of(counts);
        let total = *offsets.last().unwrap_or(&0);
        Self {
            data: vec![0.0; total],
            offsets,
        }
    }

    pub fn from_flat(data: Vec<f64>, counts: &[usize]) -> Result<Self> {
        let offsets = offsets_of(counts);
        let total = *offsets.last().unwrap_or(&0);
        if data.len() != total {
            return Err(Error::DimensionMismatch {
                what: "flat block vector",
                expected: total,
                found: data.len(),
            });
        }
        Ok(Self { data, offsets })
    }

    pub fn num_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn counts(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.offsets.windows(2).map(|w| &self.data[w[0]..w[1]])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.blocks().map(<[f64]>::to_vec).collect()
    }

    /// L∞ distance; panics if the layouts differ.
    pub fn max_abs_diff(&self, other: &Blocks) -> f64 {
        assert_eq!(self.offsets, other.offsets, "block layouts differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn same_layout(&self, other: &Blocks) -> bool {
        self.offsets == other.offsets
    }
}

impl From<Vec<Vec<f64>>> for Blocks {
    fn from(v: Vec<Vec<f64>>) -> Self {
        let counts: Vec<usize> = v.iter().map(Vec::len).collect();
        Self {
            data: v.into_iter().flatten().collect(),
            offsets: offsets_of(&counts),
        }
    }
}

impl From<Blocks> for Vec<Vec<f64>> {
    fn from(b: Blocks) -> Self {
        b.to_vecs()
    }
}

pub(crate) fn offsets_of(counts: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(counts.len() + 1);
    offsets.push(0);
    let mut acc = 0;
    for &c in counts {
        acc += c;
        offsets.push(acc);
    }
    offsets
}

/// One point of the product of simplices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct MixedProfile(Blocks);

impl MixedProfile {
    pub fn new(strategies: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_blocks(Blocks::from(strategies))
    }

    pub fn from_blocks(blocks: Blocks) -> Result<Self> {
        for (i, x) in blocks.blocks().enumerate() {
            if x.is_empty() {
                return Err(Error::InvalidProfile(format!("player {i} has no actions")));
            }
            if let Some(a) = x.iter().position(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "player {i} action {a} has probability {}",
                    x[a]
                )));
            }
            let sum: f64 = x.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(Error::InvalidProfile(format!(
                    "player {i} probabilities sum to {sum}"
                )));
            }
            if x.iter().all(|p| *p <= SUPPORT_EPSILON) {
                return Err(Error::InvalidProfile(format!("player {i} has empty support")));
            }
        }
        Ok(Self(blocks))
    }

    /// Clips negative drift to zero and rescales every block to sum to one.
    pub fn normalized(mut blocks: Blocks) -> Result<Self> {
        for i in 0..blocks.num_blocks() {
            renormalize(blocks.block_mut(i));
        }
        Self::from_blocks(blocks)
    }

    pub fn uniform(counts: &[usize]) -> Self {
        let mut b = Blocks::zeros(counts);
        for (i, &m) in counts.iter().enumerate() {
            b.block_mut(i).fill(1.0 / m as f64);
        }
        Self(b)
    }

    pub fn pure(counts: &[usize], actions: &[usize]) -> Result<Self> {
        if counts.len() != actions.len() {
            return Err(Error::DimensionMismatch {
                what: "pure profile",
                expected: counts.len(),
                found: actions.len(),
            });
        }
        let mut b = Blocks::zeros(counts);
        for (i, (&a, &m)) in actions.iter().zip(counts).enumerate() {
            if a >= m {
                return Err(Error::InvalidProfile(format!(
                    "player {i} action {a} out of range (has {m})"
                )));
            }
            b.block_mut(i)[a] = 1.0;
        }
        Ok(Self(b))
    }

    pub fn num_players(&self) -> usize {
        self.0.num_blocks()
    }

    pub fn strategy(&self, player: usize) -> &[f64] {
        self.0.block(player)
    }

    pub fn blocks(&self) -> &Blocks {
        &self.0
    }

    pub fn into_blocks(self) -> Blocks {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn support(&self) -> SupportSet {
        SupportSet(
            self.0
                .blocks()
                .map(|x| {
                    x.iter()
                        .enumerate()
                        .filter(|(_, p)| **p > SUPPORT_EPSILON)
                        .map(|(a, _)| a)
                        .collect()
                })
                .collect(),
        )
    }

    pub fn is_interior(&self) -> bool {
        self.as_slice().iter().all(|p| *p > SUPPORT_EPSILON)
    }

    pub fn distance(&self, other: &MixedProfile) -> f64 {
        self.0.max_abs_diff(&other.0)
    }
}

impl TryFrom<Vec<Vec<f64>>> for MixedProfile {
    type Error = Error;
    fn try_from(v: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MixedProfile> for Vec<Vec<f64>> {
    fn from(p: MixedProfile) -> Self {
        p.0.to_vecs()
    }
}

/// Clip negatives and rescale to unit sum; returns the pre-normalization
/// deviation of the sum from one.
pub(crate) fn renormalize(x: &mut [f64]) -> f64 {
    let raw: f64 = x.iter().sum();
    for p in x.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let sum: f64 = x.iter().sum();
    if sum > 0.0 {
        for p in x.iter_mut() {
            *p /= sum;
        }
    }
    (raw - 1.0).abs()
}

/// Per-player sets of action indices, sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportSet(Vec<Vec<usize>>);

impl SupportSet {
    pub fn new(counts: &[usize], mut sets: Vec<Vec<usize>>) -> Result<Self> {
        if sets.len() != counts.len() {
            return Err(Error::DimensionMismatch {
                what: "support set",
                expected: counts.len(),
                found: sets.len(),
            });
        }
        for (i, (s, &m)) in sets.iter_mut().zip(counts).enumerate() {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return Err(Error::InvalidSupport(format!("player {i} support is empty")));
            }
            if let Some(&a) = s.iter().find(|&&a| a >= m) {
                return Err(Error::InvalidSupport(format!(
                    "player {i} action {a} out of range (has {m})"
                )));
            }
        }
        Ok(Self(sets))
    }

    pub fn full(counts: &[usize]) -> Self {
        Self(counts.iter().map(|&m| (0..m).collect()).collect())
    }

    pub fn player(&self, i: usize) -> &[usize] {
        &self.0[i]
    }

    pub fn num_players(&self) -> usize {
        self.0.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.0.iter().map(Vec::len).collect()
    }

    pub fn contains(&self, player: usize, action: usize) -> bool {
        self.0[player].binary_search(&action).is_ok()
    }

    pub fn is_full(&self, counts: &[usize]) -> bool {
        self.0.iter().zip(counts).all(|(s, &m)| s.len() == m)
    }

    pub fn is_pure(&self) -> bool {
        self.0.iter().all(|s| s.len() == 1)
    }

    pub fn as_vecs(&self) -> &[Vec<usize>] {
        &self.0
    }
}

/// Dual (score) variables, one block per player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ScoreProfile(Blocks);

impl ScoreProfile {
    pub fn new(scores: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_blocks(Blocks::from(scores))
    }

    pub fn from_blocks(blocks: Blocks) -> Result<Self> {
        if blocks.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("score profile has non-finite entries".into()));
        }
        Ok(Self(blocks))
    }

    pub fn zeros(counts: &[usize]) -> Self {
        Self(Blocks::zeros(counts))
    }

    pub fn scores(&self, player: usize) -> &[f64] {
        self.0.block(player)
    }

    pub fn blocks(&self) -> &Blocks {
        &self.0
    }

    pub fn into_blocks(self) -> Blocks {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn num_players(&self) -> usize {
        self.0.num_blocks()
    }
}

impl TryFrom<Vec<Vec<f64>>> for ScoreProfile {
    type Error = Error;
    fn try_from(v: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ScoreProfile> for Vec<Vec<f64>> {
    fn from(p: ScoreProfile) -> Self {
        p.0.to_vecs()
    }
}

/// Score differences against a benchmark action per player.
///
/// Block `i` has `action_counts[i] - 1` entries: the scores of every
/// non-benchmark action minus the benchmark score, in action order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedScore {
    values: Blocks,
    benchmarks: Vec<usize>,
}

impl ReducedScore {
    pub fn new(values: Blocks, benchmarks: Vec<usize>) -> Result<Self> {
        if values.num_blocks() != benchmarks.len() {
            return Err(Error::DimensionMismatch {
                what: "reduced score benchmarks",
                expected: values.num_blocks(),
                found: benchmarks.len(),
            });
        }
        for (i, &b) in benchmarks.iter().enumerate() {
            if b > values.block(i).len() {
                return Err(Error::InvalidProfile(format!(
                    "benchmark {b} out of range for player {i}"
                )));
            }
        }
        if values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("reduced score has non-finite entries".into()));
        }
        Ok(Self { values, benchmarks })
    }

    /// The all-zero reduced score for the given action counts.
    pub fn zeros(action_counts: &[usize], benchmarks: Vec<usize>) -> Result<Self> {
        let dims: Vec<usize> = action_counts.iter().map(|m| m - 1).collect();
        Self::new(Blocks::zeros(&dims), benchmarks)
    }

    pub fn values(&self) -> &Blocks {
        &self.values
    }

    pub fn benchmarks(&self) -> &[usize] {
        &self.benchmarks
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    /// Original action counts (one more than each block length).
    pub fn action_counts(&self) -> Vec<usize> {
        self.values.counts().iter().map(|d| d + 1).collect()
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Default benchmark: action 0 for every player.
pub fn default_benchmarks(num_players: usize) -> Vec<usize> {
    vec![0; num_players]
}
