//! Finite normal-form games and their multilinear extensions.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::profile::{offsets_of, Blocks, MixedProfile};

/// Optional display names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameLabels {
    pub players: Vec<String>,
    pub actions: Vec<Vec<String>>,
}

/// An N-player game with a dense payoff tensor.
///
/// Payoffs are stored player-major; within a player, pure profiles are in
/// odometer order with the last player's action varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteGame {
    counts: Vec<usize>,
    offsets: Vec<usize>,
    strides: Vec<usize>,
    num_profiles: usize,
    payoffs: Vec<f64>,
    labels: Option<GameLabels>,
}

impl FiniteGame {
    pub fn new(action_counts: Vec<usize>, payoffs: Vec<f64>) -> Result<Self> {
        Self::build(action_counts, payoffs, 2)
    }

    /// Faces of the strategy space may leave a player a single action.
    pub(crate) fn new_face(action_counts: Vec<usize>, payoffs: Vec<f64>) -> Result<Self> {
        Self::build(action_counts, payoffs, 1)
    }

    fn build(action_counts: Vec<usize>, payoffs: Vec<f64>, min_actions: usize) -> Result<Self> {
        if action_counts.len() < 2 {
            return Err(Error::InvalidGame(format!(
                "need at least 2 players, got {}",
                action_counts.len()
            )));
        }
        if let Some(i) = action_counts.iter().position(|&m| m < min_actions) {
            return Err(Error::InvalidGame(format!(
                "player {i} has {} actions, need at least {min_actions}",
                action_counts[i]
            )));
        }
        let num_profiles: usize = action_counts.iter().product();
        let expected = num_profiles * action_counts.len();
        if payoffs.len() != expected {
            return Err(Error::InvalidGame(format!(
                "payoffs: expected {expected} entries, found {}",
                payoffs.len()
            )));
        }
        if let Some(k) = payoffs.iter().position(|u| !u.is_finite()) {
            return Err(Error::InvalidGame(format!("payoff entry {k} is not finite")));
        }
        let mut strides = vec![1; action_counts.len()];
        for i in (0..action_counts.len() - 1).rev() {
            strides[i] = strides[i + 1] * action_counts[i + 1];
        }
        Ok(Self {
            offsets: offsets_of(&action_counts),
            counts: action_counts,
            strides,
            num_profiles,
            payoffs,
            labels: None,
        })
    }

    /// Builds the tensor by evaluating `u(player, profile)` on every pure profile.
    pub fn from_fn(action_counts: Vec<usize>, u: impl Fn(usize, &[usize]) -> f64) -> Result<Self> {
        let n = action_counts.len();
        let mut payoffs = Vec::new();
        for i in 0..n {
            for profile in PureProfiles::new(&action_counts) {
                payoffs.push(u(i, &profile));
            }
        }
        Self::new(action_counts, payoffs)
    }

    /// Two-player game from row-player and column-player matrices.
    pub fn bimatrix(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Self> {
        let rows = a.len();
        let cols = a.first().map_or(0, Vec::len);
        if b.len() != rows || a.iter().chain(b).any(|r| r.len() != cols) {
            return Err(Error::InvalidGame("bimatrix shapes differ".into()));
        }
        Self::from_fn(vec![rows, cols], |i, p| if i == 0 { a[p[0]][p[1]] } else { b[p[0]][p[1]] })
    }

    pub fn with_labels(mut self, labels: GameLabels) -> Result<Self> {
        if labels.players.len() != self.counts.len()
            || labels.actions.len() != self.counts.len()
            || labels.actions.iter().zip(&self.counts).any(|(l, &m)| l.len() != m)
        {
            return Err(Error::InvalidGame("labels do not match action counts".into()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn labels(&self) -> Option<&GameLabels> {
        self.labels.as_ref()
    }

    pub fn num_players(&self) -> usize {
        self.counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.counts
    }

    /// Block offsets into a flat per-player vector.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn total_actions(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn num_profiles(&self) -> usize {
        self.num_profiles
    }

    /// Raw tensor, player-major then odometer order.
    pub fn payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    pub fn profile_index(&self, profile: &[usize]) -> usize {
        profile.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn payoff(&self, player: usize, profile: &[usize]) -> f64 {
        self.payoffs[player * self.num_profiles + self.profile_index(profile)]
    }

    pub fn pure_profiles(&self) -> PureProfiles {
        PureProfiles::new(&self.counts)
    }

    /// True iff payoffs sum to zero (to 1e-12 relative) at every pure profile.
    pub fn is_zero_sum(&self) -> bool {
        let scale = self.payoffs.iter().fold(1.0_f64, |m, u| m.max(u.abs()));
        (0..self.num_profiles).all(|k| {
            let s: f64 = (0..self.num_players())
                .map(|i| self.payoffs[i * self.num_profiles + k])
                .sum();
            s.abs() <= 1e-12 * scale
        })
    }

    /// Hex SHA-256 of the canonical JSON encoding (labels excluded).
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::json!({
            "players": self.num_players(),
            "actions": self.counts,
            "payoffs": self.payoffs,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        hex::encode(digest)
    }

    pub fn check_dims(&self, blocks: &Blocks) -> Result<()> {
        if blocks.num_blocks() != self.num_players() {
            return Err(Error::DimensionMismatch {
                what: "number of players",
                expected: self.num_players(),
                found: blocks.num_blocks(),
            });
        }
        for (i, (b, &m)) in blocks.blocks().zip(&self.counts).enumerate() {
            if b.len() != m {
                return Err(Error::DimensionMismatch {
                    what: if i == 0 { "actions of player 0" } else { "actions of a player" },
                    expected: m,
                    found: b.len(),
                });
            }
        }
        Ok(())
    }

    /// Expected payoff of `player` under the product distribution `x`.
    pub fn mixed_payoff(&self, x: &MixedProfile, player: usize) -> Result<f64> {
        self.check_dims(x.blocks())?;
        if player >= self.num_players() {
            return Err(Error::DimensionMismatch {
                what: "player index",
                expected: self.num_players(),
                found: player,
            });
        }
        let flat = x.as_slice();
        let base = player * self.num_profiles;
        let mut total = 0.0;
        for (k, profile) in self.pure_profiles().enumerate() {
            let w: f64 = profile
                .iter()
                .enumerate()
                .map(|(j, &a)| flat[self.offsets[j] + a])
                .product();
            total += w * self.payoffs[base + k];
        }
        Ok(total)
    }

    /// v_{i,a}(x): payoff to player i for pure action a against x_{-i}.
    pub fn payoff_field(&self, x: &MixedProfile) -> Result<Blocks> {
        self.check_dims(x.blocks())?;
        let mut out = Blocks::zeros(&self.counts);
        self.payoff_field_into(x.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// Flat, allocation-light payoff field; `x` and `out` use this game's layout.
    pub fn payoff_field_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.total_actions());
        debug_assert_eq!(out.len(), self.total_actions());
        out.fill(0.0);
        let n = self.num_players();
        let mut profile = vec![0usize; n];
        for k in 0..self.num_profiles {
            for i in 0..n {
                let mut w = 1.0;
                for (j, &a) in profile.iter().enumerate() {
                    if j != i {
                        w *= x[self.offsets[j] + a];
                    }
                }
                if w != 0.0 {
                    out[self.offsets[i] + profile[i]] += w * self.payoffs[i * self.num_profiles + k];
                }
            }
            advance_odometer(&mut profile, &self.counts);
        }
    }
}

/// Increments `profile` in odometer order; returns false after wrapping.
pub(crate) fn advance_odometer(profile: &mut [usize], counts: &[usize]) -> bool {
    for i in (0..profile.len()).rev() {
        profile[i] += 1;
        if profile[i] < counts[i] {
            return true;
        }
        profile[i] = 0;
    }
    false
}

/// Iterator over pure profiles in odometer order.
pub struct PureProfiles {
    counts: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl PureProfiles {
    pub fn new(counts: &[usize]) -> Self {
        Self {
            counts: counts.to_vec(),
            next: Some(vec![0; counts.len()]),
        }
    }
}

impl Iterator for PureProfiles {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if advance_odometer(&mut succ, &self.counts) {
            self.next = Some(succ);
        }
        Some(current)
    }
}
