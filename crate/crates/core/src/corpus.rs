//! Builtin example games, one per equilibrium class, with their known
//! equilibria.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{FiniteGame, GameLabels};
use crate::profile::MixedProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumClass {
    StrictPure,
    FullyMixed,
    PartiallyMixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownEquilibrium {
    pub profile: MixedProfile,
    pub class: EquilibriumClass,
    /// How the profile was obtained.
    pub source: String,
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub key: &'static str,
    pub description: &'static str,
    pub game: FiniteGame,
    pub equilibria: Vec<KnownEquilibrium>,
}

/// Serializable listing line for one corpus game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub key: String,
    pub description: String,
    pub players: usize,
    pub actions: Vec<usize>,
    pub zero_sum: bool,
    pub multiple_equilibria: bool,
    pub equilibria: Vec<KnownEquilibrium>,
}

impl CorpusEntry {
    pub fn summary(&self) -> CorpusSummary {
        CorpusSummary {
            key: self.key.into(),
            description: self.description.into(),
            players: self.game.num_players(),
            actions: self.game.action_counts().to_vec(),
            zero_sum: self.game.is_zero_sum(),
            multiple_equilibria: self.equilibria.len() > 1,
            equilibria: self.equilibria.clone(),
        }
    }
}

pub const BUILTIN_KEYS: [&str; 6] = [
    "matching_pennies",
    "rock_paper_scissors",
    "coordination_2x2",
    "battle_of_sexes",
    "dominance_2x2",
    "zero_sum_2x2x2",
];

fn labelled(game: FiniteGame, actions: &[&[&str]]) -> FiniteGame {
    let labels = GameLabels {
        players: (1..=actions.len()).map(|i| format!("player {i}")).collect(),
        actions: actions.iter().map(|a| a.iter().map(|s| s.to_string()).collect()).collect(),
    };
    game.with_labels(labels).expect("corpus labels match")
}

fn negate(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.iter().map(|v| -v).collect()).collect()
}

pub fn matching_pennies() -> FiniteGame {
    let a = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
    let g = FiniteGame::bimatrix(&a, &negate(&a)).expect("valid corpus game");
    labelled(g, &[&["H", "T"], &["H", "T"]])
}

pub fn rock_paper_scissors() -> FiniteGame {
    let a = vec![vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 1.0, 0.0]];
    let g = FiniteGame::bimatrix(&a, &negate(&a)).expect("valid corpus game");
    labelled(g, &[&["R", "P", "S"], &["R", "P", "S"]])
}

pub fn coordination_2x2() -> FiniteGame {
    let a = vec![vec![2.0, 0.0], vec![0.0, 1.0]];
    let g = FiniteGame::bimatrix(&a, &a).expect("valid corpus game");
    labelled(g, &[&["A", "B"], &["A", "B"]])
}

pub fn battle_of_sexes() -> FiniteGame {
    let a = vec![vec![2.0, 0.0], vec![0.0, 1.0]];
    let b = vec![vec![1.0, 0.0], vec![0.0, 2.0]];
    let g = FiniteGame::bimatrix(&a, &b).expect("valid corpus game");
    labelled(g, &[&["opera", "football"], &["opera", "football"]])
}

/// Both players have a strictly dominant first action.
pub fn dominance_2x2() -> FiniteGame {
    let a = vec![vec![2.0, 0.0], vec![1.0, -1.0]];
    let b = vec![vec![2.0, 1.0], vec![0.0, -1.0]];
    let g = FiniteGame::bimatrix(&a, &b).expect("valid corpus game");
    labelled(g, &[&["D", "E"], &["D", "E"]])
}

/// Matching pennies between players 1 and 2, shifted by a term controlled by
/// player 3, who strictly prefers action 0. The unique equilibrium is mixed
/// for players 1 and 2 and pure for player 3.
pub fn zero_sum_2x2x2() -> FiniteGame {
    let g = FiniteGame::from_fn(vec![2, 2, 2], |i, p| {
        let mp = if p[0] == p[1] { 1.0 } else { -1.0 };
        let s3 = if p[2] == 0 { 1.0 } else { -1.0 };
        match i {
            0 => mp - 0.5 * s3,
            1 => -mp - 0.5 * s3,
            _ => s3,
        }
    })
    .expect("valid corpus game");
    labelled(g, &[&["H", "T"], &["H", "T"], &["L", "R"]])
}

fn eq(strategies: Vec<Vec<f64>>, class: EquilibriumClass) -> KnownEquilibrium {
    KnownEquilibrium {
        profile: MixedProfile::new(strategies).expect("valid corpus equilibrium"),
        class,
        source: "closed-form indifference solution".into(),
    }
}

pub fn builtin_games() -> Vec<CorpusEntry> {
    use EquilibriumClass::*;
    let third = 1.0 / 3.0;
    vec![
        CorpusEntry {
            key: "matching_pennies",
            description: "2x2 zero-sum, unique fully mixed equilibrium",
            game: matching_pennies(),
            equilibria: vec![eq(vec![vec![0.5, 0.5], vec![0.5, 0.5]], FullyMixed)],
        },
        CorpusEntry {
            key: "rock_paper_scissors",
            description: "3x3 zero-sum, unique fully mixed equilibrium",
            game: rock_paper_scissors(),
            equilibria: vec![eq(vec![vec![third; 3], vec![third; 3]], FullyMixed)],
        },
        CorpusEntry {
            key: "coordination_2x2",
            description: "common-interest game, two strict equilibria and a mixed one",
            game: coordination_2x2(),
            equilibria: vec![
                eq(vec![vec![1.0, 0.0], vec![1.0, 0.0]], StrictPure),
                eq(vec![vec![0.0, 1.0], vec![0.0, 1.0]], StrictPure),
                eq(vec![vec![third, 2.0 * third], vec![third, 2.0 * third]], FullyMixed),
            ],
        },
        CorpusEntry {
            key: "battle_of_sexes",
            description: "two strict equilibria and a mixed one",
            game: battle_of_sexes(),
            equilibria: vec![
                eq(vec![vec![1.0, 0.0], vec![1.0, 0.0]], StrictPure),
                eq(vec![vec![0.0, 1.0], vec![0.0, 1.0]], StrictPure),
                eq(vec![vec![2.0 * third, third], vec![third, 2.0 * third]], FullyMixed),
            ],
        },
        CorpusEntry {
            key: "dominance_2x2",
            description: "strictly dominant actions, unique strict equilibrium",
            game: dominance_2x2(),
            equilibria: vec![eq(vec![vec![1.0, 0.0], vec![1.0, 0.0]], StrictPure)],
        },
        CorpusEntry {
            key: "zero_sum_2x2x2",
            description: "three players, unique partially mixed equilibrium",
            game: zero_sum_2x2x2(),
            equilibria: vec![eq(vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0, 0.0]], PartiallyMixed)],
        },
    ]
}

pub fn builtin_entry(key: &str) -> Result<CorpusEntry> {
    builtin_games()
        .into_iter()
        .find(|e| e.key == key)
        .ok_or_else(|| Error::UnknownBuiltin(key.to_string()))
}

pub fn builtin(key: &str) -> Result<FiniteGame> {
    builtin_entry(key).map(|e| e.game)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{classify_equilibrium, is_nash};

    #[test]
    fn keys_match_listing() {
        let keys: Vec<&str> = builtin_games().iter().map(|e| e.key).collect();
        assert_eq!(keys, BUILTIN_KEYS);
        assert!(matches!(builtin("prisoners_dilemma"), Err(Error::UnknownBuiltin(_))));
    }

    #[test]
    fn matching_pennies_tensor() {
        let g = builtin("matching_pennies").unwrap();
        assert_eq!(g.action_counts(), &[2, 2]);
        assert!(g.is_zero_sum());
        assert_eq!(g.payoff(0, &[0, 0]), 1.0);
        assert_eq!(g.payoff(0, &[0, 1]), -1.0);
        assert_eq!(g.payoff(1, &[0, 0]), -1.0);
    }

    #[test]
    fn stored_equilibria_are_nash_and_classified() {
        for entry in builtin_games() {
            for known in &entry.equilibria {
                assert!(is_nash(&entry.game, &known.profile, 1e-8).unwrap(), "{}", entry.key);
                let r = classify_equilibrium(&entry.game, &known.profile, 1e-8).unwrap();
                let matches = match known.class {
                    EquilibriumClass::StrictPure => r.is_strict,
                    EquilibriumClass::FullyMixed => r.is_fully_mixed,
                    EquilibriumClass::PartiallyMixed => r.is_partially_mixed,
                };
                assert!(matches, "{} {:?}", entry.key, known.class);
            }
        }
    }

    #[test]
    fn corpus_spans_classes() {
        let games = builtin_games();
        assert!(games.len() >= 6);
        for class in [EquilibriumClass::StrictPure, EquilibriumClass::FullyMixed, EquilibriumClass::PartiallyMixed] {
            assert!(games.iter().any(|e| e.equilibria.iter().any(|k| k.class == class)));
        }
        assert!(games.iter().any(|e| e.summary().multiple_equilibria));
    }
}
