//! Game files and trajectory export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{StateSpace, Trajectory};
use crate::error::{Error, Result};
use crate::game::{FiniteGame, GameLabels};

/// On-disk game layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub players: usize,
    pub actions: Vec<usize>,
    pub payoffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<GameLabels>,
}

impl From<&FiniteGame> for GameFile {
    fn from(g: &FiniteGame) -> Self {
        Self {
            players: g.num_players(),
            actions: g.action_counts().to_vec(),
            payoffs: g.payoffs().to_vec(),
            labels: g.labels().cloned(),
        }
    }
}

impl TryFrom<GameFile> for FiniteGame {
    type Error = Error;

    fn try_from(f: GameFile) -> Result<Self> {
        if f.actions.len() != f.players {
            return Err(Error::Parse {
                context: "field `actions`".into(),
                message: format!("expected {} entries, found {}", f.players, f.actions.len()),
            });
        }
        let expected = f.players * f.actions.iter().product::<usize>();
        if f.payoffs.len() != expected {
            return Err(Error::Parse {
                context: "field `payoffs`".into(),
                message: format!("expected {expected} entries, found {}", f.payoffs.len()),
            });
        }
        let game = FiniteGame::new(f.actions, f.payoffs).map_err(|e| Error::Parse {
            context: "game".into(),
            message: e.to_string(),
        })?;
        match f.labels {
            Some(l) => game.with_labels(l).map_err(|e| Error::Parse {
                context: "field `labels`".into(),
                message: e.to_string(),
            }),
            None => Ok(game),
        }
    }
}

pub fn parse_game(text: &str) -> Result<FiniteGame> {
    let file: GameFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    file.try_into()
}

pub fn game_to_json(game: &FiniteGame) -> String {
    serde_json::to_string_pretty(&GameFile::from(game)).expect("game serializes")
}

pub fn read_game(path: &Path) -> Result<FiniteGame> {
    let text = fs::read_to_string(path)?;
    parse_game(&text).map_err(|e| match e {
        Error::Parse { context, message } => Error::Parse {
            context: format!("{}: {context}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn write_game(game: &FiniteGame, path: &Path) -> Result<()> {
    fs::write(path, game_to_json(game) + "\n")?;
    Ok(())
}

fn coordinate_names(prefix: &str, counts: &[usize], out: &mut Vec<String>) {
    for (i, &m) in counts.iter().enumerate() {
        out.extend((0..m).map(|a| format!("{prefix}{i}_{a}")));
    }
}

/// CSV with columns `t`, the state coordinates (`y` for score, `z` for
/// reduced trajectories) and then `x`, all player-major.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut header = vec!["t".to_string()];
    match traj.space {
        StateSpace::Score => coordinate_names("y", &traj.action_counts, &mut header),
        StateSpace::Reduced => {
            let dims: Vec<usize> = traj.action_counts.iter().map(|m| m - 1).collect();
            coordinate_names("z", &dims, &mut header)
        }
        StateSpace::Primal => {}
    }
    coordinate_names("x", &traj.action_counts, &mut header);
    let mut out = header.join(",");
    out.push('\n');
    for k in 0..traj.len() {
        let _ = write!(out, "{}", traj.times[k]);
        if traj.space != StateSpace::Primal {
            for v in &traj.states[k] {
                let _ = write!(out, ",{v}");
            }
        }
        for v in &traj.mixed[k] {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn trajectory_json(traj: &Trajectory) -> String {
    serde_json::to_string_pretty(traj).expect("trajectory serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn round_trip_builtin() {
        let g = corpus::rock_paper_scissors();
        let back = parse_game(&game_to_json(&g)).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn payoff_count_error_names_counts() {
        let err = parse_game(r#"{"players": 2, "actions": [2, 2], "payoffs": [1, 2, 3]}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 8") && msg.contains("found 3"), "{msg}");
        assert!(msg.contains("payoffs"));
    }

    #[test]
    fn syntax_error_has_line() {
        let err = parse_game("{\n  \"players\": 2,\n  \"actions\": [2 2]\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn actions_length_mismatch() {
        let err = parse_game(r#"{"players": 3, "actions": [2, 2], "payoffs": []}"#).unwrap_err();
        assert!(err.to_string().contains("expected 3 entries, found 2"));
    }
}
