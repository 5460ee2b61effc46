//! Experiment runner behind the `ftrl` binary.
//!
//! One [`ExperimentConfig`] describes one experiment. [`run_experiment`]
//! dispatches it to the core crate, writes the report JSON (and the
//! trajectory CSV for `simulate`) and returns the exit status.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ftrl_core::analysis::{
    check_incompressibility, recurrence_probe, sample_ball, set_stability_probe, stability_probe,
    support_collapse_time, volume_preservation_test, StabilitySettings, Verdict, VolumeMode,
};
use ftrl_core::dynamics::{
    detect_support_events, integrate_reduced, integrate_scores, integrate_strategies_steep, lift_profile,
    reduce_scores, IntegratorConfig, StateSpace,
};
use ftrl_core::equilibrium::{classify_equilibrium, enumerate_equilibria};
use ftrl_core::profile::default_benchmarks;
use ftrl_core::{corpus, io, FiniteGame, MixedProfile, Regularizer};

pub use ftrl_core::corpus::{builtin_games, CorpusSummary, BUILTIN_KEYS};

pub const REPORT_SCHEMA: &str = "ftrl-report/1";

/// Nash tolerance for `classify` and `enumerate`.
pub const NASH_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Simulate,
    Divergence,
    Volume,
    Recurrence,
    Stability,
    Collapse,
    Classify,
    Enumerate,
}

impl Kind {
    pub fn is_randomized(self) -> bool {
        matches!(self, Kind::Divergence | Kind::Stability | Kind::Collapse)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned));
        f.write_str(s.as_deref().unwrap_or("?"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// Builtin key or path to a game JSON file.
    pub game: String,
    #[serde(default = "default_regularizer")]
    pub reg: Regularizer,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<StateSpace>,
    /// Start (simulate, volume, recurrence), candidate (stability), target
    /// (collapse) or profile to classify. Uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<Vec<f64>>>,
    /// Stability of the L∞ ball of this radius around `point`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball_radius: Option<f64>,
    /// Pass threshold for divergence and volume checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub out: PathBuf,
}

fn default_regularizer() -> Regularizer {
    Regularizer::NegEntropy
}

impl ExperimentConfig {
    pub fn new(kind: Kind, game: impl Into<String>, out: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            game: game.into(),
            reg: default_regularizer(),
            integrator: IntegratorConfig::default(),
            horizon: None,
            radius: None,
            epsilon: None,
            n_samples: None,
            seed: None,
            space: None,
            point: None,
            ball_radius: None,
            tolerance: None,
            out: out.into(),
        }
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        serde_json::from_str(text).context("invalid experiment config")
    }

    /// Checks that the parameters `kind` needs are present.
    pub fn validate(&self) -> anyhow::Result<()> {
        let mut missing = Vec::new();
        if self.kind.is_randomized() && self.seed.is_none() {
            missing.push("seed");
        }
        let needs_horizon = matches!(
            self.kind,
            Kind::Simulate | Kind::Volume | Kind::Recurrence | Kind::Collapse
        );
        if needs_horizon && self.horizon.is_none() {
            missing.push("horizon");
        }
        if self.kind == Kind::Recurrence && self.epsilon.is_none() {
            missing.push("epsilon");
        }
        if matches!(self.kind, Kind::Stability | Kind::Collapse) && self.radius.is_none() {
            missing.push("radius");
        }
        if !missing.is_empty() {
            bail!("{} experiment needs: {}", self.kind, missing.join(", "));
        }
        if let Some(h) = self.horizon {
            if !(h >= 0.0 && h.is_finite()) {
                bail!("horizon must be finite and non-negative, got {h}");
            }
        }
        if self.space.is_some() && self.kind != Kind::Simulate {
            bail!("space only applies to simulate");
        }
        if self.ball_radius.is_some() && self.kind != Kind::Stability {
            bail!("ball_radius only applies to stability");
        }
        Ok(())
    }

    fn integrator_until(&self, horizon: f64) -> IntegratorConfig {
        self.integrator.with_horizon(horizon)
    }
}

/// Resolves a builtin key, or reads a game file when the argument names an
/// existing file or looks like a path.
pub fn load_game(path_or_key: &str) -> ftrl_core::Result<FiniteGame> {
    let path = Path::new(path_or_key);
    let looks_like_path = path_or_key.ends_with(".json") || path_or_key.contains(std::path::MAIN_SEPARATOR);
    if path.is_file() || looks_like_path {
        io::read_game(path)
    } else {
        corpus::builtin(path_or_key)
    }
}

/// Parses `"0.7,0.3;0.6,0.4"` into per-player strategies.
pub fn parse_profile(text: &str) -> anyhow::Result<Vec<Vec<f64>>> {
    text.split(';')
        .map(|block| {
            block
                .split(',')
                .map(|v| f64::from_str(v.trim()).with_context(|| format!("bad probability '{}'", v.trim())))
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    Pass,
    Fail,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Completed | Status::Pass => 0,
            Status::Fail => 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub summary: String,
    pub report: Value,
    pub report_path: PathBuf,
    pub csv_path: Option<PathBuf>,
}

struct Finding {
    status: Status,
    summary: String,
    result: Value,
    csv: Option<String>,
}

fn finding(status: Status, summary: String, result: impl Serialize) -> anyhow::Result<Finding> {
    Ok(Finding {
        status,
        summary,
        result: serde_json::to_value(result)?,
        csv: None,
    })
}

fn point_or_uniform(config: &ExperimentConfig, game: &FiniteGame) -> anyhow::Result<MixedProfile> {
    let x = match &config.point {
        Some(p) => MixedProfile::new(p.clone()).context("invalid point")?,
        None => MixedProfile::uniform(game.action_counts()),
    };
    game.check_dims(x.blocks()).context("point does not match the game")?;
    Ok(x)
}

fn simulate(config: &ExperimentConfig, game: &FiniteGame) -> anyhow::Result<Finding> {
    let reg = &config.reg;
    let x0 = point_or_uniform(config, game)?;
    let cfg = config.integrator_until(config.horizon.unwrap_or_default());
    let space = config.space.unwrap_or(StateSpace::Score);
    let traj = match space {
        StateSpace::Score | StateSpace::Reduced => {
            let y0 = lift_profile(reg, &x0).context("start must lie in the domain of the regularizer gradient")?;
            if space == StateSpace::Score {
                let mut traj = integrate_scores(game, reg, &y0, &cfg)?;
                traj.events = detect_support_events(game, reg, &traj, &cfg)?;
                traj
            } else {
                let z0 = reduce_scores(&y0, &default_benchmarks(game.num_players()))?;
                integrate_reduced(game, reg, &z0, &cfg)?
            }
        }
        StateSpace::Primal => integrate_strategies_steep(game, reg, &x0, &cfg)?,
    };
    let final_x = traj.mixed.last().cloned().unwrap_or_default();
    let summary = format!(
        "{} samples to t = {}, {} support events",
        traj.len(),
        traj.times.last().copied().unwrap_or(0.0),
        traj.events.len()
    );
    let result = json!({
        "space": space,
        "samples": traj.len(),
        "final_time": traj.times.last(),
        "final_mixed": final_x,
        "events": traj.events,
        "stats": traj.stats,
    });
    Ok(Finding {
        status: Status::Completed,
        summary,
        result,
        csv: Some(io::trajectory_csv(&traj)),
    })
}

fn divergence(config: &ExperimentConfig, game: &FiniteGame) -> anyhow::Result<Finding> {
    let n = config.n_samples.unwrap_or(100);
    let tol = config.tolerance.unwrap_or(1e-6);
    let report = check_incompressibility(game, &config.reg, n, tol, config.seed.unwrap_or_default())?;
    let status = if report.pass { Status::Pass } else { Status::Fail };
    let summary = format!("max |div| = {:e} over {} points (tol {tol:e})", report.max_abs_divergence, 2 * n);
    finding(status, summary, report)
}

fn volume(config: &ExperimentConfig, game: &FiniteGame) -> anyhow::Result<Finding> {
    let reg = &config.reg;
    let horizon = config.horizon.unwrap_or_default();
    let tol = config.tolerance.unwrap_or(1e-4);
    let x0 = point_or_uniform(config, game)?;
    let y0 = lift_profile(reg, &x0).context("volume test needs a start in the gradient domain")?;
    let z0 = reduce_scores(&y0, &default_benchmarks(game.num_players()))?;
    let mode = match config.radius {
        Some(spread) => VolumeMode::Cloud { center: z0, spread },
        None => VolumeMode::Point(z0),
    };
    let report = volume_preservation_test(game, reg, &mode, horizon, &config.integrator_until(horizon), tol)?;
    let status = if report.pass { Status::Pass } else { Status::Fail };
    let summary = format!("max |log det| = {:e} up to T = {horizon} (tol {tol:e})", report.max_abs_log_det);
    finding(status, summary, report)
}

fn recurrence(config: &ExperimentConfig, game: &FiniteGame) -> anyhow::Result<Finding> {
    let horizon = config.horizon.unwrap_or_default();
    let x0 = point_or_uniform(config, game)?;
    let epsilon = config.epsilon.unwrap_or_default();
    let report = recurrence_probe(game, &config.reg, &x0, epsilon, horizon, &config.integrator_until(horizon))?;
    let summary = if report.stationary {
        "start is a rest point".to_string()
    } else {
        format!(
            "{} returns to the {epsilon}-ball by T = {horizon}; recurrent = {}",
            report.return_times.len(),
            report.recurrent
        )
    };
    finding(Status::Completed, summary, report)
}

fn stability(config: &ExperimentConfig, game: &FiniteGame) -> anyhow::Result<Finding> {
    let candidate = point_or_uniform(config, game)?;
    let defaults = StabilitySettings::default();
    let horizon = config.horizon.unwrap_or(defaults.horizon);
    let settings = StabilitySettings {
        radius: config.radius.unwrap_or_default(),
        n_samples: config.n_samples.unwrap_or(defaults.n_samples),
        horizon,
        conv_tol: config.tolerance.unwrap_or(defaults.conv_tol),
        seed: config.seed.unwrap_or_default(),
        integrator: config.integrator.with_horizon(horizon),
    };
    let report = match config.ball_radius {
        Some(r) => set_stability_probe(game, &config.reg, &candidate, r, &settings)?,
        None => stability_probe(game, &config.reg, &candidate, &settings)?,
    };
    // Interior targets are never asymptotically stable.
    let interior = candidate.is_interior() && (config.ball_radius.is_none() || config.reg.is_steep());
    let contradicts = interior && report.verdict == Verdict::AsymptoticallyStableEvidence;
    let status = if contradicts { Status::Fail } else { Status::Completed };
    let verdict = serde_json::to_value(report.verdict)?;
    let summary = format!(
        "verdict {}: {:.2} converged, {:.2} contained",
        verdict.as_str().unwrap_or("?"),
        report.fraction_converged,
        report.fraction_contained
    );
    finding(status, summary, report)
}

fn collapse(config: &ExperimentConfig, game: &FiniteGame) -> anyhow::Result<Finding> {
    let target = point_or_uniform(config, game)?;
    let horizon = config.horizon.unwrap_or_default();
    let n = config.n_samples.unwrap_or(50);
    let starts = sample_ball(&target, config.radius.unwrap_or_default(), n, config.seed.unwrap_or_default())?;
    let report = support_collapse_time(game, &config.reg, &target, &starts, horizon, &config.integrator_until(horizon))?;
    let status = if report.all_collapsed && report.all_within_bound {
        Status::Pass
    } else {
        Status::Fail
    };
    let summary = format!(
        "max collapse time {} against bound T0 = {} ({n} starts)",
        report.max_collapse_time,
        report.bound_t0
    );
    finding(status, summary, report)
}

fn classify(config: &ExperimentConfig, game: &FiniteGame) -> anyhow::Result<Finding> {
    let x = point_or_uniform(config, game)?;
    let report = classify_equilibrium(game, &x, NASH_TOL)?;
    let class = if !report.is_nash {
        "not a Nash equilibrium"
    } else if report.is_strict {
        "strict pure equilibrium"
    } else if report.is_pure {
        "pure equilibrium"
    } else if report.is_fully_mixed {
        "fully mixed equilibrium"
    } else {
        "partially mixed equilibrium"
    };
    finding(Status::Completed, class.to_string(), report)
}

fn enumerate(game: &FiniteGame) -> anyhow::Result<Finding> {
    let found = enumerate_equilibria(game, NASH_TOL)?;
    let summary = format!(
        "{} equilibria, {} supports skipped",
        found.equilibria.len(),
        found.skipped.len()
    );
    finding(Status::Completed, summary, found)
}

fn csv_path(report: &Path) -> PathBuf {
    report.with_extension("csv")
}

/// Runs one experiment and writes its report to `config.out` (and, for
/// `simulate`, the trajectory CSV next to it).
pub fn run_experiment(config: &ExperimentConfig) -> anyhow::Result<Outcome> {
    config.validate()?;
    config.integrator.method.validate()?;
    let game = load_game(&config.game).with_context(|| format!("loading game '{}'", config.game))?;
    let found = match config.kind {
        Kind::Simulate => simulate(config, &game),
        Kind::Divergence => divergence(config, &game),
        Kind::Volume => volume(config, &game),
        Kind::Recurrence => recurrence(config, &game),
        Kind::Stability => stability(config, &game),
        Kind::Collapse => collapse(config, &game),
        Kind::Classify => classify(config, &game),
        Kind::Enumerate => enumerate(&game),
    }
    .with_context(|| format!("{} experiment on '{}'", config.kind, config.game))?;

    let report = json!({
        "schema": REPORT_SCHEMA,
        "kind": config.kind,
        "game": {
            "source": config.game,
            "hash": game.content_hash(),
            "players": game.num_players(),
            "actions": game.action_counts(),
            "zero_sum": game.is_zero_sum(),
        },
        "regularizer": config.reg,
        "seed": config.seed,
        "config": config,
        "status": found.status,
        "summary": found.summary,
        "result": found.result,
    });
    if let Some(dir) = config.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(&config.out, text).with_context(|| format!("writing {}", config.out.display()))?;
    let csv = match found.csv {
        Some(body) => {
            let path = csv_path(&config.out);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            Some(path)
        }
        None => None,
    };
    Ok(Outcome {
        status: found.status,
        summary: format!("{} {} [{}]: {}", config.kind, config.game, config.reg, found.summary),
        report,
        report_path: config.out.clone(),
        csv_path: csv,
    })
}

/// Corpus listing with each stored equilibrium re-checked.
pub fn corpus_listing() -> anyhow::Result<Value> {
    let mut games = Vec::new();
    for entry in builtin_games() {
        for eq in &entry.equilibria {
            let report = classify_equilibrium(&entry.game, &eq.profile, NASH_TOL)?;
            if !report.is_nash {
                bail!("stored equilibrium of '{}' fails the Nash check", entry.key);
            }
        }
        games.push(entry.summary());
    }
    Ok(json!({ "schema": REPORT_SCHEMA, "games": games }))
}
