use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use ftrl_cli::{corpus_listing, parse_profile, run_experiment, ExperimentConfig, Kind};
use ftrl_core::dynamics::StateSpace;
use ftrl_core::ode::Method;
use ftrl_core::Regularizer;

#[derive(Parser)]
#[command(name = "ftrl", version, about = "Experiments on continuous-time FTRL dynamics in finite games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and export it as CSV.
    Simulate(ExperimentArgs),
    /// Finite-difference divergence of the score and reduced fields.
    Divergence(ExperimentArgs),
    /// Determinant of the flow Jacobian along a trajectory.
    Volume(ExperimentArgs),
    /// Returns of a trajectory to a neighbourhood of its start.
    Recurrence(ExperimentArgs),
    /// Seeded stability probe around a profile (or a ball with --ball-radius).
    Stability(ExperimentArgs),
    /// Support collapse times near a pure equilibrium, against the T0 bound.
    Collapse(ExperimentArgs),
    /// Classify a profile as a Nash equilibrium.
    Classify(ExperimentArgs),
    /// Enumerate Nash equilibria by support enumeration.
    Enumerate(ExperimentArgs),
    /// Run an experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the builtin games and their known equilibria.
    Corpus {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Builtin key or path to a game JSON file.
    #[arg(long)]
    game: String,
    /// negentropy | euclidean | tsallis:q=<float>
    #[arg(long, default_value = "negentropy")]
    reg: Regularizer,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_space)]
    space: Option<StateSpace>,
    /// Profile as "p,p;p,p" (one block per player). Uniform by default.
    #[arg(long)]
    point: Option<String>,
    #[arg(long)]
    ball_radius: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Fixed RK4 step; adaptive Dormand-Prince when absent.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    /// Spacing of the output sample grid.
    #[arg(long)]
    interval: Option<f64>,
    /// Report JSON path; simulate also writes the CSV next to it.
    #[arg(long)]
    out: PathBuf,
}

fn parse_space(s: &str) -> Result<StateSpace, String> {
    match s {
        "score" => Ok(StateSpace::Score),
        "reduced" => Ok(StateSpace::Reduced),
        "primal" => Ok(StateSpace::Primal),
        other => Err(format!("unknown space '{other}' (score, reduced or primal)")),
    }
}

impl ExperimentArgs {
    fn into_config(self, kind: Kind) -> anyhow::Result<ExperimentConfig> {
        let mut config = ExperimentConfig::new(kind, self.game, self.out);
        config.reg = self.reg;
        config.horizon = self.horizon;
        config.radius = self.radius;
        config.epsilon = self.epsilon;
        config.n_samples = self.samples;
        config.seed = self.seed;
        config.space = self.space;
        config.ball_radius = self.ball_radius;
        config.tolerance = self.tolerance;
        config.point = self.point.as_deref().map(parse_profile).transpose().context("invalid --point")?;
        let integrator = &mut config.integrator;
        integrator.method = match (self.step, integrator.method) {
            (Some(step), _) => Method::Rk4Fixed { step },
            (None, Method::Rk45Adaptive { rtol, atol }) => Method::Rk45Adaptive {
                rtol: self.rtol.unwrap_or(rtol),
                atol: self.atol.unwrap_or(atol),
            },
            (None, m) => m,
        };
        if let Some(interval) = self.interval {
            integrator.sample_interval = interval;
        }
        Ok(config)
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var("FTRL_THREADS") {
        let n: usize = value.parse().with_context(|| format!("FTRL_THREADS must be a count, got '{value}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    configure_threads()?;
    let (kind, args) = match cli.command {
        Command::Simulate(a) => (Kind::Simulate, a),
        Command::Divergence(a) => (Kind::Divergence, a),
        Command::Volume(a) => (Kind::Volume, a),
        Command::Recurrence(a) => (Kind::Recurrence, a),
        Command::Stability(a) => (Kind::Stability, a),
        Command::Collapse(a) => (Kind::Collapse, a),
        Command::Classify(a) => (Kind::Classify, a),
        Command::Enumerate(a) => (Kind::Enumerate, a),
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            return execute(&ExperimentConfig::from_json(&text)?);
        }
        Command::Corpus { out } => {
            let mut text = serde_json::to_string_pretty(&corpus_listing()?)?;
            text.push('\n');
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            return Ok(0);
        }
    };
    execute(&args.into_config(kind)?)
}

fn execute(config: &ExperimentConfig) -> anyhow::Result<u8> {
    let outcome = run_experiment(config)?;
    println!("{}: {}", outcome.summary, serde_json::to_value(outcome.status)?.as_str().unwrap_or("?"));
    Ok(outcome.status.exit_code())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
