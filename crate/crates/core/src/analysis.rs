//! Numerical experiments on FTRL flows: incompressibility, volume
//! preservation, recurrence, stability of equilibria and finite-time
//! collapse onto the support of a strict equilibrium.

use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    detect_support_events, flow_jacobian_series, integrate_scores, lift_profile, reduce_scores, IntegratorConfig,
    ReducedSystem, ScoreSystem, StateSpace, Trajectory,
};
use crate::equilibrium::{classify_equilibrium, genericity, is_nash, supported_payoff_gaps};
use crate::error::{Error, Result};
use crate::game::FiniteGame;
use crate::ode::{self, OdeSystem};
use crate::profile::{default_benchmarks, Blocks, MixedProfile, ReducedScore, SupportSet};
use crate::regularizer::Regularizer;

/// Central-difference divergence `Σ_k ∂f_k/∂p_k` with step `1e-5 (1 + |p_k|)`.
pub fn fd_divergence<F>(field: F, point: &[f64]) -> Result<f64>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let d = point.len();
    let mut p = point.to_vec();
    let (mut fp, mut fm) = (vec![0.0; d], vec![0.0; d]);
    let mut div = 0.0;
    for k in 0..d {
        let h = 1e-5 * (1.0 + point[k].abs());
        p[k] = point[k] + h;
        field(&p, &mut fp)?;
        p[k] = point[k] - h;
        field(&p, &mut fm)?;
        p[k] = point[k];
        div += (fp[k] - fm[k]) / (2.0 * h);
    }
    Ok(div)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSample {
    pub space: StateSpace,
    pub state: Vec<f64>,
    pub divergence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeReport {
    /// `(t, det ∂Φ_t/∂z0)`.
    pub det_jacobian_per_time: Vec<(f64, f64)>,
    pub max_abs_log_det: f64,
    pub divergence_samples: Vec<DivergenceSample>,
    pub max_abs_divergence: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl VolumeReport {
    fn finish(det: Vec<(f64, f64)>, div: Vec<DivergenceSample>, tolerance: f64) -> Self {
        let max_abs_log_det = det
            .iter()
            .map(|&(_, d)| if d > 0.0 { d.ln().abs() } else { f64::INFINITY })
            .fold(0.0, f64::max);
        let max_abs_divergence = div.iter().map(|s| s.divergence.abs()).fold(0.0, f64::max);
        Self {
            pass: max_abs_log_det <= tolerance && max_abs_divergence <= tolerance,
            det_jacobian_per_time: det,
            max_abs_log_det,
            divergence_samples: div,
            max_abs_divergence,
            tolerance,
        }
    }
}

fn uniform_box(rng: &mut ChaCha8Rng, dim: usize, half_width: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-half_width..half_width)).collect()
}

/// Divergence of an arbitrary field at `n_points` seeded states drawn from
/// `[-2, 2]^dim`.
pub fn divergence_check<F>(
    field: F,
    space: StateSpace,
    dim: usize,
    n_points: usize,
    tol: f64,
    seed: u64,
) -> Result<VolumeReport>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n_points)
        .map(|_| {
            let state = uniform_box(&mut rng, dim, 2.0);
            let divergence = fd_divergence(&field, &state)?;
            Ok(DivergenceSample { space, state, divergence })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VolumeReport::finish(Vec::new(), samples, tol))
}

/// Finite-difference divergence of the score field and of the reduced field
/// (benchmark action 0) at `n_points` seeded states each.
pub fn check_incompressibility(
    game: &FiniteGame,
    reg: &Regularizer,
    n_points: usize,
    tol: f64,
    seed: u64,
) -> Result<VolumeReport> {
    let score = ScoreSystem::new(game, *reg);
    let reduced = ReducedSystem::new(game, *reg, default_benchmarks(game.num_players()))?;
    let mut a = divergence_check(|y, dy| score.rhs(y, dy), StateSpace::Score, score.dim(), n_points, tol, seed)?;
    let b = divergence_check(
        |z, dz| reduced.rhs(z, dz),
        StateSpace::Reduced,
        reduced.dim(),
        n_points,
        tol,
        seed.wrapping_add(1),
    )?;
    a.divergence_samples.extend(b.divergence_samples);
    Ok(VolumeReport::finish(Vec::new(), a.divergence_samples, tol))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMode {
    /// Variational equations along the trajectory of one point.
    Point(ReducedScore),
    /// The parallelepiped spanned by `center ± spread·e_k`, each vertex
    /// integrated separately.
    Cloud { center: ReducedScore, spread: f64 },
}

pub fn volume_preservation_test(
    game: &FiniteGame,
    reg: &Regularizer,
    mode: &VolumeMode,
    horizon: f64,
    config: &IntegratorConfig,
    tol: f64,
) -> Result<VolumeReport> {
    let det = match mode {
        VolumeMode::Point(z0) => flow_jacobian_series(game, reg, z0, horizon, config)?
            .into_iter()
            .map(|(t, m)| (t, m.determinant()))
            .collect(),
        VolumeMode::Cloud { center, spread } => cloud_determinants(game, reg, center, *spread, horizon, config)?,
    };
    Ok(VolumeReport::finish(det, Vec::new(), tol))
}

fn cloud_determinants(
    game: &FiniteGame,
    reg: &Regularizer,
    center: &ReducedScore,
    spread: f64,
    horizon: f64,
    config: &IntegratorConfig,
) -> Result<Vec<(f64, f64)>> {
    if !(spread > 0.0) {
        return Err(Error::InvalidConfig("cloud spread must be positive".into()));
    }
    let sys = ReducedSystem::new(game, *reg, center.benchmarks().to_vec())?;
    let d = sys.dim();
    if center.dim() != d {
        return Err(Error::DimensionMismatch {
            what: "cloud center",
            expected: d,
            found: center.dim(),
        });
    }
    if horizon == 0.0 {
        return Ok(vec![(0.0, 1.0)]);
    }
    let paths: Vec<Vec<Vec<f64>>> = (0..2 * d)
        .into_par_iter()
        .map(|j| {
            let mut z0 = center.as_slice().to_vec();
            z0[j / 2] += if j % 2 == 0 { spread } else { -spread };
            let mut path = Vec::new();
            ode::integrate(&sys, &config.method, &z0, horizon, config.sample_interval, |_, z| {
                path.push(z.to_vec());
                ControlFlow::Continue(())
            })?;
            Ok(path)
        })
        .collect::<Result<_>>()?;
    let times = ode::sample_grid(horizon, config.sample_interval);
    Ok(times
        .iter()
        .enumerate()
        .map(|(s, &t)| {
            let m = nalgebra::DMatrix::from_fn(d, d, |r, k| (paths[2 * k][s][r] - paths[2 * k + 1][s][r]) / (2.0 * spread));
            (t, m.determinant())
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub start: MixedProfile,
    pub epsilon: f64,
    pub horizon: f64,
    pub return_times: Vec<f64>,
    pub recurrent: bool,
    /// The start is a rest point; no excursion is possible.
    pub stationary: bool,
    pub max_excursion: f64,
}

fn interior_start(reg: &Regularizer, x0: &MixedProfile) -> Result<ReducedScore> {
    let y0 = lift_profile(reg, x0)?;
    reduce_scores(&y0, &default_benchmarks(x0.num_players()))
}

/// Records each re-entry of `x(t)` into the `ε`-ball around `x0` that
/// follows an exit from the `2ε`-ball.
pub fn recurrence_probe(
    game: &FiniteGame,
    reg: &Regularizer,
    x0: &MixedProfile,
    epsilon: f64,
    horizon: f64,
    config: &IntegratorConfig,
) -> Result<RecurrenceReport> {
    if !x0.is_interior() {
        return Err(Error::InvalidProfile("recurrence probe needs an interior start".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig("epsilon must be positive".into()));
    }
    let cfg = config.with_horizon(horizon);
    cfg.validate()?;
    let z0 = interior_start(reg, x0)?;
    let sys = ReducedSystem::new(game, *reg, z0.benchmarks().to_vec())?;
    let start = x0.as_slice();
    let mut armed = false;
    let mut returns = Vec::new();
    let mut max_excursion: f64 = 0.0;
    let mut failure = None;
    ode::integrate(&sys, &cfg.method, z0.as_slice(), horizon, cfg.sample_interval, |t, z| {
        let x = match sys.choice(z) {
            Ok(x) => x,
            Err(e) => {
                failure = Some(e);
                return ControlFlow::Break(());
            }
        };
        let dist = x.iter().zip(start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        max_excursion = max_excursion.max(dist);
        if dist > 2.0 * epsilon {
            armed = true;
        } else if armed && dist < epsilon {
            returns.push(t);
            armed = false;
        }
        ControlFlow::Continue(())
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RecurrenceReport {
        start: x0.clone(),
        epsilon,
        horizon,
        recurrent: !returns.is_empty(),
        return_times: returns,
        stationary: max_excursion < 1e-9,
        max_excursion,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AsymptoticallyStableEvidence,
    UnstableEvidence,
    Inconclusive,
}

impl Verdict {
    pub fn from_fractions(converged: f64, contained: f64) -> Self {
        if converged >= 0.98 && contained == 1.0 {
            Verdict::AsymptoticallyStableEvidence
        } else if converged <= 0.02 {
            Verdict::UnstableEvidence
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilitySettings {
    pub radius: f64,
    pub n_samples: usize,
    pub horizon: f64,
    pub conv_tol: f64,
    pub seed: u64,
    pub integrator: IntegratorConfig,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        Self {
            radius: 0.05,
            n_samples: 50,
            horizon: 200.0,
            conv_tol: 1e-6,
            seed: 0,
            integrator: IntegratorConfig::adaptive(1e-9, 1e-12, 200.0, 0.5),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub candidate: MixedProfile,
    /// Set mode: the L∞ ball around `candidate` whose stability is probed.
    pub ball_radius: Option<f64>,
    pub radius: f64,
    pub n_samples: usize,
    pub horizon: f64,
    pub conv_tol: f64,
    pub seed: u64,
    pub fraction_converged: f64,
    pub fraction_contained: f64,
    pub verdict: Verdict,
    /// Distance to the target at the horizon, per sample.
    pub final_distances: Vec<f64>,
}

fn dirichlet(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    w
}

fn blend(center: &MixedProfile, rng: &mut ChaCha8Rng, s: f64) -> Result<MixedProfile> {
    let strategies = (0..center.num_players())
        .map(|i| {
            let c = center.strategy(i);
            let w = dirichlet(rng, c.len());
            c.iter().zip(&w).map(|(a, b)| (1.0 - s) * a + s * b).collect()
        })
        .collect::<Vec<Vec<f64>>>();
    MixedProfile::normalized(Blocks::from(strategies))
}

/// Seeded starts `(1 − s)·center + s·w` with `w` Dirichlet(1) per player and
/// `s` uniform on `(0, radius]`; each lies within L∞ distance `radius` of
/// `center` and in the interior of the strategy space.
pub fn sample_ball(center: &MixedProfile, radius: f64, n: usize, seed: u64) -> Result<Vec<MixedProfile>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s = radius * (1.0 - rng.random::<f64>());
            blend(center, &mut rng, s)
        })
        .collect()
}

/// Distance from each sample to the target, sampled on the integrator grid.
fn distance_path(
    game: &FiniteGame,
    reg: &Regularizer,
    start: &MixedProfile,
    config: &IntegratorConfig,
    distance: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<Vec<(f64, f64)>> {
    let z0 = interior_start(reg, start)?;
    let sys = ReducedSystem::new(game, *reg, z0.benchmarks().to_vec())?;
    let mut path = Vec::new();
    let mut failure = None;
    ode::integrate(&sys, &config.method, z0.as_slice(), config.horizon, config.sample_interval, |t, z| {
        match sys.choice(z) {
            Ok(x) => {
                path.push((t, distance(&x)));
                ControlFlow::Continue(())
            }
            Err(e) => {
                failure = Some(e);
                ControlFlow::Break(())
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(path),
    }
}

fn run_probe(
    game: &FiniteGame,
    reg: &Regularizer,
    candidate: &MixedProfile,
    ball_radius: Option<f64>,
    starts: Vec<MixedProfile>,
    settings: &StabilitySettings,
) -> Result<StabilityReport> {
    let center = candidate.as_slice().to_vec();
    let inner = ball_radius.unwrap_or(0.0);
    let distance = move |x: &[f64]| {
        let d = x.iter().zip(&center).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        (d - inner).max(0.0)
    };
    let config = settings.integrator.with_horizon(settings.horizon);
    config.validate()?;
    let late = 0.75 * settings.horizon;
    let outcomes: Vec<(bool, bool, f64)> = starts
        .par_iter()
        .map(|x0| {
            let path = distance_path(game, reg, x0, &config, &distance)?;
            let converged = path.iter().filter(|(t, _)| *t >= late).all(|(_, d)| *d < settings.conv_tol);
            let contained = path.iter().all(|(_, d)| *d <= 10.0 * settings.radius);
            Ok((converged, contained, path.last().map_or(f64::NAN, |p| p.1)))
        })
        .collect::<Result<_>>()?;
    let n = outcomes.len() as f64;
    let fraction_converged = outcomes.iter().filter(|o| o.0).count() as f64 / n;
    let fraction_contained = outcomes.iter().filter(|o| o.1).count() as f64 / n;
    Ok(StabilityReport {
        candidate: candidate.clone(),
        ball_radius,
        radius: settings.radius,
        n_samples: settings.n_samples,
        horizon: settings.horizon,
        conv_tol: settings.conv_tol,
        seed: settings.seed,
        fraction_converged,
        fraction_contained,
        verdict: Verdict::from_fractions(fraction_converged, fraction_contained),
        final_distances: outcomes.into_iter().map(|o| o.2).collect(),
    })
}

fn check_settings(settings: &StabilitySettings) -> Result<()> {
    if settings.n_samples < 10 {
        return Err(Error::InvalidConfig(format!("need at least 10 samples, got {}", settings.n_samples)));
    }
    if !(settings.radius > 0.0 && settings.conv_tol > 0.0) {
        return Err(Error::InvalidConfig("radius and conv_tol must be positive".into()));
    }
    Ok(())
}

/// Integrates seeded starts near `candidate`. A start converges when its
/// distance to `candidate` stays below `conv_tol` over the last quarter of
/// the horizon; it is contained when it never leaves the `10·radius` ball.
pub fn stability_probe(
    game: &FiniteGame,
    reg: &Regularizer,
    candidate: &MixedProfile,
    settings: &StabilitySettings,
) -> Result<StabilityReport> {
    check_settings(settings)?;
    game.check_dims(candidate.blocks())?;
    let starts = sample_ball(candidate, settings.radius, settings.n_samples, settings.seed)?;
    run_probe(game, reg, candidate, None, starts, settings)
}

/// Stability of the closed L∞ ball of radius `ball_radius` around `center`.
/// Starts sit at a uniform distance between `ball_radius + 2·conv_tol` and
/// `ball_radius + radius` along a Dirichlet(1) direction; distances are
/// measured to the ball.
pub fn set_stability_probe(
    game: &FiniteGame,
    reg: &Regularizer,
    center: &MixedProfile,
    ball_radius: f64,
    settings: &StabilitySettings,
) -> Result<StabilityReport> {
    check_settings(settings)?;
    game.check_dims(center.blocks())?;
    if !(ball_radius > 0.0) {
        return Err(Error::InvalidConfig("ball radius must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let outer = ball_radius + settings.radius;
    let floor = ball_radius + 2.0 * settings.conv_tol;
    let mut starts = Vec::with_capacity(settings.n_samples);
    let mut attempts = 0;
    while starts.len() < settings.n_samples {
        attempts += 1;
        if attempts > 1000 * settings.n_samples {
            return Err(Error::InvalidConfig("could not sample the shell around the ball".into()));
        }
        let w = blend(center, &mut rng, 1.0)?;
        let reach = w.distance(center);
        let target = outer - (outer - floor) * rng.random::<f64>();
        if reach >= target {
            let lambda = target / reach;
            let strategies = (0..center.num_players())
                .map(|i| {
                    let c = center.strategy(i);
                    c.iter().zip(w.strategy(i)).map(|(a, b)| (1.0 - lambda) * a + lambda * b).collect()
                })
                .collect::<Vec<Vec<f64>>>();
            starts.push(MixedProfile::normalized(Blocks::from(strategies))?);
        }
    }
    run_probe(game, reg, center, Some(ball_radius), starts, settings)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T0Bound {
    pub g_constant: f64,
    pub c_constant: f64,
    pub t0: f64,
    pub radius: f64,
}

/// Points with coordinates in `{0, 1/n, …, 1}` on the simplex of dimension `m`.
fn simplex_grid(m: usize, n: usize) -> Vec<Vec<f64>> {
    fn rec(m: usize, left: usize, n: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if prefix.len() == m - 1 {
            prefix.push(left);
            out.push(prefix.iter().map(|&k| k as f64 / n as f64).collect());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(m, left - k, n, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, n, n, &mut Vec::new(), &mut out);
    out
}

/// `G = max` over a mesh-1/64 grid on each player's simplex of
/// `max_{a,b} |g_a(x) − g_b(x)|`; `c` = smallest supported-vs-unsupported
/// payoff gap over the L∞ ball of `radius` around `x_star`; `T₀ = 2G/c`.
///
/// `c` is evaluated at the products of per-player extreme points of the
/// ball (exact for two-action players, since the gap is multilinear) and
/// at 2000 seeded interior samples.
pub fn t0_bound(game: &FiniteGame, reg: &Regularizer, x_star: &MixedProfile, radius: f64) -> Result<T0Bound> {
    if reg.is_steep() {
        return Err(Error::SteepRegularizer);
    }
    game.check_dims(x_star.blocks())?;
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig("radius must be positive".into()));
    }
    let support = x_star.support();
    if support.is_full(game.action_counts()) {
        return Err(Error::InvalidSupport("a fully mixed profile has no unsupported actions".into()));
    }
    let mut g_constant: f64 = 0.0;
    for &m in game.action_counts() {
        for x in simplex_grid(m, 64) {
            let g = reg.gradient(&x)?;
            let hi = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = g.iter().copied().fold(f64::INFINITY, f64::min);
            g_constant = g_constant.max(hi - lo);
        }
    }

    let per_player: Vec<Vec<Vec<f64>>> = (0..game.num_players())
        .map(|i| {
            let xi = x_star.strategy(i);
            let mut pts = vec![xi.to_vec()];
            for &a in support.player(i) {
                let t = radius.min(xi[a]);
                for b in (0..xi.len()).filter(|&b| b != a) {
                    let mut p = xi.to_vec();
                    p[a] -= t;
                    p[b] += t;
                    pts.push(p);
                }
            }
            pts
        })
        .collect();
    let gap_at = |x: &MixedProfile| -> Result<f64> {
        let v = game.payoff_field(x)?;
        Ok(supported_payoff_gaps(&v, &support).into_iter().fold(f64::INFINITY, f64::min))
    };
    let mut c_constant = f64::INFINITY;
    let counts: Vec<usize> = per_player.iter().map(Vec::len).collect();
    let mut idx = vec![0; counts.len()];
    loop {
        let strategies: Vec<Vec<f64>> = idx.iter().enumerate().map(|(i, &k)| per_player[i][k].clone()).collect();
        c_constant = c_constant.min(gap_at(&MixedProfile::normalized(Blocks::from(strategies))?)?);
        if !crate::game::advance_odometer(&mut idx, &counts) {
            break;
        }
    }
    for x in sample_ball(x_star, radius, 2000, 0x7030)? {
        c_constant = c_constant.min(gap_at(&x)?);
    }
    if !(c_constant > 0.0) {
        return Err(Error::NonPositiveGap { gap: c_constant });
    }
    Ok(T0Bound {
        g_constant,
        c_constant,
        t0: 2.0 * g_constant / c_constant,
        radius,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseSample {
    pub start: MixedProfile,
    /// Time after which the support equals the target support up to the
    /// horizon; `None` if it does not settle.
    pub collapse_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportCollapseReport {
    pub target: MixedProfile,
    pub samples: Vec<CollapseSample>,
    pub max_collapse_time: f64,
    pub bound_t0: f64,
    pub g_constant: f64,
    pub c_constant: f64,
    /// Radius of the ball on which `c` was estimated: the largest start
    /// distance from the target.
    pub radius: f64,
    pub horizon: f64,
    pub all_collapsed: bool,
    pub all_within_bound: bool,
}

fn settle_time(
    game: &FiniteGame,
    reg: &Regularizer,
    target: &SupportSet,
    traj: &Trajectory,
    config: &IntegratorConfig,
) -> Result<Option<f64>> {
    let supports: Vec<SupportSet> = (0..traj.len())
        .map(|k| traj.mixed_profile(k).map(|x| x.support()))
        .collect::<Result<_>>()?;
    let Some(k) = supports.iter().rposition(|s| s != target) else {
        return Ok(Some(0.0));
    };
    if k + 1 == supports.len() {
        return Ok(None);
    }
    let window = Trajectory {
        times: traj.times[k..=k + 1].to_vec(),
        states: traj.states[k..=k + 1].to_vec(),
        mixed: traj.mixed[k..=k + 1].to_vec(),
        events: Vec::new(),
        ..traj.clone()
    };
    let events = detect_support_events(game, reg, &window, config)?;
    Ok(Some(events.iter().map(|e| e.time).fold(traj.times[k], f64::max)))
}

/// Measures, for each start, when the support of `x(t)` settles on the
/// support of `x_star`, and compares the largest such time with `T₀ = 2G/c`.
pub fn support_collapse_time(
    game: &FiniteGame,
    reg: &Regularizer,
    x_star: &MixedProfile,
    starts: &[MixedProfile],
    horizon: f64,
    config: &IntegratorConfig,
) -> Result<SupportCollapseReport> {
    if reg.is_steep() {
        return Err(Error::SteepRegularizer);
    }
    let generic = genericity(game, 1e-9)?;
    if !generic.generic {
        return Err(Error::NonGenericGame(format!("minimum payoff gap {:e}", generic.min_gap)));
    }
    let class = classify_equilibrium(game, x_star, 1e-9)?;
    if !class.is_quasi_strict {
        return Err(Error::NotQuasiStrict);
    }
    if starts.is_empty() {
        return Err(Error::InvalidConfig("no starts given".into()));
    }
    let radius = starts.iter().map(|s| s.distance(x_star)).fold(0.0, f64::max);
    let bound = t0_bound(game, reg, x_star, radius.max(1e-12))?;
    let cfg = config.with_horizon(horizon);
    cfg.validate()?;
    let target = x_star.support();
    let samples: Vec<CollapseSample> = starts
        .par_iter()
        .map(|x0| {
            let y0 = lift_profile(reg, x0)?;
            let traj = integrate_scores(game, reg, &y0, &cfg)?;
            Ok(CollapseSample {
                start: x0.clone(),
                collapse_time: settle_time(game, reg, &target, &traj, &cfg)?,
            })
        })
        .collect::<Result<_>>()?;
    let all_collapsed = samples.iter().all(|s| s.collapse_time.is_some());
    let max_collapse_time = samples.iter().filter_map(|s| s.collapse_time).fold(0.0, f64::max);
    Ok(SupportCollapseReport {
        target: x_star.clone(),
        max_collapse_time,
        bound_t0: bound.t0,
        g_constant: bound.g_constant,
        c_constant: bound.c_constant,
        radius: bound.radius,
        horizon,
        all_collapsed,
        all_within_bound: all_collapsed && max_collapse_time <= bound.t0,
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub initial_value: f64,
    pub max_abs_drift: f64,
    /// Drift relative to `|initial_value|`, or absolute when that is below 1e-12.
    pub max_relative_drift: f64,
    pub relative: bool,
    pub values: Vec<(f64, f64)>,
}

/// Tracks `Σ_i h(x*_i) + h*(y_i) − ⟨y_i, x*_i⟩`, with
/// `h*(y) = ⟨y, Q(y)⟩ − h(Q(y))`, along a score or reduced trajectory.
pub fn zero_sum_excursion_check(
    game: &FiniteGame,
    reg: &Regularizer,
    x_star: &MixedProfile,
    traj: &Trajectory,
) -> Result<DriftReport> {
    if game.num_players() != 2 || !game.is_zero_sum() {
        return Err(Error::NotZeroSum);
    }
    if !x_star.is_interior() || !is_nash(game, x_star, 1e-8)? {
        return Err(Error::NonInteriorEquilibrium);
    }
    if traj.is_empty() {
        return Err(Error::InvalidConfig("empty trajectory".into()));
    }
    let offs = game.offsets();
    let values: Vec<(f64, f64)> = (0..traj.len())
        .map(|k| {
            let y = match traj.space {
                StateSpace::Score => traj.states[k].clone(),
                StateSpace::Reduced => {
                    let benchmarks = traj.benchmarks.clone().unwrap_or_else(|| default_benchmarks(2));
                    let dims: Vec<usize> = traj.action_counts.iter().map(|m| m - 1).collect();
                    let z = ReducedScore::new(Blocks::from_flat(traj.states[k].clone(), &dims)?, benchmarks)?;
                    crate::dynamics::lift_reduced(&z).as_slice().to_vec()
                }
                StateSpace::Primal => {
                    return Err(Error::InvalidConfig("excursion check needs score coordinates".into()))
                }
            };
            let x = &traj.mixed[k];
            let mut total = 0.0;
            for i in 0..2 {
                let r = offs[i]..offs[i + 1];
                let (yi, xi, si) = (&y[r.clone()], &x[r.clone()], x_star.strategy(i));
                let dot = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
                total += reg.value(si) + dot(yi, xi) - reg.value(xi) - dot(yi, si);
            }
            Ok((traj.times[k], total))
        })
        .collect::<Result<_>>()?;
    let initial_value = values[0].1;
    let max_abs_drift = values.iter().map(|v| (v.1 - initial_value).abs()).fold(0.0, f64::max);
    let relative = initial_value.abs() > 1e-12;
    Ok(DriftReport {
        initial_value,
        max_abs_drift,
        max_relative_drift: if relative { max_abs_drift / initial_value.abs() } else { max_abs_drift },
        relative,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn constant_game_has_zero_divergence() {
        let g = FiniteGame::new(vec![2, 3], vec![1.5; 12]).unwrap();
        let r = check_incompressibility(&g, &Regularizer::NegEntropy, 10, 1e-12, 1).unwrap();
        assert!(r.divergence_samples.iter().all(|s| s.divergence == 0.0));
        assert!(r.pass);
    }

    #[test]
    fn perturbed_field_fails() {
        let mp = corpus::matching_pennies();
        let sys = ScoreSystem::new(&mp, Regularizer::NegEntropy);
        let r = divergence_check(
            |y, dy| {
                sys.rhs(y, dy)?;
                dy.iter_mut().zip(y).for_each(|(d, v)| *d += 0.1 * v);
                Ok(())
            },
            StateSpace::Score,
            4,
            20,
            1e-6,
            3,
        )
        .unwrap();
        assert!(!r.pass);
        for s in &r.divergence_samples {
            assert!((s.divergence - 0.4).abs() < 1e-8);
        }
    }

    #[test]
    fn grid_counts() {
        assert_eq!(simplex_grid(2, 64).len(), 65);
        assert_eq!(simplex_grid(3, 4).len(), 15);
        assert!(simplex_grid(3, 64).iter().all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn euclidean_g_on_two_actions() {
        let dom = corpus::dominance_2x2();
        let x = MixedProfile::pure(&[2, 2], &[0, 0]).unwrap();
        let b = t0_bound(&dom, &Regularizer::SquaredEuclidean, &x, 0.01).unwrap();
        assert_eq!(b.g_constant, 1.0);
        assert!((b.c_constant - 1.0).abs() < 0.05);
        assert!((b.t0 - 2.0).abs() < 0.1);
        assert_eq!(b.t0, 2.0 * b.g_constant / b.c_constant);
    }

    #[test]
    fn t0_bound_preconditions() {
        let dom = corpus::dominance_2x2();
        let x = MixedProfile::pure(&[2, 2], &[0, 0]).unwrap();
        assert!(matches!(t0_bound(&dom, &Regularizer::NegEntropy, &x, 0.01), Err(Error::SteepRegularizer)));
        let coord = corpus::coordination_2x2();
        // The mixed equilibrium lies within this ball.
        assert!(matches!(
            t0_bound(&coord, &Regularizer::SquaredEuclidean, &x, 0.9),
            Err(Error::NonPositiveGap { .. })
        ));
    }

    #[test]
    fn verdict_rule() {
        assert_eq!(Verdict::from_fractions(1.0, 1.0), Verdict::AsymptoticallyStableEvidence);
        assert_eq!(Verdict::from_fractions(0.99, 0.9), Verdict::Inconclusive);
        assert_eq!(Verdict::from_fractions(0.02, 1.0), Verdict::UnstableEvidence);
        assert_eq!(Verdict::from_fractions(0.5, 1.0), Verdict::Inconclusive);
    }

    #[test]
    fn ball_samples_are_close_and_interior() {
        let c = MixedProfile::pure(&[2, 3], &[0, 2]).unwrap();
        let s = sample_ball(&c, 0.05, 200, 9).unwrap();
        assert!(s.iter().all(|x| x.distance(&c) <= 0.05 + 1e-15 && x.is_interior()));
        assert_eq!(s, sample_ball(&c, 0.05, 200, 9).unwrap());
    }

    #[test]
    fn excursion_preconditions() {
        let coord = corpus::coordination_2x2();
        let traj = Trajectory {
            space: StateSpace::Score,
            action_counts: vec![2, 2],
            benchmarks: None,
            times: vec![0.0],
            states: vec![vec![0.0; 4]],
            mixed: vec![vec![0.5; 4]],
            events: vec![],
            stats: Default::default(),
        };
        let x = MixedProfile::uniform(&[2, 2]);
        assert!(matches!(
            zero_sum_excursion_check(&coord, &Regularizer::NegEntropy, &x, &traj),
            Err(Error::NotZeroSum)
        ));
        let mp = corpus::matching_pennies();
        let pure = MixedProfile::pure(&[2, 2], &[0, 0]).unwrap();
        assert!(matches!(
            zero_sum_excursion_check(&mp, &Regularizer::NegEntropy, &pure, &traj),
            Err(Error::NonInteriorEquilibrium)
        ));
    }
}
