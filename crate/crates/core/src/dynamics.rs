//! FTRL dynamics in score space, in reduced (score-difference) space and,
//! for steep regularizers, directly on mixed strategies.
//!
//! The score flow `ẏ = v(Q(y))` is the canonical system: it is globally
//! well-posed for every regularizer. Mixed-strategy trajectories are its
//! image under the choice map.

use std::ops::ControlFlow;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::FiniteGame;
use crate::ode::{self, IntegratorStats, Method, OdeSystem};
use crate::profile::{
    offsets_of, renormalize, Blocks, MixedProfile, ReducedScore, ScoreProfile, SupportSet, SUPPORT_EPSILON,
};
use crate::regularizer::Regularizer;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    #[serde(flatten)]
    pub method: Method,
    pub horizon: f64,
    pub sample_interval: f64,
    pub event_tolerance: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk45Adaptive { rtol: 1e-9, atol: 1e-12 },
            horizon: 10.0,
            sample_interval: 0.1,
            event_tolerance: 1e-8,
        }
    }
}

impl IntegratorConfig {
    pub fn adaptive(rtol: f64, atol: f64, horizon: f64, sample_interval: f64) -> Self {
        Self {
            method: Method::Rk45Adaptive { rtol, atol },
            horizon,
            sample_interval,
            ..Self::default()
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.sample_interval > 0.0) || !(self.event_tolerance > 0.0) {
            return Err(Error::InvalidConfig(
                "sample interval and event tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Q applied per player, on flat storage.
pub(crate) fn choice_into(reg: &Regularizer, offsets: &[usize], y: &[f64], x: &mut [f64]) -> Result<()> {
    for w in offsets.windows(2) {
        let q = reg.mirror_map(&y[w[0]..w[1]])?;
        x[w[0]..w[1]].copy_from_slice(&q);
    }
    Ok(())
}

pub fn choice_profile(reg: &Regularizer, y: &ScoreProfile) -> Result<MixedProfile> {
    let mut x = Blocks::zeros(&y.blocks().counts());
    choice_into(reg, y.blocks().offsets(), y.as_slice(), x.as_mut_slice())?;
    MixedProfile::normalized(x)
}

/// A score profile whose choice is `x`: `y = ∇h(x)`, which is valid for any
/// `x` under a non-steep regularizer and for interior `x` otherwise.
pub fn lift_profile(reg: &Regularizer, x: &MixedProfile) -> Result<ScoreProfile> {
    let blocks: Vec<Vec<f64>> = (0..x.num_players())
        .map(|i| reg.gradient(x.strategy(i)))
        .collect::<Result<_>>()?;
    ScoreProfile::new(blocks)
}

/// Score velocity `v(Q(y))`.
pub fn ftrl_vector_field(game: &FiniteGame, reg: &Regularizer, y: &ScoreProfile) -> Result<Blocks> {
    game.check_dims(y.blocks())?;
    let sys = ScoreSystem::new(game, *reg);
    let mut out = Blocks::zeros(game.action_counts());
    sys.rhs(y.as_slice(), out.as_mut_slice())?;
    Ok(out)
}

/// Score differences against the benchmark action, benchmark entry dropped.
pub fn reduce_scores(y: &ScoreProfile, benchmarks: &[usize]) -> Result<ReducedScore> {
    if benchmarks.len() != y.num_players() {
        return Err(Error::DimensionMismatch {
            what: "benchmarks",
            expected: y.num_players(),
            found: benchmarks.len(),
        });
    }
    let blocks: Vec<Vec<f64>> = (0..y.num_players())
        .map(|i| {
            let yi = y.scores(i);
            let b = benchmarks[i];
            if b >= yi.len() {
                return Err(Error::InvalidProfile(format!("benchmark {b} out of range for player {i}")));
            }
            Ok(yi.iter().enumerate().filter(|(a, _)| *a != b).map(|(_, v)| v - yi[b]).collect())
        })
        .collect::<Result<_>>()?;
    ReducedScore::new(Blocks::from(blocks), benchmarks.to_vec())
}

/// The canonical lift: benchmark score 0.
pub fn lift_reduced(z: &ReducedScore) -> ScoreProfile {
    let counts = z.action_counts();
    let mut y = Blocks::zeros(&counts);
    lift_into(z.values().offsets(), z.benchmarks(), &offsets_of(&counts), z.as_slice(), y.as_mut_slice());
    ScoreProfile::from_blocks(y).expect("finite by construction")
}

fn lift_into(z_offsets: &[usize], benchmarks: &[usize], y_offsets: &[usize], z: &[f64], y: &mut [f64]) {
    for (i, &b) in benchmarks.iter().enumerate() {
        let zi = &z[z_offsets[i]..z_offsets[i + 1]];
        let yi = &mut y[y_offsets[i]..y_offsets[i + 1]];
        let mut src = zi.iter();
        for (a, slot) in yi.iter_mut().enumerate() {
            *slot = if a == b { 0.0 } else { *src.next().unwrap() };
        }
    }
}

/// Q̂(z) = Q(y) for any lift `y` of `z`.
pub fn reduced_mirror_map(reg: &Regularizer, z: &ReducedScore) -> Result<MixedProfile> {
    choice_profile(reg, &lift_reduced(z))
}

/// ż_{i,a} = v_{i,a}(x) − v_{i,b_i}(x) with x = Q̂(z).
pub fn reduced_vector_field(game: &FiniteGame, reg: &Regularizer, z: &ReducedScore) -> Result<ReducedScore> {
    if z.action_counts() != game.action_counts() {
        return Err(Error::DimensionMismatch {
            what: "reduced score",
            expected: game.total_actions() - game.num_players(),
            found: z.dim(),
        });
    }
    let sys = ReducedSystem::new(game, *reg, z.benchmarks().to_vec())?;
    let mut out = vec![0.0; z.dim()];
    sys.rhs(z.as_slice(), &mut out)?;
    ReducedScore::new(Blocks::from_flat(out, &z.values().counts())?, z.benchmarks().to_vec())
}

/// Mixed-strategy dynamics on the face `support`:
/// `ẋ_a = Σ_b (g^{ab} − g^a g^b / G) v_b` with `g^a = Σ_b g^{ab}`, `G = Σ_a g^a`.
pub fn mixed_strategy_field(
    game: &FiniteGame,
    reg: &Regularizer,
    x: &MixedProfile,
    support: &SupportSet,
) -> Result<Blocks> {
    game.check_dims(x.blocks())?;
    if &x.support() != support {
        return Err(Error::InvalidSupport(format!(
            "profile support {:?} differs from requested face {:?}",
            x.support().as_vecs(),
            support.as_vecs()
        )));
    }
    let v = game.payoff_field(x)?;
    let mut out = Blocks::zeros(game.action_counts());
    for i in 0..game.num_players() {
        face_velocity(reg, x.strategy(i), v.block(i), support.player(i), out.block_mut(i))?;
    }
    Ok(out)
}

fn face_velocity(reg: &Regularizer, x: &[f64], v: &[f64], face: &[usize], out: &mut [f64]) -> Result<()> {
    let hinv = reg.inverse_restricted_hessian(x, face)?;
    let k = face.len();
    let row_sums: Vec<f64> = (0..k).map(|a| hinv.row(a).sum()).collect();
    let total: f64 = row_sums.iter().sum();
    out.fill(0.0);
    for (ra, &a) in face.iter().enumerate() {
        out[a] = face
            .iter()
            .enumerate()
            .map(|(rb, &b)| (hinv[(ra, rb)] - row_sums[ra] * row_sums[rb] / total) * v[b])
            .sum();
    }
    Ok(())
}

/// ẋ_a = x_a (v_a(x) − u(x)).
pub fn replicator_field(game: &FiniteGame, x: &MixedProfile) -> Result<Blocks> {
    let mut v = game.payoff_field(x)?;
    for i in 0..game.num_players() {
        let xi = x.strategy(i);
        let u: f64 = xi.iter().zip(v.block(i)).map(|(p, q)| p * q).sum();
        for (vel, &p) in v.block_mut(i).iter_mut().zip(xi) {
            *vel = p * (*vel - u);
        }
    }
    Ok(v)
}

/// ẋ_a = v_a − mean of v over supp(x), zero off the support.
pub fn projection_field(game: &FiniteGame, x: &MixedProfile) -> Result<Blocks> {
    let mut v = game.payoff_field(x)?;
    let support = x.support();
    for i in 0..game.num_players() {
        let face = support.player(i);
        let vi = v.block_mut(i);
        let mean = face.iter().map(|&a| vi[a]).sum::<f64>() / face.len() as f64;
        for (a, vel) in vi.iter_mut().enumerate() {
            *vel = if support.contains(i, a) { *vel - mean } else { 0.0 };
        }
    }
    Ok(v)
}

/// `ẏ = v(Q(y))` on flat score vectors.
pub struct ScoreSystem<'a> {
    game: &'a FiniteGame,
    reg: Regularizer,
}

impl<'a> ScoreSystem<'a> {
    pub fn new(game: &'a FiniteGame, reg: Regularizer) -> Self {
        Self { game, reg }
    }

    pub fn choice(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; y.len()];
        choice_into(&self.reg, self.game.offsets(), y, &mut x)?;
        Ok(x)
    }
}

impl OdeSystem for ScoreSystem<'_> {
    fn dim(&self) -> usize {
        self.game.total_actions()
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let x = self.choice(y)?;
        self.game.payoff_field_into(&x, dy);
        Ok(())
    }
}

/// Reduced dynamics on flat score-difference vectors.
pub struct ReducedSystem<'a> {
    game: &'a FiniteGame,
    reg: Regularizer,
    benchmarks: Vec<usize>,
    z_offsets: Vec<usize>,
}

impl<'a> ReducedSystem<'a> {
    pub fn new(game: &'a FiniteGame, reg: Regularizer, benchmarks: Vec<usize>) -> Result<Self> {
        if benchmarks.len() != game.num_players() {
            return Err(Error::DimensionMismatch {
                what: "benchmarks",
                expected: game.num_players(),
                found: benchmarks.len(),
            });
        }
        if let Some(i) = (0..benchmarks.len()).find(|&i| benchmarks[i] >= game.action_counts()[i]) {
            return Err(Error::InvalidProfile(format!("benchmark out of range for player {i}")));
        }
        let dims: Vec<usize> = game.action_counts().iter().map(|m| m - 1).collect();
        Ok(Self {
            game,
            reg,
            benchmarks,
            z_offsets: offsets_of(&dims),
        })
    }

    pub fn lift(&self, z: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.game.total_actions()];
        lift_into(&self.z_offsets, &self.benchmarks, self.game.offsets(), z, &mut y);
        y
    }

    pub fn choice(&self, z: &[f64]) -> Result<Vec<f64>> {
        let y = self.lift(z);
        let mut x = vec![0.0; y.len()];
        choice_into(&self.reg, self.game.offsets(), &y, &mut x)?;
        Ok(x)
    }
}

impl OdeSystem for ReducedSystem<'_> {
    fn dim(&self) -> usize {
        self.game.total_actions() - self.game.num_players()
    }

    fn rhs(&self, z: &[f64], dz: &mut [f64]) -> Result<()> {
        let x = self.choice(z)?;
        let mut v = vec![0.0; x.len()];
        self.game.payoff_field_into(&x, &mut v);
        let offs = self.game.offsets();
        for (i, &b) in self.benchmarks.iter().enumerate() {
            let vi = &v[offs[i]..offs[i + 1]];
            let mut k = self.z_offsets[i];
            for (a, &va) in vi.iter().enumerate() {
                if a != b {
                    dz[k] = va - vi[b];
                    k += 1;
                }
            }
        }
        Ok(())
    }
}

/// Mixed-strategy dynamics on a fixed face, re-normalized after each step.
pub struct PrimalSystem<'a> {
    game: &'a FiniteGame,
    reg: Regularizer,
    support: SupportSet,
}

impl<'a> PrimalSystem<'a> {
    pub fn new(game: &'a FiniteGame, reg: Regularizer, support: SupportSet) -> Self {
        Self { game, reg, support }
    }
}

impl OdeSystem for PrimalSystem<'_> {
    fn dim(&self) -> usize {
        self.game.total_actions()
    }

    fn rhs(&self, x: &[f64], dx: &mut [f64]) -> Result<()> {
        let mut v = vec![0.0; x.len()];
        self.game.payoff_field_into(x, &mut v);
        let offs = self.game.offsets();
        for i in 0..self.game.num_players() {
            let r = offs[i]..offs[i + 1];
            face_velocity(&self.reg, &x[r.clone()], &v[r.clone()], self.support.player(i), &mut dx[r])?;
        }
        Ok(())
    }

    fn after_step(&self, x: &mut [f64]) -> f64 {
        let offs = self.game.offsets();
        (0..self.game.num_players())
            .map(|i| renormalize(&mut x[offs[i]..offs[i + 1]]))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpace {
    Score,
    Reduced,
    Primal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SupportExit,
    SupportEnter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportEvent {
    pub time: f64,
    pub player: usize,
    pub action: usize,
    pub kind: EventKind,
    /// Time bracket `[before, after]` around the change.
    pub bracket: [f64; 2],
    /// Membership toggled more than once inside the sample interval.
    pub ambiguous: bool,
}

/// Sampled flow. `states` hold coordinates of `space`; `mixed` holds the
/// mixed-strategy image of each sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub space: StateSpace,
    pub action_counts: Vec<usize>,
    pub benchmarks: Option<Vec<usize>>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub mixed: Vec<Vec<f64>>,
    pub events: Vec<SupportEvent>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    fn empty(space: StateSpace, counts: &[usize], benchmarks: Option<Vec<usize>>) -> Self {
        Self {
            space,
            action_counts: counts.to_vec(),
            benchmarks,
            times: Vec::new(),
            states: Vec::new(),
            mixed: Vec::new(),
            events: Vec::new(),
            stats: IntegratorStats::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn mixed_profile(&self, k: usize) -> Result<MixedProfile> {
        MixedProfile::normalized(Blocks::from_flat(self.mixed[k].clone(), &self.action_counts)?)
    }

    pub fn final_mixed(&self) -> Result<MixedProfile> {
        self.mixed_profile(self.len() - 1)
    }

    pub fn score_profile(&self, k: usize) -> Result<ScoreProfile> {
        if self.space != StateSpace::Score {
            return Err(Error::InvalidConfig("trajectory is not in score space".into()));
        }
        ScoreProfile::from_blocks(Blocks::from_flat(self.states[k].clone(), &self.action_counts)?)
    }
}

/// Streams `(t, y, Q(y))` on the sample grid of `config`.
pub fn flow_scores<F>(
    game: &FiniteGame,
    reg: &Regularizer,
    y0: &ScoreProfile,
    config: &IntegratorConfig,
    mut observer: F,
) -> Result<IntegratorStats>
where
    F: FnMut(f64, &[f64], &[f64]) -> ControlFlow<()>,
{
    config.validate()?;
    game.check_dims(y0.blocks())?;
    let sys = ScoreSystem::new(game, *reg);
    let mut failure = None;
    let stats = ode::integrate(&sys, &config.method, y0.as_slice(), config.horizon, config.sample_interval, |t, y| {
        match sys.choice(y) {
            Ok(x) => observer(t, y, &x),
            Err(e) => {
                failure = Some(e);
                ControlFlow::Break(())
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(stats),
    }
}

pub fn integrate_scores(
    game: &FiniteGame,
    reg: &Regularizer,
    y0: &ScoreProfile,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut traj = Trajectory::empty(StateSpace::Score, game.action_counts(), None);
    traj.stats = flow_scores(game, reg, y0, config, |t, y, x| {
        traj.times.push(t);
        traj.states.push(y.to_vec());
        traj.mixed.push(x.to_vec());
        ControlFlow::Continue(())
    })?;
    Ok(traj)
}

pub fn integrate_reduced(
    game: &FiniteGame,
    reg: &Regularizer,
    z0: &ReducedScore,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    config.validate()?;
    let sys = ReducedSystem::new(game, *reg, z0.benchmarks().to_vec())?;
    if z0.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            what: "reduced initial state",
            expected: sys.dim(),
            found: z0.dim(),
        });
    }
    let mut traj = Trajectory::empty(StateSpace::Reduced, game.action_counts(), Some(z0.benchmarks().to_vec()));
    let mut failure = None;
    traj.stats = ode::integrate(&sys, &config.method, z0.as_slice(), config.horizon, config.sample_interval, |t, z| {
        match sys.choice(z) {
            Ok(x) => {
                traj.times.push(t);
                traj.states.push(z.to_vec());
                traj.mixed.push(x);
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
        None => Ok(traj),
    }
}

/// Integrates the mixed-strategy dynamics of a steep regularizer on the face
/// of `supp(x0)`. `stats.max_projection` records the largest sum drift
/// removed by per-step re-normalization.
pub fn integrate_strategies_steep(
    game: &FiniteGame,
    reg: &Regularizer,
    x0: &MixedProfile,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    if !reg.is_steep() {
        return Err(Error::NonSteepRegularizer);
    }
    config.validate()?;
    game.check_dims(x0.blocks())?;
    let support = x0.support();
    // Start exactly on the face.
    let mut start = x0.as_slice().to_vec();
    for i in 0..game.num_players() {
        let r = game.offsets()[i]..game.offsets()[i + 1];
        for (a, p) in start[r.clone()].iter_mut().enumerate() {
            if !support.contains(i, a) {
                *p = 0.0;
            }
        }
        renormalize(&mut start[r]);
    }
    let sys = PrimalSystem::new(game, *reg, support);
    let mut traj = Trajectory::empty(StateSpace::Primal, game.action_counts(), None);
    traj.stats = ode::integrate(&sys, &config.method, &start, config.horizon, config.sample_interval, |t, x| {
        traj.times.push(t);
        traj.states.push(x.to_vec());
        traj.mixed.push(x.to_vec());
        ControlFlow::Continue(())
    })?;
    Ok(traj)
}

/// Locates support changes of `Q(y(t))` along a score-space trajectory.
///
/// Each change between consecutive samples is bracketed by bisection on the
/// coordinate sign (exits) or the KKT multiplier sign (entries), re-integrating
/// from the earlier sample, down to `config.event_tolerance`.
pub fn detect_support_events(
    game: &FiniteGame,
    reg: &Regularizer,
    traj: &Trajectory,
    config: &IntegratorConfig,
) -> Result<Vec<SupportEvent>> {
    if traj.space != StateSpace::Score {
        return Err(Error::InvalidConfig("support events need a score-space trajectory".into()));
    }
    let sys = ScoreSystem::new(game, *reg);
    let offs = game.offsets();
    let mut events = Vec::new();
    for k in 0..traj.len().saturating_sub(1) {
        let (x0, x1) = (&traj.mixed[k], &traj.mixed[k + 1]);
        for i in 0..game.num_players() {
            for a in 0..game.action_counts()[i] {
                let idx = offs[i] + a;
                let before = x0[idx] > SUPPORT_EPSILON;
                let after = x1[idx] > SUPPORT_EPSILON;
                if before == after {
                    continue;
                }
                let kind = if before { EventKind::SupportExit } else { EventKind::SupportEnter };
                let y_start = &traj.states[k];
                let span = traj.times[k + 1] - traj.times[k];
                // True while the action is still in its pre-event state.
                let unchanged = |s: f64| -> Result<bool> {
                    let y = ode::advance(&sys, &config.method, y_start, s)?;
                    let x = sys.choice(&y)?;
                    Ok(match kind {
                        EventKind::SupportExit => x[idx] > SUPPORT_EPSILON,
                        EventKind::SupportEnter => {
                            let r = offs[i]..offs[i + 1];
                            let (_, nu) = reg.multipliers(&y[r.clone()], &x[r]);
                            nu[a] > SUPPORT_EPSILON
                        }
                    })
                };
                let mut toggles = 0;
                let mut prev = true;
                for j in 1..8 {
                    let now = unchanged(span * j as f64 / 8.0)?;
                    if now != prev {
                        toggles += 1;
                    }
                    prev = now;
                }
                if prev {
                    toggles += 1;
                }
                let (mut lo, mut hi) = (0.0, span);
                while hi - lo > config.event_tolerance {
                    let mid = 0.5 * (lo + hi);
                    if unchanged(mid)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let t0 = traj.times[k];
                events.push(SupportEvent {
                    time: t0 + 0.5 * (lo + hi),
                    player: i,
                    action: a,
                    kind,
                    bracket: [t0 + lo, t0 + hi],
                    ambiguous: toggles > 1,
                });
            }
        }
    }
    events.sort_by(|p, q| p.time.total_cmp(&q.time));
    Ok(events)
}

/// Variational system `(z, M)` with `Ṁ = J(z) M`, `J` by central differences.
pub struct VariationalSystem<'a> {
    reduced: ReducedSystem<'a>,
    d: usize,
}

impl<'a> VariationalSystem<'a> {
    pub fn new(reduced: ReducedSystem<'a>) -> Self {
        let d = reduced.dim();
        Self { reduced, d }
    }

    /// Jacobian of the reduced field, step `1e-5 (1 + |z_k|)` per column.
    pub fn jacobian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.d;
        let mut jac = DMatrix::zeros(d, d);
        let mut zp = z.to_vec();
        let (mut fp, mut fm) = (vec![0.0; d], vec![0.0; d]);
        for k in 0..d {
            let h = 1e-5 * (1.0 + z[k].abs());
            zp[k] = z[k] + h;
            self.reduced.rhs(&zp, &mut fp)?;
            zp[k] = z[k] - h;
            self.reduced.rhs(&zp, &mut fm)?;
            zp[k] = z[k];
            for r in 0..d {
                jac[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        Ok(jac)
    }
}

impl OdeSystem for VariationalSystem<'_> {
    fn dim(&self) -> usize {
        self.d + self.d * self.d
    }

    fn rhs(&self, s: &[f64], ds: &mut [f64]) -> Result<()> {
        let d = self.d;
        let (z, m) = s.split_at(d);
        let (dz, dm) = ds.split_at_mut(d);
        self.reduced.rhs(z, dz)?;
        let jac = self.jacobian(z)?;
        let m = DMatrix::from_column_slice(d, d, m);
        let prod = jac * m;
        dm.copy_from_slice(prod.as_slice());
        Ok(())
    }
}

/// `M(t) = ∂Φ_t(z0)/∂z0` on the sample grid up to `horizon`.
pub fn flow_jacobian_series(
    game: &FiniteGame,
    reg: &Regularizer,
    z0: &ReducedScore,
    horizon: f64,
    config: &IntegratorConfig,
) -> Result<Vec<(f64, DMatrix<f64>)>> {
    config.method.validate()?;
    let reduced = ReducedSystem::new(game, *reg, z0.benchmarks().to_vec())?;
    if z0.dim() != reduced.dim() {
        return Err(Error::DimensionMismatch {
            what: "reduced initial state",
            expected: reduced.dim(),
            found: z0.dim(),
        });
    }
    let d = reduced.dim();
    let sys = VariationalSystem::new(reduced);
    let mut s0 = z0.as_slice().to_vec();
    s0.extend(DMatrix::<f64>::identity(d, d).as_slice());
    if horizon == 0.0 {
        return Ok(vec![(0.0, DMatrix::identity(d, d))]);
    }
    let mut out = Vec::new();
    ode::integrate(&sys, &config.method, &s0, horizon, config.sample_interval, |t, s| {
        out.push((t, DMatrix::from_column_slice(d, d, &s[d..])));
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// `∂Φ_T(z0)/∂z0`; its determinant is the local volume ratio.
pub fn flow_jacobian(
    game: &FiniteGame,
    reg: &Regularizer,
    z0: &ReducedScore,
    horizon: f64,
    config: &IntegratorConfig,
) -> Result<DMatrix<f64>> {
    let series = flow_jacobian_series(game, reg, z0, horizon, &IntegratorConfig {
        sample_interval: horizon.max(f64::MIN_POSITIVE),
        ..*config
    })?;
    Ok(series.into_iter().last().expect("at least one sample").1)
}
