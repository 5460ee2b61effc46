//! Explicit Runge–Kutta integrators for autonomous systems.
//!
//! Two schemes: classical fixed-step RK4, and the Dormand–Prince 5(4) pair
//! with embedded error control and fourth-order dense output. Both report
//! samples on a uniform time grid through an observer callback, so long
//! runs never need to hold the whole trajectory.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Hook applied to every accepted state, e.g. re-projection onto a
    /// constraint manifold. Returns the size of the correction.
    fn after_step(&self, _y: &mut [f64]) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed { step: f64 },
    Rk45Adaptive { rtol: f64, atol: f64 },
}

impl Method {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Method::Rk4Fixed { step } => step.is_finite() && step > 0.0,
            Method::Rk45Adaptive { rtol, atol } => rtol > 0.0 && atol > 0.0 && rtol.is_finite() && atol.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid integrator settings {self:?}")))
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    /// Largest accepted normalized error estimate (adaptive only).
    pub max_error_estimate: f64,
    /// Largest correction applied by [`OdeSystem::after_step`].
    pub max_projection: f64,
}

/// Sample times `0, Δ, 2Δ, …` up to `t_end`, always ending at `t_end`.
pub fn sample_grid(t_end: f64, interval: f64) -> Vec<f64> {
    let n = (t_end / interval + 1e-9).floor() as usize;
    let mut ts: Vec<f64> = (0..=n).map(|k| k as f64 * interval).collect();
    if t_end - ts[n] > 1e-9 * interval.max(1.0) {
        ts.push(t_end);
    } else {
        ts[n] = t_end;
    }
    ts
}

/// Integrates from `t = 0` to `t_end`, calling `observer(t, y)` on the
/// sample grid. The observer may stop the run early.
pub fn integrate<S, F>(
    sys: &S,
    method: &Method,
    y0: &[f64],
    t_end: f64,
    sample_interval: f64,
    mut observer: F,
) -> Result<IntegratorStats>
where
    S: OdeSystem + ?Sized,
    F: FnMut(f64, &[f64]) -> ControlFlow<()>,
{
    method.validate()?;
    if !(t_end >= 0.0 && t_end.is_finite()) || !(sample_interval > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "horizon {t_end} and sample interval {sample_interval} must be positive"
        )));
    }
    if y0.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: sys.dim(),
            found: y0.len(),
        });
    }
    let grid = sample_grid(t_end, sample_interval);
    match *method {
        Method::Rk4Fixed { step } => rk4(sys, step, y0, &grid, &mut observer),
        Method::Rk45Adaptive { rtol, atol } => dopri5(sys, rtol, atol, y0, &grid, &mut observer),
    }
}

/// State at `t_end` only.
pub fn advance<S: OdeSystem + ?Sized>(sys: &S, method: &Method, y0: &[f64], t_end: f64) -> Result<Vec<f64>> {
    let mut last = y0.to_vec();
    if t_end == 0.0 {
        return Ok(last);
    }
    integrate(sys, method, y0, t_end, t_end, |_, y| {
        last.copy_from_slice(y);
        ControlFlow::Continue(())
    })?;
    Ok(last)
}

fn rk4<S, F>(sys: &S, step: f64, y0: &[f64], grid: &[f64], observer: &mut F) -> Result<IntegratorStats>
where
    S: OdeSystem + ?Sized,
    F: FnMut(f64, &[f64]) -> ControlFlow<()>,
{
    let n = y0.len();
    let mut stats = IntegratorStats::default();
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    if observer(grid[0], &y).is_break() {
        return Ok(stats);
    }
    for w in grid.windows(2) {
        let span = w[1] - w[0];
        let substeps = ((span / step) - 1e-9).ceil().max(1.0) as usize;
        let h = span / substeps as f64;
        for _ in 0..substeps {
            sys.rhs(&y, &mut k1)?;
            axpy(&mut tmp, &y, 0.5 * h, &k1);
            sys.rhs(&tmp, &mut k2)?;
            axpy(&mut tmp, &y, 0.5 * h, &k2);
            sys.rhs(&tmp, &mut k3)?;
            axpy(&mut tmp, &y, h, &k3);
            sys.rhs(&tmp, &mut k4)?;
            for i in 0..n {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            stats.rhs_evaluations += 4;
            stats.accepted_steps += 1;
            stats.max_projection = stats.max_projection.max(sys.after_step(&mut y));
        }
        if observer(w[1], &y).is_break() {
            break;
        }
    }
    Ok(stats)
}

fn axpy(out: &mut [f64], y: &[f64], h: f64, k: &[f64]) {
    for ((o, a), b) in out.iter_mut().zip(y).zip(k) {
        *o = a + h * b;
    }
}

// Dormand–Prince 5(4) tableau; the nodes are not needed for autonomous systems.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Dense-output polynomial coefficients: y(t + θh) = y + h Σ_k K_k Σ_j P[k][j] θ^{j+1}.
const P: [[f64; 4]; 7] = [
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
];

fn dopri5<S, F>(
    sys: &S,
    rtol: f64,
    atol: f64,
    y0: &[f64],
    grid: &[f64],
    observer: &mut F,
) -> Result<IntegratorStats>
where
    S: OdeSystem + ?Sized,
    F: FnMut(f64, &[f64]) -> ControlFlow<()>,
{
    let n = y0.len();
    let t_end = *grid.last().unwrap();
    let mut stats = IntegratorStats::default();
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut dense = vec![0.0; n];

    let mut next_sample = 0;
    if observer(grid[0], &y).is_break() {
        return Ok(stats);
    }
    next_sample += 1;
    if next_sample >= grid.len() {
        return Ok(stats);
    }

    sys.rhs(&y, &mut k[0])?;
    stats.rhs_evaluations += 1;

    // Initial step from the scale of y and y'.
    let d0 = rms_scaled(&y, &y, atol, rtol);
    let d1 = rms_scaled(&k[0], &y, atol, rtol);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(t_end).max(1e-12);

    let mut t = 0.0;
    while t < t_end {
        let h_min = 1e-14 * (1.0 + t.abs());
        if h < h_min {
            return Err(Error::StepFailure { t, step: h });
        }
        let last = t + h >= t_end * (1.0 - 1e-15);
        if last {
            h = t_end - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                tmp[i] = y[i] + h * acc;
            }
            if s == 6 {
                y_new.copy_from_slice(&tmp);
            }
            sys.rhs(&tmp, &mut k[s])?;
        }
        stats.rhs_evaluations += 6;

        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (s, ks) in k.iter().enumerate() {
                e += E[s] * ks[i];
            }
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            err += (h * e / sc).powi(2);
        }
        let err = (err / n.max(1) as f64).sqrt();

        if err <= 1.0 {
            stats.accepted_steps += 1;
            stats.max_error_estimate = stats.max_error_estimate.max(err);
            let t_new = if last { t_end } else { t + h };
            let correction = sys.after_step(&mut y_new);
            stats.max_projection = stats.max_projection.max(correction);
            while next_sample < grid.len() && grid[next_sample] <= t_new + 1e-12 * t_end.max(1.0) {
                let ts = grid[next_sample];
                if ts >= t_new {
                    dense.copy_from_slice(&y_new);
                } else {
                    let theta = (ts - t) / h;
                    interpolate(&y, &k, h, theta, &mut dense);
                }
                if observer(ts, &dense).is_break() {
                    return Ok(stats);
                }
                next_sample += 1;
            }
            std::mem::swap(&mut y, &mut y_new);
            if correction > 0.0 {
                sys.rhs(&y, &mut k[0])?;
                stats.rhs_evaluations += 1;
            } else {
                k.swap(0, 6);
            }
            t = t_new;
            if last {
                break;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            stats.rejected_steps += 1;
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= factor;
        }
    }
    Ok(stats)
}

fn interpolate(y: &[f64], k: &[Vec<f64>], h: f64, theta: f64, out: &mut [f64]) {
    let powers = [theta, theta * theta, theta.powi(3), theta.powi(4)];
    let weights: Vec<f64> = P
        .iter()
        .map(|row| row.iter().zip(&powers).map(|(p, t)| p * t).sum())
        .collect();
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (s, w) in weights.iter().enumerate() {
            acc += w * k[s][i];
        }
        out[i] = y[i] + h * acc;
    }
}

fn rms_scaled(v: &[f64], y: &[f64], atol: f64, rtol: f64) -> f64 {
    let n = v.len().max(1) as f64;
    (v.iter()
        .zip(y)
        .map(|(a, b)| (a / (atol + rtol * b.abs())).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
}
