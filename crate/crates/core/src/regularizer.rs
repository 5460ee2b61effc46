//! Regularizers on the simplex and the choice (mirror) map they induce.
//!
//! All supported regularizers are separable, `h(x) = Σ_a θ(x_a)`, so the
//! Hessian is diagonal. The KKT solver runs an equality-constrained Newton
//! method on every candidate face using the inverse restricted Hessian, then
//! refines the face multiplier through the inverse of θ'.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::profile::SUPPORT_EPSILON;

/// Supports per player are enumerated exhaustively, so keep them small.
pub const MAX_KKT_ACTIONS: usize = 6;
/// Acceptance threshold on the KKT residual.
pub const KKT_RESIDUAL_TOL: f64 = 1e-9;
/// Condition number beyond which the restricted Hessian is rejected.
pub const HESSIAN_CONDITION_LIMIT: f64 = 1e12;

const NEWTON_MAX_ITERS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularizer {
    /// `Σ x log x`; induces the logit choice map.
    NegEntropy,
    /// `½‖x‖²`; induces Euclidean projection onto the simplex.
    SquaredEuclidean,
    /// `(Σ x^q − 1)/(q − 1)` with `0 < q < 1`.
    Tsallis { q: f64 },
}

impl Regularizer {
    pub fn tsallis(q: f64) -> Result<Self> {
        if q.is_finite() && q > 0.0 && q < 1.0 {
            Ok(Regularizer::Tsallis { q })
        } else {
            Err(Error::InvalidRegularizer(format!("tsallis:q={q}")))
        }
    }

    pub fn is_steep(&self) -> bool {
        !matches!(self, Regularizer::SquaredEuclidean)
    }

    fn theta(&self, x: f64) -> f64 {
        match *self {
            Regularizer::NegEntropy => {
                if x > 0.0 {
                    x * x.ln()
                } else {
                    0.0
                }
            }
            Regularizer::SquaredEuclidean => 0.5 * x * x,
            Regularizer::Tsallis { q } => x.max(0.0).powf(q) / (q - 1.0),
        }
    }

    /// θ'(x); `None` where a steep regularizer's derivative diverges.
    fn dtheta(&self, x: f64) -> Option<f64> {
        match *self {
            Regularizer::NegEntropy => (x > 0.0).then(|| 1.0 + x.ln()),
            Regularizer::SquaredEuclidean => Some(x),
            Regularizer::Tsallis { q } => (x > 0.0).then(|| q * x.powf(q - 1.0) / (q - 1.0)),
        }
    }

    /// Inverse of θ' where it exists.
    fn inv_dtheta(&self, s: f64) -> Option<f64> {
        match *self {
            Regularizer::NegEntropy => Some((s - 1.0).exp()),
            Regularizer::SquaredEuclidean => Some(s),
            Regularizer::Tsallis { q } => (s < 0.0).then(|| (s * (q - 1.0) / q).powf(1.0 / (q - 1.0))),
        }
    }

    fn d2theta(&self, x: f64) -> Option<f64> {
        match *self {
            Regularizer::NegEntropy => (x > 0.0).then(|| 1.0 / x),
            Regularizer::SquaredEuclidean => Some(1.0),
            Regularizer::Tsallis { q } => (x > 0.0).then(|| q * x.powf(q - 2.0)),
        }
    }

    /// h(x) on the closed simplex (0·log 0 = 0).
    pub fn value(&self, x: &[f64]) -> f64 {
        let s: f64 = x.iter().map(|&p| self.theta(p)).sum();
        match *self {
            Regularizer::Tsallis { q } => s - 1.0 / (q - 1.0),
            _ => s,
        }
    }

    /// ∇h(x). Steep regularizers reject boundary points.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        x.iter()
            .enumerate()
            .map(|(a, &p)| {
                self.dtheta(p)
                    .ok_or(Error::BoundaryGradient { action: a, value: p })
            })
            .collect()
    }

    /// Hessian of h restricted to the `support` coordinates.
    pub fn restricted_hessian(&self, x: &[f64], support: &[usize]) -> Result<DMatrix<f64>> {
        let diag = support
            .iter()
            .map(|&a| {
                self.d2theta(x[a])
                    .ok_or(Error::BoundaryGradient { action: a, value: x[a] })
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(DMatrix::from_diagonal(&DVector::from_vec(diag)))
    }

    /// Inverse of the restricted Hessian, `g^{ab}` in support order.
    pub fn inverse_restricted_hessian(&self, x: &[f64], support: &[usize]) -> Result<DMatrix<f64>> {
        let h = self.restricted_hessian(x, support)?;
        let d = h.diagonal();
        let (min, max) = d.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(condition <= HESSIAN_CONDITION_LIMIT) {
            return Err(Error::SingularHessian { condition });
        }
        Ok(DMatrix::from_diagonal(&d.map(|v| 1.0 / v)))
    }

    /// Q(y) = argmax_{x ∈ Δ} ⟨y, x⟩ − h(x).
    pub fn mirror_map(&self, y: &[f64]) -> Result<Vec<f64>> {
        if let Some(a) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile(format!("score {a} is not finite")));
        }
        let mut x = match self {
            Regularizer::NegEntropy => logit(y),
            Regularizer::SquaredEuclidean => simplex_projection(y).0,
            Regularizer::Tsallis { .. } => self.kkt_solve(y)?.x,
        };
        let sum: f64 = x.iter().sum();
        x.iter_mut().for_each(|p| *p /= sum);
        Ok(x)
    }

    /// Lagrange multipliers of the choice problem at `x = Q(y)`.
    ///
    /// `μ` is averaged over the support; `ν_b = g_b(x) + μ − y_b` off the
    /// support and zero on it.
    pub fn multipliers(&self, y: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
        let supported: Vec<usize> = (0..x.len()).filter(|&a| x[a] > SUPPORT_EPSILON).collect();
        let mu = supported
            .iter()
            .map(|&a| y[a] - self.dtheta(x[a]).unwrap_or(0.0))
            .sum::<f64>()
            / supported.len().max(1) as f64;
        let nu = (0..x.len())
            .map(|b| {
                if x[b] > SUPPORT_EPSILON {
                    0.0
                } else {
                    match self.dtheta(x[b]) {
                        Some(g) => g + mu - y[b],
                        None => f64::INFINITY,
                    }
                }
            })
            .collect();
        (mu, nu)
    }

    /// Solves the KKT system of the choice problem by enumerating faces.
    ///
    /// For steep regularizers only the full face is admissible, since the
    /// gradient is undefined on the boundary.
    pub fn kkt_solve(&self, y: &[f64]) -> Result<KktCertificate> {
        let m = y.len();
        if m == 0 || m > MAX_KKT_ACTIONS {
            return Err(Error::TooManyActions {
                actions: m,
                max: MAX_KKT_ACTIONS,
            });
        }
        if let Some(a) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile(format!("score {a} is not finite")));
        }
        let full_mask = (1u32 << m) - 1;
        let masks: Vec<u32> = if self.is_steep() {
            vec![full_mask]
        } else {
            (1..=full_mask).collect()
        };
        let mut best: Option<KktCertificate> = None;
        let mut best_support = Vec::new();
        for mask in masks {
            let support: Vec<usize> = (0..m).filter(|a| mask & (1 << a) != 0).collect();
            let Some(cert) = self.solve_face(y, &support) else {
                continue;
            };
            if best.as_ref().is_none_or(|b| cert.residual < b.residual) {
                best_support = support;
                best = Some(cert);
            }
        }
        match best {
            Some(cert) if cert.residual < KKT_RESIDUAL_TOL => Ok(cert),
            Some(cert) => Err(Error::NoConvergence {
                best_residual: cert.residual,
                best_support,
            }),
            None => Err(Error::NoConvergence {
                best_residual: f64::INFINITY,
                best_support,
            }),
        }
    }

    /// Feasible-start Newton on `min h(x) − ⟨y, x⟩` over the relative
    /// interior of the face, then the full KKT residual of the result.
    fn solve_face(&self, y: &[f64], support: &[usize]) -> Option<KktCertificate> {
        let m = y.len();
        let k = support.len();
        let mut x = vec![0.0; m];
        for &a in support {
            x[a] = 1.0 / k as f64;
        }
        let objective = |x: &[f64]| self.value(x) - x.iter().zip(y).map(|(p, v)| p * v).sum::<f64>();
        // Stationarity on the face: spread of the reduced gradient.
        let spread = |x: &[f64]| -> Option<f64> {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &a in support {
                let g = self.dtheta(x[a])? - y[a];
                lo = lo.min(g);
                hi = hi.max(g);
            }
            Some(hi - lo)
        };
        let mut f = objective(&x);
        let mut r = spread(&x)?;
        for _ in 0..NEWTON_MAX_ITERS {
            let grad: Vec<f64> = support
                .iter()
                .map(|&a| self.dtheta(x[a]).map(|g| g - y[a]))
                .collect::<Option<_>>()?;
            let scale = 1.0 + grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
            if r <= 1e-14 * scale {
                break;
            }
            let hinv = self.inverse_restricted_hessian(&x, support).ok()?;
            let g = DVector::from_vec(grad.clone());
            let ones = DVector::from_element(k, 1.0);
            let hg = &hinv * &g;
            let h1 = &hinv * &ones;
            let w = -hg.sum() / h1.sum();
            // dx = −H⁻¹(∇f + w·1), tangent to the face.
            let dx: Vec<f64> = (0..k).map(|r| -(hg[r] + w * h1[r])).collect();
            // Centered so rounding in Σdx does not mix in the common shift.
            let mean = grad.iter().sum::<f64>() / k as f64;
            let slope: f64 = dx.iter().zip(&grad).map(|(d, g)| d * (g - mean)).sum();
            if slope >= 0.0 {
                break;
            }
            let mut t = 1.0_f64;
            for (r, &a) in support.iter().enumerate() {
                if dx[r] < 0.0 {
                    t = t.min(0.99 * x[a] / -dx[r]);
                }
            }
            // Near the optimum the objective stops resolving progress, so a
            // step is also accepted when it shrinks the gradient spread.
            let mut accepted = false;
            let mut trial = x.clone();
            for _ in 0..60 {
                for (r, &a) in support.iter().enumerate() {
                    trial[a] = x[a] + t * dx[r];
                }
                let ft = objective(&trial);
                let rt = spread(&trial).unwrap_or(f64::INFINITY);
                if ft <= f + 1e-4 * t * slope || rt < (1.0 - 0.5 * t) * r {
                    accepted = true;
                    f = ft;
                    r = rt;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            std::mem::swap(&mut x, &mut trial);
        }
        let sum: f64 = support.iter().map(|&a| x[a]).sum();
        support.iter().for_each(|&a| x[a] /= sum);
        let newton = self.certificate(y, x);
        match self.polish_face(y, support, newton.mu) {
            Some(p) if p.residual < newton.residual => Some(p),
            _ => Some(newton),
        }
    }

    /// Newton on the scalar `μ` with `x_a = θ'⁻¹(y_a − μ)` on the support.
    /// Small coordinates are exact functions of `μ` here, which the
    /// face Newton iteration cannot resolve when `θ''` is large.
    fn polish_face(&self, y: &[f64], support: &[usize], mu0: f64) -> Option<KktCertificate> {
        let point = |mu: f64| -> Option<Vec<f64>> {
            let mut x = vec![0.0; y.len()];
            for &a in support {
                let v = self.inv_dtheta(y[a] - mu)?;
                if !(v > 0.0) {
                    return None;
                }
                x[a] = v;
            }
            Some(x)
        };
        let mut mu = mu0;
        let mut x = point(mu)?;
        for _ in 0..60 {
            let excess = x.iter().sum::<f64>() - 1.0;
            let slope: f64 = support.iter().map(|&a| self.d2theta(x[a]).map(|h| 1.0 / h)).sum::<Option<f64>>()?;
            let next = mu + excess / slope;
            if next == mu || !next.is_finite() {
                break;
            }
            mu = next;
            x = point(mu)?;
            if excess.abs() <= f64::EPSILON {
                break;
            }
        }
        let sum: f64 = x.iter().sum();
        x.iter_mut().for_each(|p| *p /= sum);
        Some(self.certificate(y, x))
    }

    fn certificate(&self, y: &[f64], x: Vec<f64>) -> KktCertificate {
        let on: Vec<usize> = (0..x.len()).filter(|&a| x[a] > 0.0).collect();
        let shifts: Vec<f64> = on
            .iter()
            .map(|&a| y[a] - self.dtheta(x[a]).unwrap_or(f64::NAN))
            .collect();
        let mu = shifts.iter().sum::<f64>() / shifts.len().max(1) as f64;
        let mut residual: f64 = shifts.iter().fold(0.0_f64, |r, s| r.max((s - mu).abs()));
        let nu: Vec<f64> = (0..x.len())
            .map(|b| {
                if x[b] > 0.0 {
                    0.0
                } else {
                    self.dtheta(0.0).map_or(f64::INFINITY, |g| g + mu - y[b])
                }
            })
            .collect();
        for (b, &n) in nu.iter().enumerate() {
            residual = residual.max((-n).max(0.0)).max((x[b] * n).abs());
            residual = residual.max((-x[b]).max(0.0));
        }
        residual = residual.max((x.iter().sum::<f64>() - 1.0).abs());
        if residual.is_nan() {
            residual = f64::INFINITY;
        }
        KktCertificate { x, mu, nu, residual }
    }

    /// Gradient norms at distance 10⁻ᵏ (k = 2..8) from a face of the
    /// two-action simplex.
    pub fn steepness_probe(&self) -> SteepnessReport {
        let norms: Vec<(u32, f64)> = (2..=8)
            .map(|k| {
                let d = 10f64.powi(-(k as i32));
                let g = self.gradient(&[d, 1.0 - d]).expect("interior point");
                (k, g.iter().map(|v| v * v).sum::<f64>().sqrt())
            })
            .collect();
        let increasing = norms.windows(2).all(|w| w[1].1 > w[0].1);
        let first = norms.first().map_or(0.0, |n| n.1);
        let last = norms.last().map_or(0.0, |n| n.1);
        let diverging = increasing && last >= 2.0 * first;
        SteepnessReport {
            regularizer: *self,
            declared_steep: self.is_steep(),
            gradient_norms: norms,
            observed_divergence: diverging,
            consistent: diverging == self.is_steep(),
        }
    }
}

/// Logit choice with max-subtraction.
pub fn logit(y: &[f64]) -> Vec<f64> {
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut x: Vec<f64> = y.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|p| *p /= s);
    x
}

/// Euclidean projection onto the simplex (sort-based); returns `(x, τ)` with
/// `x = max(y − τ, 0)`.
pub fn simplex_projection(y: &[f64]) -> (Vec<f64>, f64) {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    (y.iter().map(|v| (v - tau).max(0.0)).collect(), tau)
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularizer::NegEntropy => write!(f, "negentropy"),
            Regularizer::SquaredEuclidean => write!(f, "euclidean"),
            Regularizer::Tsallis { q } => write!(f, "tsallis:q={q}"),
        }
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "negentropy" => Ok(Regularizer::NegEntropy),
            "euclidean" => Ok(Regularizer::SquaredEuclidean),
            other => {
                let q = other
                    .strip_prefix("tsallis:q=")
                    .and_then(|q| q.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidRegularizer(other.to_string()))?;
                Regularizer::tsallis(q).map_err(|_| Error::InvalidRegularizer(other.to_string()))
            }
        }
    }
}

impl Serialize for Regularizer {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Regularizer {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Solution of the choice problem with its multipliers:
/// `y_a = g_a(x) + μ − ν_a`, `ν ≥ 0`, `x_a ν_a = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KktCertificate {
    pub x: Vec<f64>,
    pub mu: f64,
    pub nu: Vec<f64>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SteepnessReport {
    pub regularizer: Regularizer,
    pub declared_steep: bool,
    /// `(k, ‖∇h‖)` at distance 10⁻ᵏ from the boundary.
    pub gradient_norms: Vec<(u32, f64)>,
    pub observed_divergence: bool,
    pub consistent: bool,
}
