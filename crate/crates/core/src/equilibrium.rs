//! Nash equilibria: the variational (polar cone) test, classification and a
//! support-enumeration solver for desk-scale games.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::FiniteGame;
use crate::profile::{Blocks, MixedProfile, SupportSet};

/// Minimum quasi-strict margin for a game to count as generic.
pub const GENERICITY_GAP: f64 = 1e-6;
/// L∞ radius within which two equilibria are the same.
pub const DEDUP_DISTANCE: f64 = 1e-6;
/// Condition number above which an indifference system is treated as singular.
const SINGULAR_CONDITION: f64 = 1e12;

const MAX_ENUM_PLAYERS: usize = 3;
const MAX_ENUM_ACTIONS: usize = 4;

/// Membership of `v` in the polar cone of the face spanned by `supp(x)`:
/// every supported component is at least every component, up to `tol`.
pub fn polar_cone_member(v: &Blocks, x: &MixedProfile, tol: f64) -> Result<bool> {
    if !v.same_layout(x.blocks()) {
        return Err(Error::DimensionMismatch {
            what: "score vector vs profile",
            expected: x.blocks().len(),
            found: v.len(),
        });
    }
    let support = x.support();
    Ok((0..x.num_players()).all(|i| {
        let vi = v.block(i);
        let best = vi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        support.player(i).iter().all(|&a| vi[a] >= best - tol)
    }))
}

pub fn is_nash(game: &FiniteGame, x: &MixedProfile, tol: f64) -> Result<bool> {
    let v = game.payoff_field(x)?;
    polar_cone_member(&v, x, tol)
}

/// Largest gain any player can get from a pure deviation.
pub fn worst_deviation_gap(game: &FiniteGame, x: &MixedProfile) -> Result<f64> {
    let v = game.payoff_field(x)?;
    Ok(deviation_gaps(&v, x).into_iter().fold(0.0, f64::max))
}

fn deviation_gaps(v: &Blocks, x: &MixedProfile) -> Vec<f64> {
    (0..x.num_players())
        .map(|i| {
            let vi = v.block(i);
            let u: f64 = vi.iter().zip(x.strategy(i)).map(|(a, b)| a * b).sum();
            let best = vi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (best - u).max(0.0)
        })
        .collect()
}

/// Per player, `min_{a ∈ S} v_a − max_{b ∉ S} v_b`, or `+∞` for full support.
pub fn supported_payoff_gaps(v: &Blocks, support: &SupportSet) -> Vec<f64> {
    (0..support.num_players())
        .map(|i| {
            let vi = v.block(i);
            let mut min_in = f64::INFINITY;
            let mut max_out = f64::NEG_INFINITY;
            for (a, &va) in vi.iter().enumerate() {
                if support.contains(i, a) {
                    min_in = min_in.min(va);
                } else {
                    max_out = max_out.max(va);
                }
            }
            if max_out == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                min_in - max_out
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub profile: MixedProfile,
    pub support: SupportSet,
    pub is_nash: bool,
    pub is_pure: bool,
    pub is_strict: bool,
    pub is_quasi_strict: bool,
    pub is_fully_mixed: bool,
    pub is_partially_mixed: bool,
    pub worst_deviation_gap: f64,
    /// Quasi-strict margin `c`; `+∞` (serialized as null) when every player
    /// has full support.
    pub supported_payoff_gap_c: f64,
}

/// Classifies `x`. The class flags are only set for Nash profiles; the raw
/// support structure is always available in `support`.
pub fn classify_equilibrium(game: &FiniteGame, x: &MixedProfile, tol: f64) -> Result<EquilibriumReport> {
    let v = game.payoff_field(x)?;
    let nash = polar_cone_member(&v, x, tol)?;
    let support = x.support();
    let gap = supported_payoff_gaps(&v, &support)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let worst = deviation_gaps(&v, x).into_iter().fold(0.0, f64::max);
    let pure = support.is_pure();
    let full = support.is_full(game.action_counts());
    Ok(EquilibriumReport {
        profile: x.clone(),
        is_nash: nash,
        is_pure: nash && pure,
        is_strict: nash && pure && gap > tol,
        is_quasi_strict: nash && gap > tol,
        is_fully_mixed: nash && full,
        is_partially_mixed: nash && !pure && !full,
        worst_deviation_gap: worst,
        supported_payoff_gap_c: gap,
        support,
    })
}

/// A support profile the enumerator could not resolve exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedSupport {
    pub support: SupportSet,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    pub equilibria: Vec<EquilibriumReport>,
    pub skipped: Vec<SkippedSupport>,
}

/// All Nash equilibria found by support enumeration (≤ 3 players, ≤ 4 actions).
///
/// Two mixed players with the others pure gives a linear indifference system
/// per player; three mixed players with two-action supports reduces to a
/// quadratic. Singular systems and larger three-way supports are skipped and
/// reported. Supports of unequal size between the two mixed players are not
/// searched (they only carry equilibria in degenerate games).
pub fn enumerate_equilibria(game: &FiniteGame, tol: f64) -> Result<Enumeration> {
    let n = game.num_players();
    let max_actions = game.action_counts().iter().copied().max().unwrap_or(0);
    if n > MAX_ENUM_PLAYERS || max_actions > MAX_ENUM_ACTIONS {
        return Err(Error::SizeBound {
            players: n,
            max_actions,
        });
    }
    let counts = game.action_counts().to_vec();
    let subsets: Vec<Vec<Vec<usize>>> = counts.iter().map(|&m| nonempty_subsets(m)).collect();

    let mut candidates: Vec<MixedProfile> = Vec::new();
    let mut skipped = Vec::new();
    let mut choice = vec![0usize; n];
    loop {
        let sets: Vec<Vec<usize>> = (0..n).map(|i| subsets[i][choice[i]].clone()).collect();
        let support = SupportSet::new(&counts, sets)?;
        solve_support(game, &support, &mut candidates, &mut skipped)?;

        let mut i = n;
        loop {
            if i == 0 {
                return finish(game, candidates, skipped, tol);
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < subsets[i].len() {
                break;
            }
            choice[i] = 0;
        }
    }
}

fn finish(
    game: &FiniteGame,
    candidates: Vec<MixedProfile>,
    skipped: Vec<SkippedSupport>,
    tol: f64,
) -> Result<Enumeration> {
    let mut equilibria: Vec<EquilibriumReport> = Vec::new();
    for x in candidates {
        if !is_nash(game, &x, tol)? {
            continue;
        }
        if equilibria.iter().any(|e| e.profile.distance(&x) < DEDUP_DISTANCE) {
            continue;
        }
        equilibria.push(classify_equilibrium(game, &x, tol)?);
    }
    Ok(Enumeration { equilibria, skipped })
}

fn nonempty_subsets(m: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1u32..(1 << m))
        .map(|mask| (0..m).filter(|a| mask & (1 << a) != 0).collect())
        .collect();
    out.sort_by_key(|s: &Vec<usize>| (s.len(), s.clone()));
    out
}

fn solve_support(
    game: &FiniteGame,
    support: &SupportSet,
    candidates: &mut Vec<MixedProfile>,
    skipped: &mut Vec<SkippedSupport>,
) -> Result<()> {
    let counts = game.action_counts();
    let mixed: Vec<usize> = (0..support.num_players())
        .filter(|&i| support.player(i).len() > 1)
        .collect();
    match mixed.len() {
        0 => {
            let actions: Vec<usize> = (0..support.num_players()).map(|i| support.player(i)[0]).collect();
            candidates.push(MixedProfile::pure(counts, &actions)?);
        }
        1 => {
            // A lone mixed player faces fixed opponents: equilibria here form
            // a continuum exactly when that player is indifferent on S.
            let i = mixed[0];
            let mut profile: Vec<usize> = (0..support.num_players()).map(|j| support.player(j)[0]).collect();
            let payoffs: Vec<f64> = support
                .player(i)
                .iter()
                .map(|&a| {
                    profile[i] = a;
                    game.payoff(i, &profile)
                })
                .collect();
            if payoffs.iter().all(|u| (u - payoffs[0]).abs() < 1e-12) {
                skipped.push(SkippedSupport {
                    support: support.clone(),
                    reason: "single mixed player is indifferent (continuum of equilibria)".into(),
                });
            }
        }
        2 => {
            let (i, j) = (mixed[0], mixed[1]);
            if support.player(i).len() != support.player(j).len() {
                return Ok(());
            }
            let xj = match solve_indifference(game, support, i, j) {
                Some(x) => x,
                None => {
                    skipped.push(singular(support));
                    return Ok(());
                }
            };
            let xi = match solve_indifference(game, support, j, i) {
                Some(x) => x,
                None => {
                    skipped.push(singular(support));
                    return Ok(());
                }
            };
            let mut blocks = Blocks::zeros(counts);
            for k in 0..support.num_players() {
                if k == i || k == j {
                    continue;
                }
                blocks.block_mut(k)[support.player(k)[0]] = 1.0;
            }
            if let Some(x) = place(&mut blocks, support, &[(i, xi), (j, xj)]) {
                candidates.push(x);
            }
        }
        3 => {
            if support.sizes().iter().any(|&s| s != 2) {
                skipped.push(SkippedSupport {
                    support: support.clone(),
                    reason: "three mixed players with a support larger than two (nonlinear system)".into(),
                });
                return Ok(());
            }
            solve_three_binary(game, support, candidates, skipped)?;
        }
        _ => unreachable!("enumeration is bounded to three players"),
    }
    Ok(())
}

fn singular(support: &SupportSet) -> SkippedSupport {
    SkippedSupport {
        support: support.clone(),
        reason: "singular indifference system".into(),
    }
}

/// Writes per-player solutions into `blocks`; rejects infeasible ones.
fn place(blocks: &mut Blocks, support: &SupportSet, parts: &[(usize, Vec<f64>)]) -> Option<MixedProfile> {
    for (player, probs) in parts {
        for (&a, &p) in support.player(*player).iter().zip(probs) {
            if p < -1e-12 {
                return None;
            }
            blocks.block_mut(*player)[a] = p.max(0.0);
        }
    }
    MixedProfile::normalized(blocks.clone()).ok()
}

/// Player `j`'s mix on its support that makes player `i` indifferent on
/// theirs, with every other player fixed at their single supported action.
fn solve_indifference(game: &FiniteGame, support: &SupportSet, i: usize, j: usize) -> Option<Vec<f64>> {
    let si = support.player(i);
    let sj = support.player(j);
    let k = si.len();
    let mut profile: Vec<usize> = (0..support.num_players()).map(|p| support.player(p)[0]).collect();
    // Unknowns: x_j on S_j, then the common value w.
    let mut m = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = DVector::<f64>::zeros(k + 1);
    for (r, &a) in si.iter().enumerate() {
        profile[i] = a;
        for (c, &b) in sj.iter().enumerate() {
            profile[j] = b;
            m[(r, c)] = game.payoff(i, &profile);
        }
        m[(r, k)] = -1.0;
    }
    for c in 0..k {
        m[(k, c)] = 1.0;
    }
    rhs[k] = 1.0;
    let sv = m.clone().singular_values();
    let (max, min) = (sv.max(), sv.min());
    if min <= 0.0 || max / min > SINGULAR_CONDITION {
        return None;
    }
    let sol = m.lu().solve(&rhs)?;
    Some(sol.iter().take(k).copied().collect())
}

/// Three players, two supported actions each: one probability per player.
fn solve_three_binary(
    game: &FiniteGame,
    support: &SupportSet,
    candidates: &mut Vec<MixedProfile>,
    skipped: &mut Vec<SkippedSupport>,
) -> Result<()> {
    // Indifference of player i, bilinear in the other two players' first-action
    // probabilities (p_j, p_k) with j < k: α + β p_j + γ p_k + δ p_j p_k.
    let coeffs: Vec<[f64; 4]> = (0..3)
        .map(|i| {
            let others: Vec<usize> = (0..3).filter(|&o| o != i).collect();
            let (j, k) = (others[0], others[1]);
            let mut d = [[0.0; 2]; 2];
            let mut profile = [0usize; 3];
            for (bj, row) in d.iter_mut().enumerate() {
                for (bk, cell) in row.iter_mut().enumerate() {
                    profile[j] = support.player(j)[bj];
                    profile[k] = support.player(k)[bk];
                    profile[i] = support.player(i)[0];
                    let first = game.payoff(i, &profile);
                    profile[i] = support.player(i)[1];
                    *cell = first - game.payoff(i, &profile);
                }
            }
            [
                d[1][1],
                d[0][1] - d[1][1],
                d[1][0] - d[1][1],
                d[0][0] - d[0][1] - d[1][0] + d[1][1],
            ]
        })
        .collect();
    let [a0, b0, g0, d0] = coeffs[0]; // in (p1, p2)
    let [a1, b1, g1, d1] = coeffs[1]; // in (p0, p2)
    let [a2, b2, g2, d2] = coeffs[2]; // in (p0, p1)

    // p0 = A/B and p1 = C/D as affine functions of p2.
    let num0 = [-a1, -g1];
    let den0 = [b1, d1];
    let num1 = [-a0, -g0];
    let den1 = [b0, d0];
    let mul = |p: [f64; 2], q: [f64; 2]| [p[0] * q[0], p[0] * q[1] + p[1] * q[0], p[1] * q[1]];
    let bd = mul(den0, den1);
    let ad = mul(num0, den1);
    let cb = mul(num1, den0);
    let ac = mul(num0, num1);
    let poly: Vec<f64> = (0..3)
        .map(|d| a2 * bd[d] + b2 * ad[d] + g2 * cb[d] + d2 * ac[d])
        .collect();
    let scale = coeffs.iter().flatten().fold(0.0_f64, |m, c| m.max(c.abs())).max(1e-300);
    if poly.iter().all(|c| c.abs() <= 1e-12 * scale.powi(3)) {
        skipped.push(SkippedSupport {
            support: support.clone(),
            reason: "indifference system is identically satisfied (continuum)".into(),
        });
        return Ok(());
    }
    for p2 in real_roots(poly[0], poly[1], poly[2]) {
        if !(-1e-12..=1.0 + 1e-12).contains(&p2) {
            continue;
        }
        let b = den0[0] + den0[1] * p2;
        let dd = den1[0] + den1[1] * p2;
        if b.abs() < 1e-12 * scale || dd.abs() < 1e-12 * scale {
            skipped.push(singular(support));
            continue;
        }
        let p0 = (num0[0] + num0[1] * p2) / b;
        let p1 = (num1[0] + num1[1] * p2) / dd;
        let mut blocks = Blocks::zeros(game.action_counts());
        let parts = [(0, vec![p0, 1.0 - p0]), (1, vec![p1, 1.0 - p1]), (2, vec![p2, 1.0 - p2])];
        if let Some(x) = place(&mut blocks, support, &parts) {
            candidates.push(x);
        }
    }
    Ok(())
}

/// Real roots of c0 + c1 t + c2 t².
fn real_roots(c0: f64, c1: f64, c2: f64) -> Vec<f64> {
    let scale = c0.abs().max(c1.abs()).max(c2.abs());
    if c2.abs() <= 1e-14 * scale {
        if c1.abs() <= 1e-14 * scale {
            return Vec::new();
        }
        return vec![-c0 / c1];
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Vec::new();
    }
    // Numerically stable pair.
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / c2, c0 / q]
}

/// Genericity proxy: every enumerated equilibrium is quasi-strict with
/// margin above [`GENERICITY_GAP`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericityReport {
    pub generic: bool,
    pub min_gap: f64,
    pub num_equilibria: usize,
    pub num_skipped: usize,
}

pub fn genericity(game: &FiniteGame, tol: f64) -> Result<GenericityReport> {
    let e = enumerate_equilibria(game, tol)?;
    let min_gap = e
        .equilibria
        .iter()
        .map(|r| r.supported_payoff_gap_c)
        .fold(f64::INFINITY, f64::min);
    Ok(GenericityReport {
        generic: !e.equilibria.is_empty()
            && e.equilibria.iter().all(|r| r.is_quasi_strict)
            && min_gap > GENERICITY_GAP,
        min_gap,
        num_equilibria: e.equilibria.len(),
        num_skipped: e.skipped.len(),
    })
}

/// The subgame on the given support.
pub fn restrict_to_face(game: &FiniteGame, support: &SupportSet) -> Result<FiniteGame> {
    if support.num_players() != game.num_players() {
        return Err(Error::DimensionMismatch {
            what: "support players",
            expected: game.num_players(),
            found: support.num_players(),
        });
    }
    for i in 0..game.num_players() {
        if let Some(&a) = support.player(i).iter().find(|&&a| a >= game.action_counts()[i]) {
            return Err(Error::InvalidSupport(format!("player {i} action {a} out of range")));
        }
    }
    let sizes = support.sizes();
    let mut full = vec![0usize; game.num_players()];
    let mut payoffs = Vec::with_capacity(sizes.iter().product::<usize>() * sizes.len());
    for i in 0..game.num_players() {
        for local in crate::game::PureProfiles::new(&sizes) {
            for (p, &a) in local.iter().enumerate() {
                full[p] = support.player(p)[a];
            }
            payoffs.push(game.payoff(i, &full));
        }
    }
    FiniteGame::new_face(sizes, payoffs)
}

/// Zero-pads a face profile into the full strategy space.
pub fn embed_profile(face: &MixedProfile, support: &SupportSet, counts: &[usize]) -> Result<MixedProfile> {
    if face.blocks().counts() != support.sizes() {
        return Err(Error::DimensionMismatch {
            what: "face profile",
            expected: support.sizes().iter().sum(),
            found: face.as_slice().len(),
        });
    }
    let mut blocks = Blocks::zeros(counts);
    for i in 0..support.num_players() {
        for (&a, &p) in support.player(i).iter().zip(face.strategy(i)) {
            blocks.block_mut(i)[a] = p;
        }
    }
    MixedProfile::from_blocks(blocks)
}

/// Restriction of a full profile to the support coordinates; mass outside
/// the face is dropped and each block renormalized.
pub fn extract_profile(x: &MixedProfile, support: &SupportSet) -> Result<MixedProfile> {
    let parts: Vec<Vec<f64>> = (0..support.num_players())
        .map(|i| support.player(i).iter().map(|&a| x.strategy(i)[a]).collect())
        .collect();
    MixedProfile::normalized(Blocks::from(parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn polar_cone_examples() {
        let x = MixedProfile::new(vec![vec![0.5, 0.5, 0.0]]).unwrap();
        let v = Blocks::from(vec![vec![3.0, 3.0, 1.0]]);
        assert!(polar_cone_member(&v, &x, 1e-12).unwrap());
        let v = Blocks::from(vec![vec![3.0, 2.0, 1.0]]);
        assert!(!polar_cone_member(&v, &x, 1e-12).unwrap());
        let short = Blocks::from(vec![vec![3.0, 2.0]]);
        assert!(polar_cone_member(&short, &x, 1e-12).is_err());
    }

    #[test]
    fn nash_examples() {
        let mp = corpus::matching_pennies();
        assert!(is_nash(&mp, &MixedProfile::uniform(&[2, 2]), 1e-12).unwrap());
        assert!(!is_nash(&mp, &MixedProfile::pure(&[2, 2], &[0, 0]).unwrap(), 1e-12).unwrap());
        let coord = corpus::coordination_2x2();
        let x = MixedProfile::new(vec![vec![1.0 / 3.0, 2.0 / 3.0], vec![1.0 / 3.0, 2.0 / 3.0]]).unwrap();
        assert!(is_nash(&coord, &x, 1e-12).unwrap());
    }

    #[test]
    fn classification_flags() {
        let mp = corpus::matching_pennies();
        let r = classify_equilibrium(&mp, &MixedProfile::uniform(&[2, 2]), 1e-9).unwrap();
        assert!(r.is_nash && r.is_fully_mixed && !r.is_strict && !r.is_pure);
        assert_eq!(r.supported_payoff_gap_c, f64::INFINITY);

        let dom = corpus::dominance_2x2();
        let r = classify_equilibrium(&dom, &MixedProfile::pure(&[2, 2], &[0, 0]).unwrap(), 1e-9).unwrap();
        assert!(r.is_strict && r.is_pure && r.is_quasi_strict);
        assert!((r.supported_payoff_gap_c - 1.0).abs() < 1e-12);

        // Not Nash: flags gated off, support still reported.
        let r = classify_equilibrium(&dom, &MixedProfile::pure(&[2, 2], &[1, 1]).unwrap(), 1e-9).unwrap();
        assert!(!r.is_nash && !r.is_pure && !r.is_strict);
        assert!(r.support.is_pure());
        assert!(r.worst_deviation_gap > 0.5);
    }

    #[test]
    fn partially_mixed_classification() {
        let g = corpus::zero_sum_2x2x2();
        let x = MixedProfile::new(vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let r = classify_equilibrium(&g, &x, 1e-9).unwrap();
        assert!(r.is_nash && r.is_partially_mixed && r.is_quasi_strict);
        assert!(!r.is_fully_mixed && !r.is_pure);
        assert!((r.supported_payoff_gap_c - 2.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_size_bound() {
        let g = FiniteGame::new(vec![5, 2], vec![0.0; 20]).unwrap();
        assert!(matches!(enumerate_equilibria(&g, 1e-9), Err(Error::SizeBound { .. })));
        let g = FiniteGame::new(vec![2, 2, 2, 2], vec![0.0; 64]).unwrap();
        assert!(matches!(enumerate_equilibria(&g, 1e-9), Err(Error::SizeBound { .. })));
    }

    #[test]
    fn enumeration_records_degenerate_supports() {
        // Constant game: everything is an equilibrium.
        let g = FiniteGame::new(vec![2, 2], vec![1.0; 8]).unwrap();
        let e = enumerate_equilibria(&g, 1e-9).unwrap();
        assert!(!e.skipped.is_empty());
        assert!(e.equilibria.len() >= 4);
    }

    #[test]
    fn restriction_slices_tensor() {
        let mp = corpus::matching_pennies();
        let s = SupportSet::new(&[2, 2], vec![vec![0], vec![0, 1]]).unwrap();
        let face = restrict_to_face(&mp, &s).unwrap();
        assert_eq!(face.action_counts(), &[1, 2]);
        assert_eq!(face.payoff(0, &[0, 0]), 1.0);
        assert_eq!(face.payoff(0, &[0, 1]), -1.0);
        let full = restrict_to_face(&mp, &SupportSet::full(&[2, 2])).unwrap();
        assert_eq!(full.payoffs(), mp.payoffs());
    }

    #[test]
    fn quadratic_roots() {
        let mut r = real_roots(2.0, -3.0, 1.0);
        r.sort_by(f64::total_cmp);
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] - 2.0).abs() < 1e-15);
        assert!(real_roots(1.0, 0.0, 1.0).is_empty());
        assert_eq!(real_roots(-1.0, 2.0, 0.0), vec![0.5]);
    }
}
