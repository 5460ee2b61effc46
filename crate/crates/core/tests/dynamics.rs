use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ftrl_core::corpus::{self, builtin_games};
use ftrl_core::dynamics::{
    detect_support_events, flow_jacobian, ftrl_vector_field, integrate_reduced, integrate_scores,
    integrate_strategies_steep, lift_profile, mixed_strategy_field, projection_field, reduce_scores,
    reduced_vector_field, replicator_field, EventKind, IntegratorConfig, StateSpace,
};
use ftrl_core::ode::Method;
use ftrl_core::profile::default_benchmarks;
use ftrl_core::{Blocks, FiniteGame, MixedProfile, ReducedScore, Regularizer, ScoreProfile, SupportSet};

fn random_scores(rng: &mut ChaCha8Rng, counts: &[usize]) -> ScoreProfile {
    ScoreProfile::new(counts.iter().map(|&m| (0..m).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()).unwrap()
}

fn random_interior(rng: &mut ChaCha8Rng, counts: &[usize]) -> MixedProfile {
    let blocks: Vec<Vec<f64>> = counts
        .iter()
        .map(|&m| {
            let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter().map(|v| v / s).collect()
        })
        .collect();
    MixedProfile::normalized(Blocks::from(blocks)).unwrap()
}

fn regs() -> Vec<Regularizer> {
    vec![Regularizer::NegEntropy, Regularizer::SquaredEuclidean, Regularizer::tsallis(0.5).unwrap()]
}

#[test]
fn score_field_is_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for entry in builtin_games() {
        for reg in regs() {
            let y = random_scores(&mut rng, entry.game.action_counts());
            let field = ftrl_vector_field(&entry.game, &reg, &y).unwrap();
            let strategies = (0..y.num_players()).map(|i| reg.mirror_map(y.scores(i)).unwrap()).collect();
            let by_hand = entry.game.payoff_field(&MixedProfile::new(strategies).unwrap()).unwrap();
            assert!(field.max_abs_diff(&by_hand) < 1e-14);

            let shifted: Vec<Vec<f64>> = (0..y.num_players()).map(|i| y.scores(i).iter().map(|v| v + 3.0).collect()).collect();
            let again = ftrl_vector_field(&entry.game, &reg, &ScoreProfile::new(shifted).unwrap()).unwrap();
            assert!(field.max_abs_diff(&again) < 1e-12);
        }
    }
}

#[test]
fn reduction_commutes_with_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for entry in builtin_games() {
        let g = &entry.game;
        let b = default_benchmarks(g.num_players());
        for reg in regs() {
            for _ in 0..100 {
                let y = random_scores(&mut rng, g.action_counts());
                let v = ScoreProfile::from_blocks(ftrl_vector_field(g, &reg, &y).unwrap()).unwrap();
                let lhs = reduce_scores(&v, &b).unwrap();
                let rhs = reduced_vector_field(g, &reg, &reduce_scores(&y, &b).unwrap()).unwrap();
                assert!(lhs.values().max_abs_diff(rhs.values()) < 1e-12);
            }
        }
    }
}

#[test]
fn reduction_examples() {
    let y = ScoreProfile::new(vec![vec![3.0, 1.0, 2.0], vec![7.0, 7.0]]).unwrap();
    let z = reduce_scores(&y, &[0, 0]).unwrap();
    assert_eq!(z.values().block(0), &[-2.0, -1.0]);
    assert_eq!(z.values().block(1), &[0.0]);
}

#[test]
fn zero_field_keeps_state() {
    let zero = FiniteGame::new(vec![2, 3], vec![0.0; 12]).unwrap();
    let y0 = ScoreProfile::new(vec![vec![0.3, -0.2], vec![1.0, 0.0, 2.0]]).unwrap();
    let traj = integrate_scores(&zero, &Regularizer::NegEntropy, &y0, &IntegratorConfig::default()).unwrap();
    assert!(traj.states.iter().all(|s| s.as_slice() == y0.as_slice()));
    // A constant payoff moves every score equally, so differences stay put.
    let g = FiniteGame::new(vec![2, 3], vec![1.0; 12]).unwrap();
    let z0 = reduce_scores(&y0, &[0, 0]).unwrap();
    let m = flow_jacobian(&g, &Regularizer::NegEntropy, &z0, 5.0, &IntegratorConfig::default()).unwrap();
    assert_eq!(m, nalgebra::DMatrix::identity(3, 3));
}

#[test]
fn rk4_converges_at_fourth_order() {
    let mp = corpus::matching_pennies();
    let reg = Regularizer::NegEntropy;
    let y0 = lift_profile(&reg, &MixedProfile::new(vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap()).unwrap();
    let run = |method: Method| {
        let cfg = IntegratorConfig { method, horizon: 5.0, sample_interval: 5.0, ..Default::default() };
        integrate_scores(&mp, &reg, &y0, &cfg).unwrap().states.last().unwrap().clone()
    };
    let reference = run(Method::Rk45Adaptive { rtol: 1e-13, atol: 1e-14 });
    let err = |h: f64| {
        run(Method::Rk4Fixed { step: h }).iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let ratio = err(0.1) / err(0.05);
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn steep_samples_stay_interior_and_on_simplex() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for entry in builtin_games() {
        for reg in regs() {
            let x0 = random_interior(&mut rng, entry.game.action_counts());
            let y0 = lift_profile(&reg, &x0).unwrap();
            let traj = integrate_scores(&entry.game, &reg, &y0, &IntegratorConfig::default().with_horizon(20.0)).unwrap();
            assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
            for x in &traj.mixed {
                assert!(x.iter().all(|p| *p >= -1e-10));
                for w in entry.game.offsets().windows(2) {
                    assert!((x[w[0]..w[1]].iter().sum::<f64>() - 1.0).abs() <= 1e-10);
                }
                if reg.is_steep() {
                    assert!(x.iter().all(|p| *p > 0.0));
                }
            }
        }
    }
}

#[test]
fn specialization_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for entry in builtin_games() {
        let g = &entry.game;
        let full = SupportSet::full(g.action_counts());
        for _ in 0..100 {
            let x = random_interior(&mut rng, g.action_counts());
            let rep = mixed_strategy_field(g, &Regularizer::NegEntropy, &x, &full).unwrap();
            assert!(rep.max_abs_diff(&replicator_field(g, &x).unwrap()) < 1e-9);
            let proj = mixed_strategy_field(g, &Regularizer::SquaredEuclidean, &x, &full).unwrap();
            assert!(proj.max_abs_diff(&projection_field(g, &x).unwrap()) < 1e-9);
            let ts = mixed_strategy_field(g, &Regularizer::tsallis(0.5).unwrap(), &x, &full).unwrap();
            for block in [rep.blocks().collect::<Vec<_>>(), ts.blocks().collect()] {
                assert!(block.iter().all(|b| b.iter().sum::<f64>().abs() < 1e-12));
            }
        }
    }
}

#[test]
fn replicator_example() {
    let mp = corpus::matching_pennies();
    let x = MixedProfile::new(vec![vec![0.6, 0.4], vec![0.5, 0.5]]).unwrap();
    let v = replicator_field(&mp, &x).unwrap();
    assert!(v.block(0).iter().all(|c| c.abs() < 1e-15));
    // Player 2 payoffs against x₁ = (0.6, 0.4): v₂ = (−0.2, 0.2), u₂ = 0.
    let expected = [0.5 * -0.2, 0.5 * 0.2];
    assert!(v.block(1).iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-15));
}

#[test]
fn projection_examples() {
    let rps = corpus::rock_paper_scissors();
    assert!(projection_field(&rps, &MixedProfile::uniform(&[3, 3])).unwrap().as_slice().iter().all(|c| c.abs() < 1e-15));
    let x = MixedProfile::new(vec![vec![0.5, 0.0, 0.5], vec![0.2, 0.3, 0.5]]).unwrap();
    let p = projection_field(&rps, &x).unwrap();
    assert_eq!(p.block(0)[1], 0.0);
    assert!(p.block(0).iter().sum::<f64>().abs() < 1e-15);
    let face = mixed_strategy_field(&rps, &Regularizer::SquaredEuclidean, &x, &x.support()).unwrap();
    assert!(face.max_abs_diff(&p) < 1e-12);
}

#[test]
fn primal_vertex_is_constant() {
    let rps = corpus::rock_paper_scissors();
    let x0 = MixedProfile::pure(&[3, 3], &[0, 1]).unwrap();
    let traj = integrate_strategies_steep(&rps, &Regularizer::NegEntropy, &x0, &IntegratorConfig::default()).unwrap();
    assert!(traj.mixed.iter().all(|x| x.as_slice() == x0.as_slice()));
}

#[test]
fn primal_face_is_invariant() {
    let rps = corpus::rock_paper_scissors();
    let x0 = MixedProfile::new(vec![vec![0.3, 0.7, 0.0], vec![0.6, 0.0, 0.4]]).unwrap();
    for reg in [Regularizer::NegEntropy, Regularizer::tsallis(0.5).unwrap()] {
        let traj = integrate_strategies_steep(&rps, &reg, &x0, &IntegratorConfig::default().with_horizon(20.0)).unwrap();
        assert_eq!(traj.space, StateSpace::Primal);
        for k in 0..traj.len() {
            let x = traj.mixed_profile(k).unwrap();
            assert_eq!(x.support(), x0.support());
            assert_eq!(x.strategy(0)[2], 0.0);
            assert_eq!(x.strategy(1)[1], 0.0);
        }
        assert!(traj.stats.max_projection < 1e-12);
    }
}

#[test]
fn dual_and_primal_integration_agree() {
    let mp = corpus::matching_pennies();
    let reg = Regularizer::NegEntropy;
    let cfg = IntegratorConfig::adaptive(1e-10, 1e-12, 10.0, 0.1);
    let x0 = MixedProfile::new(vec![vec![0.7, 0.3], vec![0.6, 0.4]]).unwrap();
    let dual = integrate_scores(&mp, &reg, &lift_profile(&reg, &x0).unwrap(), &cfg).unwrap();
    let primal = integrate_strategies_steep(&mp, &reg, &x0, &cfg).unwrap();
    assert_eq!(dual.times, primal.times);
    for (a, b) in dual.mixed.iter().zip(&primal.mixed) {
        assert!(a.iter().zip(b).all(|(p, q)| (p - q).abs() < 1e-6));
    }
}

#[test]
fn score_and_reduced_flows_commute() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = IntegratorConfig::adaptive(1e-10, 1e-12, 10.0, 0.5);
    for entry in builtin_games() {
        for reg in regs() {
            for _ in 0..4 {
                let y0 = random_scores(&mut rng, entry.game.action_counts());
                let b = default_benchmarks(entry.game.num_players());
                let full = integrate_scores(&entry.game, &reg, &y0, &cfg).unwrap();
                let reduced = integrate_reduced(&entry.game, &reg, &reduce_scores(&y0, &b).unwrap(), &cfg).unwrap();
                for k in 0..full.len() {
                    let z = reduce_scores(&full.score_profile(k).unwrap(), &b).unwrap();
                    let gap = z.as_slice().iter().zip(&reduced.states[k]).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                    assert!(gap < 1e-6, "{} {reg} gap {gap}", entry.key);
                }
            }
        }
    }
}

#[test]
fn reported_quantities_are_benchmark_invariant() {
    let rps = corpus::rock_paper_scissors();
    let cfg = IntegratorConfig::adaptive(1e-10, 1e-12, 10.0, 0.5);
    let y0 = ScoreProfile::new(vec![vec![0.4, -0.3, 0.1], vec![0.0, 0.5, -0.2]]).unwrap();
    for reg in regs() {
        let a = integrate_reduced(&rps, &reg, &reduce_scores(&y0, &[0, 0]).unwrap(), &cfg).unwrap();
        let b = integrate_reduced(&rps, &reg, &reduce_scores(&y0, &[2, 1]).unwrap(), &cfg).unwrap();
        for (p, q) in a.mixed.iter().zip(&b.mixed) {
            assert!(p.iter().zip(q).all(|(s, t)| (s - t).abs() < 1e-7));
        }
        let ja = flow_jacobian(&rps, &reg, &reduce_scores(&y0, &[0, 0]).unwrap(), 3.0, &cfg).unwrap();
        let jb = flow_jacobian(&rps, &reg, &reduce_scores(&y0, &[2, 1]).unwrap(), 3.0, &cfg).unwrap();
        assert!((ja.determinant() - jb.determinant()).abs() < 1e-6);
    }
}

#[test]
fn steep_trajectories_have_no_events() {
    let dom = corpus::dominance_2x2();
    let reg = Regularizer::NegEntropy;
    let y0 = lift_profile(&reg, &MixedProfile::uniform(&[2, 2])).unwrap();
    let cfg = IntegratorConfig::default();
    let traj = integrate_scores(&dom, &reg, &y0, &cfg).unwrap();
    assert!(detect_support_events(&dom, &reg, &traj, &cfg).unwrap().is_empty());
}

#[test]
fn dominance_exits_once_per_player() {
    let dom = corpus::dominance_2x2();
    let reg = Regularizer::SquaredEuclidean;
    let cfg = IntegratorConfig::adaptive(1e-10, 1e-12, 10.0, 0.1);
    let x0 = MixedProfile::new(vec![vec![0.4, 0.6], vec![0.3, 0.7]]).unwrap();
    let traj = integrate_scores(&dom, &reg, &lift_profile(&reg, &x0).unwrap(), &cfg).unwrap();
    let events = detect_support_events(&dom, &reg, &traj, &cfg).unwrap();
    assert_eq!(events.len(), 2);
    for (i, e) in events.iter().enumerate() {
        assert_eq!(e.kind, EventKind::SupportExit);
        assert_eq!(e.action, 1);
        assert!(!e.ambiguous);
        assert!(e.bracket[1] - e.bracket[0] <= cfg.event_tolerance);
        assert!(e.bracket[0] <= e.time && e.time <= e.bracket[1]);
        assert!(e.time > 0.0 && e.time < 10.0, "event {i} at {}", e.time);
    }
    let mut players: Vec<usize> = events.iter().map(|e| e.player).collect();
    players.sort();
    assert_eq!(players, vec![0, 1]);
}

#[test]
fn event_time_matches_closed_form() {
    // Player 2 is fixed at its dominant action, so player 1's score gap
    // grows at rate 1 and the second action leaves when y₁ − y₂ reaches 1.
    let dom = corpus::dominance_2x2();
    let reg = Regularizer::SquaredEuclidean;
    let cfg = IntegratorConfig::adaptive(1e-12, 1e-14, 2.0, 0.25);
    let y0 = ScoreProfile::new(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
    let traj = integrate_scores(&dom, &reg, &y0, &cfg).unwrap();
    let events = detect_support_events(&dom, &reg, &traj, &cfg).unwrap();
    assert_eq!(events.len(), 1);
    assert!((events[0].time - 1.0).abs() < 1e-7);
}

#[test]
fn entering_support_is_detected() {
    // Player 1 starts on action 0 with the scores favouring action 1.
    let dom = corpus::dominance_2x2();
    let reg = Regularizer::SquaredEuclidean;
    let cfg = IntegratorConfig::adaptive(1e-12, 1e-14, 3.0, 0.25);
    let y0 = ScoreProfile::new(vec![vec![0.0, -1.5], vec![0.0, 2.0]]).unwrap();
    let traj = integrate_scores(&dom, &reg, &y0, &cfg).unwrap();
    let events = detect_support_events(&dom, &reg, &traj, &cfg).unwrap();
    assert!(events.iter().any(|e| e.kind == EventKind::SupportEnter));
}

#[test]
fn flow_jacobian_at_zero_time() {
    let mp = corpus::matching_pennies();
    let z = ReducedScore::zeros(&[2, 2], vec![0, 0]).unwrap();
    let m = flow_jacobian(&mp, &Regularizer::NegEntropy, &z, 0.0, &IntegratorConfig::default()).unwrap();
    assert_eq!(m, nalgebra::DMatrix::identity(2, 2));
}

#[test]
fn flow_jacobian_preserves_volume_on_matching_pennies() {
    let mp = corpus::matching_pennies();
    let reg = Regularizer::NegEntropy;
    let cfg = IntegratorConfig::adaptive(1e-10, 1e-12, 10.0, 10.0);
    let y0 = lift_profile(&reg, &MixedProfile::new(vec![vec![0.7, 0.3], vec![0.6, 0.4]]).unwrap()).unwrap();
    let m = flow_jacobian(&mp, &reg, &reduce_scores(&y0, &[0, 0]).unwrap(), 10.0, &cfg).unwrap();
    assert!((m.determinant() - 1.0).abs() < 1e-4);
}

#[test]
fn integrator_failure_propagates() {
    let mp = corpus::matching_pennies();
    let bad = IntegratorConfig { horizon: -1.0, ..Default::default() };
    let y0 = ScoreProfile::zeros(&[2, 2]);
    assert!(integrate_scores(&mp, &Regularizer::NegEntropy, &y0, &bad).is_err());
    let wrong = ScoreProfile::zeros(&[3, 2]);
    assert!(integrate_scores(&mp, &Regularizer::NegEntropy, &wrong, &IntegratorConfig::default()).is_err());
}
