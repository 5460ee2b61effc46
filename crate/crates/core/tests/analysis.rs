use ftrl_core::analysis::{
    check_incompressibility, recurrence_probe, sample_ball, set_stability_probe, stability_probe,
    support_collapse_time, t0_bound, volume_preservation_test, zero_sum_excursion_check, StabilitySettings, Verdict,
    VolumeMode,
};
use ftrl_core::corpus::{self, builtin_games};
use ftrl_core::dynamics::{integrate_scores, lift_profile, reduce_scores, IntegratorConfig};
use ftrl_core::{Error, FiniteGame, MixedProfile, ReducedScore, Regularizer};

fn mp_start() -> MixedProfile {
    MixedProfile::new(vec![vec![0.7, 0.3], vec![0.6, 0.4]]).unwrap()
}

#[test]
fn matching_pennies_is_incompressible() {
    let r = check_incompressibility(&corpus::matching_pennies(), &Regularizer::NegEntropy, 100, 1e-6, 5).unwrap();
    assert_eq!(r.divergence_samples.len(), 200);
    assert!(r.pass);
}

#[test]
fn incompressibility_is_seeded() {
    let g = corpus::rock_paper_scissors();
    let reg = Regularizer::tsallis(0.5).unwrap();
    let a = check_incompressibility(&g, &reg, 10, 1e-6, 9).unwrap();
    let b = check_incompressibility(&g, &reg, 10, 1e-6, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn volume_at_zero_horizon() {
    let z = ReducedScore::zeros(&[2, 2], vec![0, 0]).unwrap();
    let r = volume_preservation_test(
        &corpus::matching_pennies(),
        &Regularizer::NegEntropy,
        &VolumeMode::Point(z),
        0.0,
        &IntegratorConfig::default(),
        1e-4,
    )
    .unwrap();
    assert_eq!(r.det_jacobian_per_time, vec![(0.0, 1.0)]);
    assert!(r.pass);
}

#[test]
fn volume_is_preserved_in_both_modes() {
    let reg = Regularizer::NegEntropy;
    let cfg = IntegratorConfig::adaptive(1e-10, 1e-12, 10.0, 0.5);
    for g in [corpus::matching_pennies(), corpus::rock_paper_scissors()] {
        let x0 = MixedProfile::normalized(ftrl_core::Blocks::from(
            g.action_counts().iter().map(|&m| (1..=m).map(|a| a as f64).collect::<Vec<f64>>()).collect::<Vec<_>>(),
        ))
        .unwrap();
        let z0 = reduce_scores(&lift_profile(&reg, &x0).unwrap(), &[0, 0]).unwrap();
        let point = volume_preservation_test(&g, &reg, &VolumeMode::Point(z0.clone()), 10.0, &cfg, 1e-4).unwrap();
        assert!(point.pass && point.max_abs_log_det < 1e-4);
        assert!(point.det_jacobian_per_time.iter().all(|(_, d)| *d > 0.0));
        let cloud = VolumeMode::Cloud { center: z0, spread: 1e-4 };
        let cloud = volume_preservation_test(&g, &reg, &cloud, 10.0, &cfg, 1e-4).unwrap();
        assert!(cloud.pass, "cloud log det {}", cloud.max_abs_log_det);
        assert_eq!(cloud.det_jacobian_per_time.len(), point.det_jacobian_per_time.len());
    }
}

#[test]
fn volume_is_preserved_for_interior_pairs() {
    let cfg = IntegratorConfig::adaptive(1e-10, 1e-12, 10.0, 1.0);
    for entry in builtin_games() {
        for reg in [Regularizer::NegEntropy, Regularizer::tsallis(0.5).unwrap()] {
            let x0 = MixedProfile::uniform(entry.game.action_counts());
            let y0 = lift_profile(&reg, &x0).unwrap();
            let b = vec![0; entry.game.num_players()];
            let z0 = reduce_scores(&y0, &b).unwrap();
            let r = volume_preservation_test(&entry.game, &reg, &VolumeMode::Point(z0), 10.0, &cfg, 1e-4).unwrap();
            assert!(r.pass, "{} {reg}: {}", entry.key, r.max_abs_log_det);
        }
    }
}

#[test]
fn recurrence_examples() {
    let mp = corpus::matching_pennies();
    let cfg = IntegratorConfig::adaptive(1e-10, 1e-12, 200.0, 0.01);
    let r = recurrence_probe(&mp, &Regularizer::NegEntropy, &mp_start(), 1e-2, 200.0, &cfg).unwrap();
    assert!(r.recurrent && !r.stationary);
    assert!(r.return_times.windows(2).all(|w| w[1] > w[0]));
    assert!(r.return_times.iter().all(|t| *t <= 200.0));

    let rest = recurrence_probe(&mp, &Regularizer::NegEntropy, &MixedProfile::uniform(&[2, 2]), 1e-2, 50.0, &cfg).unwrap();
    assert!(rest.stationary && !rest.recurrent);

    let dom = corpus::dominance_2x2();
    let r = recurrence_probe(&dom, &Regularizer::SquaredEuclidean, &mp_start(), 1e-2, 50.0, &cfg).unwrap();
    assert!(!r.recurrent);
}

#[test]
fn recurrence_requires_interior_start() {
    let mp = corpus::matching_pennies();
    let vertex = MixedProfile::pure(&[2, 2], &[0, 1]).unwrap();
    let r = recurrence_probe(&mp, &Regularizer::NegEntropy, &vertex, 1e-2, 10.0, &IntegratorConfig::default());
    assert!(r.is_err());
}

fn quick(radius: f64) -> StabilitySettings {
    StabilitySettings {
        radius,
        n_samples: 20,
        ..StabilitySettings::default()
    }
}

#[test]
fn stability_examples() {
    let dom = corpus::dominance_2x2();
    let ne = MixedProfile::pure(&[2, 2], &[0, 0]).unwrap();
    let r = stability_probe(&dom, &Regularizer::SquaredEuclidean, &ne, &quick(0.05)).unwrap();
    assert_eq!(r.verdict, Verdict::AsymptoticallyStableEvidence);
    assert_eq!(r.fraction_converged, 1.0);

    let rps = corpus::rock_paper_scissors();
    let r = stability_probe(&rps, &Regularizer::NegEntropy, &MixedProfile::uniform(&[3, 3]), &quick(0.02)).unwrap();
    assert_eq!(r.verdict, Verdict::UnstableEvidence);
    assert_eq!(r.fraction_converged, 0.0);
    assert!((0.0..=1.0).contains(&r.fraction_contained));
}

#[test]
fn stability_is_reproducible() {
    let coord = corpus::coordination_2x2();
    let x = MixedProfile::new(vec![vec![1.0 / 3.0, 2.0 / 3.0]; 2]).unwrap();
    let a = stability_probe(&coord, &Regularizer::NegEntropy, &x, &quick(0.02)).unwrap();
    let b = stability_probe(&coord, &Regularizer::NegEntropy, &x, &quick(0.02)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn stability_needs_ten_samples() {
    let dom = corpus::dominance_2x2();
    let ne = MixedProfile::pure(&[2, 2], &[0, 0]).unwrap();
    let s = StabilitySettings { n_samples: 5, ..StabilitySettings::default() };
    assert!(matches!(stability_probe(&dom, &Regularizer::NegEntropy, &ne, &s), Err(Error::InvalidConfig(_))));
}

#[test]
fn interior_balls_are_not_stable_under_steep_dynamics() {
    for entry in builtin_games() {
        let center = MixedProfile::uniform(entry.game.action_counts());
        for reg in [Regularizer::NegEntropy, Regularizer::tsallis(0.5).unwrap()] {
            let r = set_stability_probe(&entry.game, &reg, &center, 0.05, &quick(0.05)).unwrap();
            assert_eq!(r.verdict, Verdict::UnstableEvidence, "{} {reg}", entry.key);
            assert_eq!(r.ball_radius, Some(0.05));
        }
    }
}

#[test]
fn t0_bound_examples() {
    let dom = corpus::dominance_2x2();
    let ne = MixedProfile::pure(&[2, 2], &[0, 0]).unwrap();
    let b = t0_bound(&dom, &Regularizer::SquaredEuclidean, &ne, 0.001).unwrap();
    assert_eq!(b.g_constant, 1.0);
    assert!((b.c_constant - 1.0).abs() < 0.01);
    assert!((b.t0 - 2.0).abs() < 0.02);

    // The grid maximum of |x_a − x_b| is 1 on any simplex.
    let rps_like = FiniteGame::from_fn(vec![3, 2], |i, p| if i == 0 && p[0] == 0 { 1.0 } else { 0.0 }).unwrap();
    let x = MixedProfile::new(vec![vec![1.0, 0.0, 0.0], vec![0.5, 0.5]]).unwrap();
    assert_eq!(t0_bound(&rps_like, &Regularizer::SquaredEuclidean, &x, 0.01).unwrap().g_constant, 1.0);
}

#[test]
fn t0_bound_rejects_large_radius() {
    let coord = corpus::coordination_2x2();
    let ne = MixedProfile::pure(&[2, 2], &[0, 0]).unwrap();
    assert!(matches!(
        t0_bound(&coord, &Regularizer::SquaredEuclidean, &ne, 0.8),
        Err(Error::NonPositiveGap { .. })
    ));
}

#[test]
fn collapse_examples() {
    let dom = corpus::dominance_2x2();
    let ne = MixedProfile::pure(&[2, 2], &[0, 0]).unwrap();
    let reg = Regularizer::SquaredEuclidean;
    let cfg = IntegratorConfig::adaptive(1e-10, 1e-12, 20.0, 0.05);
    let starts = sample_ball(&ne, 0.05, 50, 3).unwrap();
    let r = support_collapse_time(&dom, &reg, &ne, &starts, 20.0, &cfg).unwrap();
    assert!(r.all_collapsed && r.all_within_bound);
    assert_eq!(r.bound_t0, 2.0 * r.g_constant / r.c_constant);
    assert!(r.samples.iter().all(|s| s.collapse_time.unwrap() <= 20.0));

    // Already on the equilibrium face with the right multiplier signs.
    let on_face = vec![ne.clone(), MixedProfile::pure(&[2, 2], &[0, 0]).unwrap()];
    let r = support_collapse_time(&dom, &reg, &ne, &on_face, 5.0, &cfg).unwrap();
    assert!(r.samples.iter().all(|s| s.collapse_time == Some(0.0)));

    assert!(matches!(
        support_collapse_time(&dom, &Regularizer::NegEntropy, &ne, &starts, 5.0, &cfg),
        Err(Error::SteepRegularizer)
    ));
}

#[test]
fn collapse_rejects_bad_inputs() {
    let cfg = IntegratorConfig::default();
    let constant = FiniteGame::new(vec![2, 2], vec![0.0; 8]).unwrap();
    let x = MixedProfile::pure(&[2, 2], &[0, 0]).unwrap();
    assert!(matches!(
        support_collapse_time(&constant, &Regularizer::SquaredEuclidean, &x, std::slice::from_ref(&x), 5.0, &cfg),
        Err(Error::NonGenericGame(_))
    ));
    let dom = corpus::dominance_2x2();
    let not_ne = MixedProfile::pure(&[2, 2], &[1, 1]).unwrap();
    assert!(matches!(
        support_collapse_time(&dom, &Regularizer::SquaredEuclidean, &not_ne, &[x], 5.0, &cfg),
        Err(Error::NotQuasiStrict)
    ));
}

#[test]
fn fenchel_gap_is_conserved() {
    let mp = corpus::matching_pennies();
    let reg = Regularizer::NegEntropy;
    let x_star = MixedProfile::uniform(&[2, 2]);
    let coarse = IntegratorConfig::adaptive(1e-10, 1e-12, 100.0, 0.5);
    let traj = integrate_scores(&mp, &reg, &lift_profile(&reg, &mp_start()).unwrap(), &coarse).unwrap();
    let r = zero_sum_excursion_check(&mp, &reg, &x_star, &traj).unwrap();
    assert!(r.relative && r.max_relative_drift < 1e-5, "drift {}", r.max_relative_drift);
    // A tighter run drifts less, so the residual drift is integration error.
    let fine = IntegratorConfig::adaptive(1e-12, 1e-14, 100.0, 0.5);
    let traj = integrate_scores(&mp, &reg, &lift_profile(&reg, &mp_start()).unwrap(), &fine).unwrap();
    let tight = zero_sum_excursion_check(&mp, &reg, &x_star, &traj).unwrap();
    assert!(tight.max_abs_drift <= r.max_abs_drift);

    let at_rest = integrate_scores(&mp, &reg, &lift_profile(&reg, &x_star).unwrap(), &coarse).unwrap();
    let r = zero_sum_excursion_check(&mp, &reg, &x_star, &at_rest).unwrap();
    assert_eq!(r.max_abs_drift, 0.0);
}

#[test]
fn excursion_check_needs_zero_sum() {
    let coord = corpus::coordination_2x2();
    let reg = Regularizer::NegEntropy;
    let traj = integrate_scores(&coord, &reg, &lift_profile(&reg, &mp_start()).unwrap(), &IntegratorConfig::default()).unwrap();
    let x = MixedProfile::new(vec![vec![1.0 / 3.0, 2.0 / 3.0]; 2]).unwrap();
    assert!(matches!(zero_sum_excursion_check(&coord, &reg, &x, &traj), Err(Error::NotZeroSum)));
}
