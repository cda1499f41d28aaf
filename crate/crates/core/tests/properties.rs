use proptest::prelude::*;

use urnwalk::asymptotics::{analyze, Regime};
use urnwalk::fixed_point::{solve_fixed_point, FixedPointOptions, MapKind};
use urnwalk::linalg::{from_rows, lyapunov_residual, symmetric_eigenvalues};
use urnwalk::model::{draw_sample_counts, step, trajectory_rng, walker_position};
use urnwalk::operators::{en_eval, fn_eval, h0_eval, hn_eval, LatticePoint};
use urnwalk::simulator::{run_trajectory, RunConfig};
use urnwalk::{ModelParams, ReinforcementSpec, SampleMode, SampleSizeLaw, SamplingScheme, SimplexPoint, UrnState};

fn unit_open() -> impl Strategy<Value = f64> {
    0.01f64..0.99
}

fn point() -> impl Strategy<Value = SimplexPoint> {
    (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(u, v)| SimplexPoint::new(u, (1.0 - u) * v).unwrap())
}

/// Affine `F` that stays in `[0, 1]` on the simplex.
fn affine() -> impl Strategy<Value = ReinforcementSpec> {
    (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(c0, u, v)| {
        let a = -c0 + u;
        let b = -c0 + v;
        ReinforcementSpec::affine(c0, a, b).unwrap()
    })
}

fn law() -> impl Strategy<Value = SampleSizeLaw> {
    prop_oneof![
        (1u64..8).prop_map(SampleSizeLaw::FixedSize),
        Just(SampleSizeLaw::UniformOn1toN),
        (0.05f64..0.45).prop_map(|alpha| SampleSizeLaw::ShiftedBinomial { c: 1.0, alpha }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn colour_laws_are_distributions(p in 0.0f64..=1.0, q in 0.0f64..=1.0, q1 in unit_open(), q2 in unit_open(), g in 0.0f64..=1.0) {
        let m = ModelParams::new(p, q, q1, q2, 1).unwrap();
        for probs in [m.initial_colour_probabilities(), m.colour_probabilities(g)] {
            prop_assert!(probs.iter().all(|v| *v >= 0.0));
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn samples_respect_the_urn(
        counts in proptest::array::uniform4(0u64..30),
        k in 1u64..40,
        seed in any::<u64>(),
        naive in any::<bool>(),
    ) {
        let state = UrnState::from_counts(counts[0], counts[1], counts[2], counts[3]);
        prop_assume!(state.n > 0);
        let mode = if naive { SampleMode::NaiveIndices } else { SampleMode::Fast };
        let mut rng = trajectory_rng(seed, 0);
        let w = draw_sample_counts(&state, SamplingScheme::WithReplacement, k, &mut rng, mode).unwrap();
        prop_assert_eq!(w.as_array().iter().sum::<u64>(), k);
        for (drawn, have) in w.as_array().iter().zip(counts) {
            if have == 0 {
                prop_assert_eq!(*drawn, 0);
            }
        }
        let wo = draw_sample_counts(&state, SamplingScheme::WithoutReplacement, k, &mut rng, mode);
        if k > state.n {
            prop_assert!(wo.is_err());
        } else {
            let wo = wo.unwrap();
            prop_assert_eq!(wo.as_array().iter().sum::<u64>(), k);
            for (drawn, have) in wo.as_array().iter().zip(counts) {
                prop_assert!(*drawn <= have);
            }
        }
    }

    #[test]
    fn steps_add_one_customer(spec in affine(), law in law(), seed in any::<u64>(), p in 0.0f64..=1.0) {
        let params = ModelParams::new(p, 0.5, 0.6, 0.3, 12).unwrap();
        let mut rng = trajectory_rng(seed, 1);
        let mut s = UrnState::from_counts(3, 3, 3, 3);
        for _ in 0..50 {
            let next = step(&s, &params, SamplingScheme::WithReplacement, &spec, &law, SampleMode::Fast, &mut rng).unwrap();
            prop_assert_eq!(next.n, s.n + 1);
            prop_assert!(next.is_balanced());
            prop_assert_eq!((walker_position(&next) - walker_position(&s)).abs(), 1);
            s = next;
        }
    }

    #[test]
    fn affine_reproduction(spec in affine(), pt in point(), law in law(), n in 1u64..60, p in 0.0f64..=1.0) {
        let params = ModelParams::new(p, 0.5, 0.5, 0.5, 1).unwrap();
        let g = spec.g(p, pt.x, pt.y);
        prop_assert!((hn_eval(&spec, &params, &law, n, pt).unwrap() - g).abs() < 1e-12);
        if let SampleSizeLaw::FixedSize(_) = law {
            prop_assert!((h0_eval(&spec, &params, &law, pt).unwrap() - g).abs() < 1e-12);
        }
    }

    #[test]
    fn operators_stay_in_unit_interval(s in -8.0f64..8.0, pt in point(), n in 8u64..60, r in (0.0f64..=1.0, 0.0f64..=1.0), p in 0.0f64..=1.0) {
        let spec = ReinforcementSpec::logistic(s).unwrap();
        let params = ModelParams::new(p, 0.5, 0.5, 0.5, 1).unwrap();
        let r1 = (r.0 * n as f64) as u64;
        let r2 = (r.1 * (n - r1) as f64) as u64;
        let lp = LatticePoint::new(n, r1, r2).unwrap();
        let fixed = SampleSizeLaw::FixedSize(5);
        let vals = [
            h0_eval(&spec, &params, &fixed, pt).unwrap(),
            hn_eval(&spec, &params, &SampleSizeLaw::UniformOn1toN, n, pt).unwrap(),
            fn_eval(&spec, &params, &fixed, lp).unwrap(),
            en_eval(&spec, &params, &SampleSizeLaw::UniformOn1toN, lp).unwrap(),
        ];
        for v in vals {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn roots_solve_the_fixed_point_equations(spec in affine(), q1 in unit_open(), q2 in unit_open(), law in law()) {
        let params = ModelParams::new(1.0, 0.5, q1, q2, 1).unwrap();
        let r = solve_fixed_point(MapKind::for_law(&law), &spec, &params, &law, &FixedPointOptions::default());
        // margins at or above 1 may legitimately fail to converge
        if let Ok(r) = r {
            let g = spec.g(1.0, r.x_star, r.y_star);
            prop_assert!((q1 * g - r.x_star).abs() < 1e-10);
            prop_assert!((q2 * (1.0 - g) - r.y_star).abs() < 1e-10);
            prop_assert!((r.x_star + r.y_star + r.z_star) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn gaussian_covariances_solve_the_lyapunov_equation(spec in affine(), q1 in unit_open(), q2 in unit_open()) {
        let law = SampleSizeLaw::UniformOn1toN;
        let params = ModelParams::new(1.0, 0.5, q1, q2, 1).unwrap();
        let fp = solve_fixed_point(MapKind::HHat, &spec, &params, &law, &FixedPointOptions::default()).unwrap();
        prop_assume!(fp.kappa < 0.45);
        let a = analyze(&fp).unwrap();
        prop_assert!(a.regime != Regime::D2Superdiffusive && a.regime != Regime::D1Critical);
        let sigma = from_rows(&a.sigma.unwrap());
        prop_assert!((sigma - sigma.transpose()).norm() < 1e-12);
        prop_assert!(symmetric_eigenvalues(&sigma)[0] > -1e-12);
        let b = from_rows(&a.jacobian) + nalgebra::Matrix3::identity() * 0.5;
        prop_assert!(lyapunov_residual(&b, &sigma, &from_rows(&a.gamma)).norm() < 1e-10);
    }

    #[test]
    fn trajectories_are_reproducible(seed in any::<u64>(), rep in 0u64..1000) {
        let params = ModelParams::new(0.7, 0.5, 0.6, 0.4, 5).unwrap();
        let cfg = RunConfig::new(
            params,
            ReinforcementSpec::logistic(2.0).unwrap(),
            SamplingScheme::WithoutReplacement,
            SampleSizeLaw::FixedSize(3),
            300,
            seed,
            1,
        )
        .unwrap();
        prop_assert_eq!(run_trajectory(&cfg, rep).unwrap(), run_trajectory(&cfg, rep).unwrap());
    }
}
