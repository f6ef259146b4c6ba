use nodal_core::curve::{build_unit_speed, CurveSpec, UnitSpeedCurve, DEFAULT_NODES};
use nodal_core::field::*;
use nodal_core::lattice::enumerate_level;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ellipse() -> UnitSpeedCurve {
    build_unit_speed(&CurveSpec::ellipse(0.25, 0.15), DEFAULT_NODES).unwrap()
}

#[test]
fn value_and_derivative_uncorrelated() {
    let level = enumerate_level(25).unwrap();
    let curve = ellipse();
    let trials = 10_000;
    for &t in &[0.1, 0.7, 1.1] {
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for i in 0..trials {
            let (f, d) = sample_coefficients(&level, 5, i).restricted_at(&curve, t);
            sxy += f * d;
            sxx += f * f;
            syy += d * d;
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() < 3.0 / (trials as f64).sqrt(), "t={t}: {corr}");
    }
}

#[test]
fn empirical_covariance_matches_analytic() {
    let level = enumerate_level(25).unwrap();
    let curve = ellipse();
    let trials = 10_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pairs: Vec<(f64, f64)> = (0..20)
        .map(|_| (rng.gen_range(0.0..curve.length), rng.gen_range(0.0..curve.length)))
        .collect();
    let samples: Vec<WaveSample> = (0..trials).map(|i| sample_coefficients(&level, 8, i)).collect();
    for &(t1, t2) in &pairs {
        let cov = covariance_bundle(&level, &curve, t1, t2);
        let prods: Vec<[f64; 4]> = samples
            .iter()
            .map(|s| {
                let (f1, d1) = s.restricted_at(&curve, t1);
                let (f2, d2) = s.restricted_at(&curve, t2);
                [f1 * f2, d1 * f2, f1 * d2, d1 * d2]
            })
            .collect();
        for (k, target) in [cov.r, cov.r1, cov.r2, cov.r12].into_iter().enumerate() {
            let xs: Vec<f64> = prods.iter().map(|p| p[k]).collect();
            let m = xs.iter().sum::<f64>() / trials as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (trials - 1) as f64;
            let se = (v / trials as f64).sqrt();
            assert!((m - target).abs() < 4.0 * se, "({t1},{t2}) k={k}: {m} vs {target}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn covariance_is_translation_invariant(
        dx in -0.15f64..0.15,
        dy in -0.15f64..0.15,
        t1 in 0.0f64..1.25,
        t2 in 0.0f64..1.25,
    ) {
        let level = enumerate_level(65).unwrap();
        let a = build_unit_speed(&CurveSpec::circle(0.2), DEFAULT_NODES).unwrap();
        let shifted = CurveSpec::Circle {
            center: [0.5 + dx, 0.5 + dy],
            radius: 0.2,
            start: 0.0,
            sweep: std::f64::consts::TAU,
        };
        let b = build_unit_speed(&shifted, DEFAULT_NODES).unwrap();
        let ca = covariance_bundle(&level, &a, t1, t2);
        let cb = covariance_bundle(&level, &b, t1, t2);
        let scale = level.alpha();
        for (x, y) in [(ca.r, cb.r), (ca.r1, cb.r1), (ca.r2, cb.r2), (ca.r12, cb.r12)] {
            prop_assert!((x - y).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn covariance_bounded_by_one(t1 in 0.0f64..1.5, t2 in 0.0f64..1.5) {
        let level = enumerate_level(325).unwrap();
        let c = covariance_bundle(&level, &ellipse(), t1, t2);
        prop_assert!(c.r.abs() <= 1.0 + 1e-12);
    }
}

#[test]
fn process_grid_matches_direct_evaluation() {
    let level = enumerate_level(65).unwrap();
    let curve = ellipse();
    let basis = ProcessBasis::new(&level, &curve, DEFAULT_SAMPLES_PER_WAVELENGTH);
    let sample = sample_coefficients(&level, 1, 2);
    let process = basis.process(&sample, &curve);
    for (i, &t) in process.grid.iter().enumerate().step_by(37) {
        let (f, d) = sample.restricted_at(&curve, t);
        assert!((process.values[i] - f).abs() < 1e-9);
        assert!((process.derivatives[i] - d).abs() < 1e-7 * level.sqrt_eigenvalue());
    }
}
