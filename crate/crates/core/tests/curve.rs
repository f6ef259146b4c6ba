use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nodal_core::curve::*;
use nodal_core::lattice::{Atom, SpectralMeasure};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-8;

fn build(spec: CurveSpec) -> UnitSpeedCurve {
    build_unit_speed(&spec, DEFAULT_NODES).unwrap()
}

/// A `π/2`-invariant atomic measure with `orbits` random orbits.
fn invariant_measure(rng: &mut ChaCha8Rng, orbits: usize) -> SpectralMeasure {
    let raw: Vec<f64> = (0..orbits).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut atoms = Vec::new();
    for w in raw {
        let theta: f64 = rng.gen_range(0.0..FRAC_PI_2);
        for j in 0..4 {
            atoms.push(Atom {
                angle: theta + j as f64 * FRAC_PI_2,
                weight: w / total / 4.0,
            });
        }
    }
    SpectralMeasure::atomic(atoms)
}

fn max_static_defect(curve: &UnitSpeedCurve) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let l2 = curve.length * curve.length;
    (0..64)
        .map(|_| {
            let m = invariant_measure(&mut rng, 3);
            (4.0 * B_functional(curve, &m) - l2).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn static_detection_matches_measure_scan() {
    let specs = [
        CurveSpec::circle(0.2),
        CurveSpec::flower(0.2, 0.03, 4),
        CurveSpec::arc(0.2, 0.3, PI),
        CurveSpec::ellipse(0.25, 0.15),
        CurveSpec::arc(0.2, 0.0, 1.0),
    ];
    for spec in specs {
        let c = build(spec.clone());
        let l2 = c.length * c.length;
        let by_scan = max_static_defect(&c) < TOL * l2;
        assert_eq!(is_static(&c, TOL), by_scan, "{}", spec.id());
    }
}

#[test]
fn flowers_have_static_energy() {
    for k in 3..=6 {
        let c = build(CurveSpec::flower(0.2, 0.02, k));
        let b = B_functional(&c, &SpectralMeasure::uniform());
        assert!((b - c.length * c.length / 4.0).abs() < TOL * c.length * c.length, "k={k}");
    }
}

#[test]
fn functional_bounds_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let curves = [
        build(CurveSpec::circle(0.2)),
        build(CurveSpec::ellipse(0.25, 0.15)),
        build(CurveSpec::flower(0.2, 0.02, 5)),
        build(CurveSpec::arc(0.25, 1.0, 2.0)),
    ];
    for c in &curves {
        let l2 = c.length * c.length;
        let mut measures = vec![
            SpectralMeasure::uniform(),
            SpectralMeasure::cilleruelo(),
            SpectralMeasure::tilted_cilleruelo(),
        ];
        measures.extend((0..8).map(|_| invariant_measure(&mut rng, 2)));
        for m in &measures {
            let b = B_functional(c, m);
            let a = A_functional(c, m);
            assert!(b >= l2 / 4.0 * (1.0 - 1e-12) && b <= l2 / 2.0 * (1.0 + 1e-12), "B={b}");
            assert!(a >= l2 / 16.0 * (1.0 - 1e-12) && a <= l2 / 4.0 * (1.0 + 1e-12), "A={a}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rotation_turns_i_gamma(beta in 0.0f64..TAU, a in 0.16f64..0.3, b in 0.1f64..0.15) {
        let base = build(CurveSpec::ellipse(a, b));
        let rotated = build(CurveSpec::Ellipse { center: [0.5, 0.5], a, b, rotation: beta });
        let i0 = I_gamma(&base);
        let i1 = I_gamma(&rotated);
        let expected = i0 * Complex64::from_polar(1.0, 2.0 * beta);
        prop_assert!((i1 - expected).norm() < 1e-9 * base.length);
        prop_assert!((i1.norm() - i0.norm()).abs() < 1e-9 * base.length);
    }

    #[test]
    fn limit_coefficient_sum_is_measure_free(mu in -1.0f64..1.0, k in 3u32..7) {
        let c = build(CurveSpec::flower(0.2, 0.02, k));
        let lc = limit_coefficients(&c, mu).unwrap();
        let p = fg_profiles(&c);
        prop_assert!((lc.a1 + lc.a2 - 4.0 * p.int_f2).abs() < 1e-12 * c.length);
    }

    #[test]
    fn arc_static_iff_half_turn_multiple(sweep in 0.5f64..6.0) {
        let c = build(CurveSpec::arc(0.2, 0.0, sweep));
        let near_half_turn = (sweep / PI - (sweep / PI).round()).abs() < 1e-9;
        prop_assert_eq!(is_static(&c, TOL), near_half_turn);
    }
}

#[test]
fn curve_spec_round_trips_through_json() {
    let spec = CurveSpec::flower(0.2, 0.05, 3);
    let json = serde_json::to_string(&spec).unwrap();
    assert!(json.contains("\"family\":\"flower\""));
    let back: CurveSpec = serde_json::from_str(&json).unwrap();
    assert_eq!(back.id(), spec.id());
}
