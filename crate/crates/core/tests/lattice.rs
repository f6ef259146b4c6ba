use nodal_core::lattice::*;
use nodal_core::Error;
use proptest::prelude::*;

fn brute_force(n: u64) -> Vec<(i64, i64)> {
    let r = (n as f64).sqrt().ceil() as i64 + 1;
    let mut out = Vec::new();
    for x in -r..=r {
        for y in -r..=r {
            if (x * x + y * y) as u64 == n {
                out.push((x, y));
            }
        }
    }
    out
}

fn is_square(n: u64) -> bool {
    let s = (n as f64).sqrt().round() as u64;
    s * s == n
}

fn representable() -> impl Strategy<Value = u64> {
    (1u64..3000).prop_filter("sum of two squares", |&n| is_representable(n))
}

proptest! {
    #[test]
    fn enumeration_matches_brute_force(n in 1u64..3000) {
        let brute = brute_force(n);
        match enumerate_level(n) {
            Ok(level) => {
                prop_assert_eq!(level.count, brute.len());
                prop_assert_eq!(level.points.len(), level.count);
                prop_assert_eq!(level.half_points.len() * 2, level.count);
                for p in &level.points {
                    prop_assert!(brute.contains(&(p.x, p.y)));
                }
            }
            Err(Error::NotRepresentable(_)) => prop_assert!(brute.is_empty()),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn points_closed_under_symmetries(n in representable()) {
        let level = enumerate_level(n).unwrap();
        let set: Vec<(i64, i64)> = level.points.iter().map(|p| (p.x, p.y)).collect();
        for &(x, y) in &set {
            prop_assert!(set.contains(&(-x, -y)));
            prop_assert!(set.contains(&(-y, x)));
        }
        prop_assert_eq!(level.count % 4, 0);
        if !(is_square(n) || (n % 2 == 0 && is_square(n / 2))) {
            prop_assert_eq!(level.count % 8, 0);
        }
    }

    #[test]
    fn fourth_correlations_formula(n in representable()) {
        let level = enumerate_level(n).unwrap();
        prop_assume!(level.count <= DEFAULT_TUPLE_CAP);
        let nn = level.count as u64;
        prop_assert_eq!(spectral_correlations(&level, 4, DEFAULT_TUPLE_CAP).unwrap(), 3 * nn * (nn - 1));
    }

    #[test]
    fn fourier_coefficients_of_lattice_measure(n in representable(), k in 1i64..24) {
        let level = enumerate_level(n).unwrap();
        let m = spectral_measure(&level);
        let c = mu_hat(&m, k);
        prop_assert!(c.im.abs() < 1e-12);
        if k % 4 != 0 {
            prop_assert!(c.re.abs() < 1e-12);
        }
    }

    #[test]
    fn direction_identity(n in representable(), x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let level = enumerate_level(n).unwrap();
        prop_assert!(direction_identity_check(&level, [x, y]).abs() < 1e-12 * (1.0 + x * x + y * y));
    }

    #[test]
    fn separated_levels_have_large_quadruple_sums(n in representable()) {
        let delta = 0.05;
        let level = enumerate_level(n).unwrap();
        prop_assume!(level.count <= DEFAULT_TUPLE_CAP);
        if separation_stats(&level, delta).is_delta_separated {
            let off = offdiagonal_sums(&level, 4, DEFAULT_TUPLE_CAP).unwrap();
            prop_assert!(off.min_nonzero_norm >= (n as f64).powf(2.0 * delta));
        }
    }
}

#[test]
fn sixth_correlations_stay_bounded() {
    for n in [5u64, 25, 65, 325, 1105] {
        let level = enumerate_level(n).unwrap();
        let s6 = spectral_correlations(&level, 6, DEFAULT_TUPLE_CAP).unwrap() as f64;
        let ratio = s6 / (level.count as f64).powf(3.5);
        assert!(ratio < 10.0, "n={n}: {ratio}");
    }
}

#[test]
fn measure_serializes_with_kind_tag() {
    let m = SpectralMeasure::cilleruelo();
    let json = serde_json::to_value(&m).unwrap();
    assert_eq!(json["kind"]["kind"], "cilleruelo");
    let back: SpectralMeasure = serde_json::from_value(json).unwrap();
    assert_eq!(back, m);
}
