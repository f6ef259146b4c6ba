use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use nodal_core::crossings::{run_campaign, CampaignSettings};
use nodal_core::curve::{build_unit_speed, B_functional, CurveSpec, UnitSpeedCurve, DEFAULT_NODES};
use nodal_core::kacrice::*;
use nodal_core::lattice::{enumerate_level, spectral_measure, EnergyLevel};
use num_complex::Complex64;
use proptest::prelude::*;

fn circle() -> UnitSpeedCurve {
    build_unit_speed(&CurveSpec::circle(0.2), DEFAULT_NODES).unwrap()
}

/// `|∫ e^{2πi⟨v, γ(t)⟩} dt|²` on the curve table.
fn line_transform_sq(curve: &UnitSpeedCurve, v: [i64; 2]) -> f64 {
    let tb = &curve.table;
    let mut acc = Complex64::new(0.0, 0.0);
    for (p, w) in tb.position.iter().zip(&tb.weight) {
        let phase = TAU * (v[0] as f64 * p[0] + v[1] as f64 * p[1]);
        acc += Complex64::from_polar(*w, phase);
    }
    acc.norm_sqr()
}

/// `∫∫ r^{2q}` expanded over lattice tuples, one line integral per distinct sum.
fn even_moment_by_tuples(level: &EnergyLevel, curve: &UnitSpeedCurve, q: usize) -> f64 {
    let mut sums: HashMap<[i64; 2], u64> = HashMap::new();
    sums.insert([0, 0], 1);
    for _ in 0..(2 * q) {
        let mut next = HashMap::new();
        for (v, m) in &sums {
            for p in &level.points {
                *next.entry([v[0] + p.x, v[1] + p.y]).or_insert(0) += m;
            }
        }
        sums = next;
    }
    let nn = level.count as f64;
    sums.iter()
        .map(|(v, m)| *m as f64 * line_transform_sq(curve, *v))
        .sum::<f64>()
        / nn.powi(2 * q as i32)
}

#[test]
fn second_and_fourth_moments_match_tuple_expansion() {
    let level = enumerate_level(65).unwrap();
    let curve = circle();
    let table = moment_integrals(&level, &curve, &[MomentOrder::Second, MomentOrder::Fourth]).unwrap();
    let r2 = table.row("r^2").unwrap().integral;
    let r4 = table.row("r^4").unwrap().integral;
    let o2 = even_moment_by_tuples(&level, &curve, 1);
    let o4 = even_moment_by_tuples(&level, &curve, 2);
    assert!((r2 - o2).abs() < 1e-8 * o2, "{r2} vs {o2}");
    assert!((r4 - o4).abs() < 1e-8 * o4, "{r4} vs {o4}");
}

#[test]
fn moment_table_reports_every_row() {
    let level = enumerate_level(25).unwrap();
    let curve = circle();
    let table = moment_integrals(
        &level,
        &curve,
        &[MomentOrder::Sixth, MomentOrder::Second, MomentOrder::Fourth, MomentOrder::Second],
    )
    .unwrap();
    assert_eq!(table.rows.len(), 3 + 8 + 3);
    for row in &table.rows {
        assert!(row.integral.is_finite());
        assert_eq!(row.prediction.is_none(), row.order == 6);
    }
    let measure = spectral_measure(&level);
    let b = B_functional(&curve, &measure);
    let row = table.row("(r12/E)^2").unwrap();
    assert!((row.prediction.unwrap() - b / level.count as f64).abs() < 1e-14);
}

#[test]
fn numeric_variance_agrees_with_simulation() {
    let level = enumerate_level(25).unwrap();
    let curve = circle();
    let kr = variance_numeric(&level, &curve, DEFAULT_C0).unwrap();
    let mc = run_campaign(&level, &curve, &CampaignSettings::new(3000, 11)).unwrap();
    let xs: Vec<f64> = mc.counts.iter().map(|&c| c as f64).collect();
    let m4 = xs.iter().map(|x| (x - mc.mean).powi(4)).sum::<f64>() / xs.len() as f64;
    let se = ((m4 - mc.variance.powi(2)) / xs.len() as f64).sqrt();
    assert!(
        (kr.variance - mc.variance).abs() < 4.0 * se,
        "kac-rice {} vs monte carlo {} (se {se})",
        kr.variance,
        mc.variance
    );
    assert!(kr.diagnostics.quadrature_rel_change <= QUADRATURE_REL_TOL);
}

#[test]
fn singular_area_shrinks_with_level() {
    let curve = circle();
    let fractions: Vec<f64> = [65u64, 325, 1105]
        .iter()
        .map(|&n| SquarePartition::new(&enumerate_level(n).unwrap(), &curve, DEFAULT_C0).singular_fraction())
        .collect();
    assert!(fractions.windows(2).all(|w| w[1] < w[0]), "{fractions:?}");
}

#[test]
fn approx_static_flower_is_positive() {
    let level = enumerate_level(325).unwrap();
    let flower = build_unit_speed(&CurveSpec::flower(0.2, 0.02, 3), DEFAULT_NODES).unwrap();
    let v = variance_approx_static(&level, &flower).unwrap();
    assert!(v.is_finite() && v > 0.0, "{v}");
}

#[test]
#[ignore = "finite-level gap: off-diagonal lattice terms dominate at N = 16"]
fn approx_static_tracks_numeric_variance() {
    let level = enumerate_level(65).unwrap();
    let curve = circle();
    let numeric = variance_numeric(&level, &curve, DEFAULT_C0).unwrap().variance;
    let approx = variance_approx_static(&level, &curve).unwrap();
    assert!((approx / numeric - 1.0).abs() < 0.15, "{approx} vs {numeric}");
}

#[test]
#[ignore = "finite-level gap: the generic-regime asymptotics are far from n = 25"]
fn generic_ellipse_variance_near_leading_order() {
    let level = enumerate_level(25).unwrap();
    let ellipse = build_unit_speed(&CurveSpec::ellipse(0.25, 0.15), DEFAULT_NODES).unwrap();
    let numeric = variance_numeric(&level, &ellipse, DEFAULT_C0).unwrap().variance;
    let b = B_functional(&ellipse, &spectral_measure(&level));
    let l = ellipse.length;
    let lead = (4.0 * b - l * l) * level.n as f64 / level.count as f64;
    assert!((numeric / lead - 1.0).abs() < 0.3, "{numeric} vs {lead}");
}

fn valid_point() -> impl Strategy<Value = [f64; 4]> {
    (-0.9f64..0.9, -1.0f64..1.0, -1.0f64..1.0, -2.0f64..2.0).prop_filter_map("discriminant", |(x, a, b, c)| {
        let room = 1.0 - x * x;
        (a * a < 0.95 * room && b * b < 0.95 * room).then_some([x, a, b, c])
    })
}

proptest! {
    #[test]
    fn k2_is_nonnegative(v in valid_point(), n in 1u64..2000) {
        let alpha = 2.0 * PI * PI * n as f64;
        let p = CorrelationPoint::from_normalized(v, alpha);
        prop_assert!(K2_exact(&p, alpha).unwrap() >= 0.0);
    }

    #[test]
    fn k2_symmetric_under_swap(v in valid_point()) {
        let alpha = 2.0 * PI * PI * 65.0;
        let p = CorrelationPoint::from_normalized(v, alpha);
        let a = K2_exact(&p, alpha).unwrap();
        let b = K2_exact(&p.swapped(), alpha).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn taylor_close_for_small_covariances(v in valid_point(), s in 0.01f64..0.03) {
        let alpha = 2.0 * PI * PI * 13.0;
        let p = CorrelationPoint::from_normalized(v.map(|x| x * s), alpha);
        let exact = K2_exact(&p, alpha).unwrap();
        prop_assert!((exact - K2_taylor(&p, alpha)).abs() < 1e-6 * alpha / (PI * PI));
    }
}
