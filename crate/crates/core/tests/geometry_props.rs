use proptest::prelude::*;
use slepbeam::geometry::{
    build_circular, build_random_linear, build_ula, build_upa, delays, effective_aperture, half_wavelength,
    subspace_dimension, ula_dimension, upa_dimension,
};
use slepbeam::DirectionOfArrival;

fn doa() -> impl Strategy<Value = DirectionOfArrival> {
    (0.0f64..std::f64::consts::TAU, -1.5f64..1.5).prop_map(|(a, e)| DirectionOfArrival::new(a, e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aperture_ignores_translation(m in 2usize..12, n in 1usize..12, d in doa(), off in prop::array::uniform3(-1.0f64..1.0)) {
        let g = build_upa(m, n, 28e9).unwrap();
        let a = effective_aperture(&g, &d);
        let b = effective_aperture(&g.translated(off), &d);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn aperture_is_even_in_direction(m in 2usize..64, d in doa()) {
        let g = build_circular(m, 28e9).unwrap();
        let u = d.unit_normal();
        let neg = d.negated();
        let a = slepbeam::geometry::aperture_along(&g, &u);
        let b = slepbeam::geometry::aperture_along(&g, &neg);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn centroid_delays_sum_to_zero(m in 1usize..64, seed in any::<u64>(), d in doa()) {
        let g = build_random_linear(m, half_wavelength(28e9), seed).unwrap();
        let p = delays(&g, &d);
        let scale = p.delays_s.iter().fold(0.0f64, |a, t| a.max(t.abs())).max(1e-15);
        prop_assert!(p.delays_s.iter().sum::<f64>().abs() < 1e-9 * scale * m as f64);
    }

    #[test]
    fn dimension_is_monotone_in_bandwidth(m in 2usize..256, d in doa(), lo in 1e8f64..5e9, extra in 0.0f64..5e9) {
        let g = build_ula(m, 28e9).unwrap();
        prop_assert!(subspace_dimension(&g, &d, lo) <= subspace_dimension(&g, &d, lo + extra));
    }

    #[test]
    fn ula_closed_form_matches_aperture(m in 2usize..256, az in 0.0f64..3.14, om in 1e8f64..8e9) {
        // The closed form uses M half-wavelengths, the aperture (M - 1).
        let g = build_ula(m, 28e9).unwrap();
        let d = DirectionOfArrival::azimuth(az);
        let exact = subspace_dimension(&g, &d, om);
        let closed = ula_dimension(m, 28e9, om, &d);
        prop_assert!(closed >= exact && closed <= exact + 1);
    }
}

#[test]
fn circular_aperture_spread_is_bounded_by_diameter() {
    let g = build_circular(125, 28e9).unwrap();
    let r = g.elements[0][0];
    for k in 0..72 {
        let d = DirectionOfArrival::new(k as f64 * 5f64.to_radians(), 0.0);
        let a = effective_aperture(&g, &d);
        assert!(a <= 2.0 * r + 1e-12);
        assert!(a >= 2.0 * r * (std::f64::consts::PI / 125.0).cos() - 1e-12);
    }
}

#[test]
fn reference_dimensions() {
    let ula = build_ula(64, 28e9).unwrap();
    assert_eq!(subspace_dimension(&ula, &DirectionOfArrival::azimuth(0.0), 3e9), 7);
    let d = DirectionOfArrival::from_degrees(45.0, 60.0);
    assert_eq!(upa_dimension(32, 32, 28e9, 4.26e9, &d), 4);
    let ula256 = build_ula(256, 28e9).unwrap();
    assert_eq!(subspace_dimension(&ula256, &DirectionOfArrival::from_degrees(45.0, 0.0), 1.065e9), 7);
}
