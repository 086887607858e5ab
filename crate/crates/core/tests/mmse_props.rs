use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slepbeam::measure::{random_measurements, slepian_measurements};
use slepbeam::recon::{mc_mse, mse_closed_form, MmseReconstructor};
use slepbeam::signal::complex_normal;
use slepbeam::slepian::ProlateSpec;
use slepbeam::{CovarianceModel, C64};

fn model(m: usize, w: f64, tilt: f64) -> CovarianceModel {
    let modulation = (0..m).map(|i| C64::from_polar(1.0, tilt * i as f64)).collect();
    CovarianceModel::from_prolate(ProlateSpec::uniform(w, m), modulation, 1.0).unwrap()
}

fn random_unitary(k: usize, seed: u64) -> DMatrix<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(k, k, |_, _| complex_normal(&mut rng, 1.0));
    a.qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mse_is_invariant_under_row_rotation(
        m in 4usize..40, w in 0.02f64..0.45, tilt in -3.0f64..3.0, k in 1usize..6, seed in any::<u64>(), s2 in 0.0f64..0.1,
    ) {
        let r = model(m, w, tilt);
        let k = k.min(m);
        let phi = random_measurements(k, m, seed, true).unwrap().effective();
        let rotated = random_unitary(k, seed ^ 0xff) * &phi;
        let a = mse_closed_form(&phi, &r, s2).unwrap().raw;
        let b = mse_closed_form(&rotated, &r, s2).unwrap().raw;
        prop_assert!((a - b).abs() <= 1e-10 * r.trace().max(1.0));
    }

    #[test]
    fn more_rows_never_hurt(m in 4usize..40, w in 0.02f64..0.45, seed in any::<u64>(), s2 in 0.0f64..0.1) {
        let r = model(m, w, 0.7);
        let full = random_measurements(m.min(8), m, seed, false).unwrap().effective();
        let mut prev = f64::INFINITY;
        for k in 1..=full.nrows() {
            let e = mse_closed_form(&full.rows(0, k).into_owned(), &r, s2).unwrap().raw;
            prop_assert!(e <= prev + 1e-10 * r.trace());
            prev = e;
        }
    }

    #[test]
    fn energy_splits_into_estimate_and_error(m in 4usize..32, w in 0.02f64..0.45, k in 1usize..8, s2 in 0.0f64..0.2, seed in any::<u64>()) {
        // trace R = E|y_hat|^2 + E|y - y_hat|^2
        let r = model(m, w, -1.1);
        let phi = random_measurements(k.min(m), m, seed, true).unwrap().effective();
        let rec = MmseReconstructor::new(&phi, r.matrix(), s2).unwrap();
        let mut s = &phi * r.matrix() * phi.adjoint();
        for i in 0..s.nrows() {
            s[(i, i)] += C64::new(s2, 0.0);
        }
        let g = rec.gain();
        let explained = (g * s * g.adjoint()).trace().re;
        prop_assert!((explained + rec.mse().raw - r.trace()).abs() <= 1e-9 * r.trace());
    }

    #[test]
    fn slepian_error_is_the_eigenvalue_tail(m in 4usize..48, w in 0.02f64..0.45, tilt in -3.0f64..3.0) {
        let r = model(m, w, tilt);
        for k in 1..=m {
            let phi = slepian_measurements(&r, k).unwrap().effective();
            let got = mse_closed_form(&phi, &r, 0.0).unwrap().raw;
            prop_assert!((got - r.tail_energy(k)).abs() <= 1e-8 * r.trace());
        }
    }
}

#[test]
fn monte_carlo_agrees_with_closed_form() {
    for (i, s2) in [0.0, 0.01, 0.3].into_iter().enumerate() {
        let r = model(24, 0.2, 0.4);
        let phi = random_measurements(5, 24, 7 + i as u64, true).unwrap().effective();
        let exact = mse_closed_form(&phi, &r, s2).unwrap().raw;
        let mc = mc_mse(&phi, &r, s2, 20_000, 11).unwrap();
        assert!((mc.mean - exact).abs() <= 4.0 * mc.std_error, "{} vs {exact} ({})", mc.mean, mc.std_error);
    }
}

#[test]
fn monte_carlo_is_reproducible() {
    let r = model(16, 0.3, 0.0);
    let phi = random_measurements(3, 16, 1, true).unwrap().effective();
    let a = mc_mse(&phi, &r, 0.05, 3000, 42).unwrap();
    let b = mc_mse(&phi, &r, 0.05, 3000, 42).unwrap();
    assert_eq!(a, b);
}

#[test]
fn full_rank_unitary_readout_is_lossless() {
    let r = model(12, 0.25, 0.3);
    let u = random_unitary(12, 5);
    assert!(mse_closed_form(&u, &r, 0.0).unwrap().raw < 1e-10);
    let y = DVector::from_fn(12, |i, _| C64::new(i as f64, 1.0));
    let rec = MmseReconstructor::new(&u, r.matrix(), 0.0).unwrap();
    let back = rec.estimate(&(&u * &y)).unwrap();
    assert!((back - y).norm() < 1e-6 * 12.0);
}
