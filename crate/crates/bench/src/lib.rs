//! Shared fixtures for the benchmarks.

use slepbeam::geometry::{build_ula, DirectionOfArrival};
use slepbeam::slepian::{covariance, ProlateSpec};
use slepbeam::{CovarianceModel, DVector, SourceSpec, C64};

/// Half-wavelength ULA at 28 GHz with a 3 GHz half bandwidth from endfire.
pub fn ula_model(m: usize) -> CovarianceModel {
    let g = build_ula(m, 28e9).expect("valid array");
    covariance(&g, &SourceSpec::new(28e9, 3e9, 1.0, DirectionOfArrival::azimuth(0.0))).expect("valid source")
}

/// Uniform prolate spec with a linear phase ramp.
pub fn prolate(m: usize, w: f64) -> (ProlateSpec, Vec<C64>) {
    let modulation = (0..m).map(|i| C64::from_polar(1.0, 0.37 * i as f64)).collect();
    (ProlateSpec::uniform(w, m), modulation)
}

pub fn test_vector(m: usize) -> DVector<C64> {
    DVector::from_fn(m, |i, _| C64::new((0.1 * i as f64).sin(), (0.07 * i as f64).cos()))
}
