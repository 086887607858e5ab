//! Bandlimited plane-wave sources, sum-of-tones synthesis, array snapshots
//! and temporal decimation schedules.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{delays, effective_aperture, ArrayGeometry, DirectionOfArrival, SPEED_OF_LIGHT};
use crate::slepian::CovarianceModel;
use crate::{Error, Result, C64};

pub const DEFAULT_TONES: usize = 256;

/// One plane-wave source with a flat PSD of height `power` on
/// `[carrier_hz - half_bandwidth_hz, carrier_hz + half_bandwidth_hz]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub carrier_hz: f64,
    pub half_bandwidth_hz: f64,
    pub power: f64,
    pub doa: DirectionOfArrival,
}

impl SourceSpec {
    pub fn new(carrier_hz: f64, half_bandwidth_hz: f64, power: f64, doa: DirectionOfArrival) -> Self {
        Self { carrier_hz, half_bandwidth_hz, power, doa }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz.is_finite() && self.carrier_hz > 0.0) {
            return Err(Error::InvalidArgument(format!("carrier must be positive, got {}", self.carrier_hz)));
        }
        if !(self.half_bandwidth_hz.is_finite() && self.half_bandwidth_hz >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "half bandwidth must be nonnegative, got {}",
                self.half_bandwidth_hz
            )));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::InvalidArgument(format!("power must be positive, got {}", self.power)));
        }
        Ok(())
    }
}

/// `s(t) = sum_i a_i exp(j 2 pi f_i t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSignal {
    pub frequencies_hz: Vec<f64>,
    pub amplitudes: Vec<C64>,
}

/// Time-stamped array snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotEnsemble {
    pub timestamps: Vec<f64>,
    pub samples: Vec<DVector<C64>>,
}

/// Uniform and decimated snapshot periods for one arrival direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecimationSchedule {
    /// Nyquist period `1 / (2 Omega)`.
    pub t_s: f64,
    /// Array transit time `A / c`.
    pub t_d: f64,
    pub ratio: f64,
}

/// Draw from `CN(0, var)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

pub fn complex_normal_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, var: f64) -> DVector<C64> {
    DVector::from_fn(n, |_, _| complex_normal(rng, var))
}

/// Tones i.i.d. uniform on the band with `CN(0, 2 Omega gamma / n)`
/// amplitudes, so `E|s(t)|^2 = 2 Omega gamma`. A zero-bandwidth source is a
/// single tone at the carrier with `E|s|^2 = gamma`.
pub fn synthesize(src: &SourceSpec, n_tones: usize, seed: u64) -> Result<SyntheticSignal> {
    src.validate()?;
    if n_tones == 0 {
        return Err(Error::InvalidArgument("n_tones must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if src.half_bandwidth_hz == 0.0 {
        return Ok(SyntheticSignal {
            frequencies_hz: vec![src.carrier_hz],
            amplitudes: vec![complex_normal(&mut rng, src.power)],
        });
    }
    let lo = src.carrier_hz - src.half_bandwidth_hz;
    let width = 2.0 * src.half_bandwidth_hz;
    let var = width * src.power / n_tones as f64;
    let mut frequencies_hz = Vec::with_capacity(n_tones);
    let mut amplitudes = Vec::with_capacity(n_tones);
    for _ in 0..n_tones {
        frequencies_hz.push(lo + width * rng.random::<f64>());
        amplitudes.push(complex_normal(&mut rng, var));
    }
    Ok(SyntheticSignal { frequencies_hz, amplitudes })
}

fn phasor(f: f64, t: f64) -> C64 {
    // Reduce the cycle count before forming the angle to keep the phase
    // accurate for large f * t.
    let cycles = f * t;
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (cycles - cycles.round()))
}

impl SyntheticSignal {
    pub fn evaluate(&self, t: f64) -> C64 {
        self.frequencies_hz.iter().zip(&self.amplitudes).map(|(&f, &a)| a * phasor(f, t)).sum()
    }

    /// The same tones shifted to complex baseband around `carrier_hz`.
    pub fn demodulated(&self, carrier_hz: f64) -> Self {
        Self {
            frequencies_hz: self.frequencies_hz.iter().map(|f| f - carrier_hz).collect(),
            amplitudes: self.amplitudes.clone(),
        }
    }

    pub fn sampler(&self, g: &ArrayGeometry, doa: &DirectionOfArrival) -> ArraySampler {
        ArraySampler::new(self, g, doa)
    }
}

/// Precomputed per-tone, per-element phases for repeated snapshot evaluation.
pub struct ArraySampler {
    frequencies_hz: Vec<f64>,
    amplitudes: Vec<C64>,
    /// `exp(-j 2 pi f_i tau_m)`, one row per element.
    delay_phase: DMatrix<C64>,
}

impl ArraySampler {
    fn new(sig: &SyntheticSignal, g: &ArrayGeometry, doa: &DirectionOfArrival) -> Self {
        let tau = delays(g, doa).delays_s;
        let f = &sig.frequencies_hz;
        let delay_phase = DMatrix::from_fn(tau.len(), f.len(), |m, i| phasor(f[i], -tau[m]));
        Self { frequencies_hz: f.clone(), amplitudes: sig.amplitudes.clone(), delay_phase }
    }

    /// `y_m = s(t - tau_m)`.
    pub fn snapshot(&self, t: f64) -> DVector<C64> {
        let weights =
            DVector::from_iterator(self.frequencies_hz.len(), self.frequencies_hz.iter().zip(&self.amplitudes).map(|(&f, &a)| a * phasor(f, t)));
        &self.delay_phase * weights
    }
}

pub fn snapshot(sig: &SyntheticSignal, g: &ArrayGeometry, doa: &DirectionOfArrival, t0: f64) -> DVector<C64> {
    sig.sampler(g, doa).snapshot(t0)
}

/// Snapshots at `t_start + i * period` for `i < count`.
pub fn ensemble(
    sig: &SyntheticSignal,
    g: &ArrayGeometry,
    doa: &DirectionOfArrival,
    t_start: f64,
    period: f64,
    count: usize,
) -> Result<SnapshotEnsemble> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
    }
    let timestamps: Vec<f64> = (0..count).map(|i| t_start + i as f64 * period).collect();
    Ok(ensemble_at(sig, g, doa, &timestamps))
}

/// Snapshots at arbitrary (increasing) times.
pub fn ensemble_at(sig: &SyntheticSignal, g: &ArrayGeometry, doa: &DirectionOfArrival, times: &[f64]) -> SnapshotEnsemble {
    let sampler = sig.sampler(g, doa);
    let samples = times.par_iter().map(|&t| sampler.snapshot(t)).collect();
    SnapshotEnsemble { timestamps: times.to_vec(), samples }
}

impl SnapshotEnsemble {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn elements(&self) -> usize {
        self.samples.first().map_or(0, |s| s.len())
    }

    /// Time series of element `m`.
    pub fn element_stream(&self, m: usize) -> Vec<C64> {
        self.samples.iter().map(|s| s[m]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.timestamps.len() != self.samples.len() {
            return Err(Error::DimensionMismatch { expected: self.timestamps.len(), got: self.samples.len() });
        }
        if self.timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("timestamps must be strictly increasing".into()));
        }
        let m = self.elements();
        if let Some(bad) = self.samples.iter().find(|s| s.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, got: bad.len() });
        }
        Ok(())
    }
}

/// Exact draw from `CN(0, R)` via `V diag(sqrt(lambda)) g`.
pub fn gaussian_snapshot<R: Rng + ?Sized>(model: &CovarianceModel, rng: &mut R) -> DVector<C64> {
    let g = complex_normal_vector(rng, model.dim(), 1.0);
    let scaled = DVector::from_iterator(model.dim(), g.iter().zip(model.eigenvalues()).map(|(z, l)| z * l.sqrt()));
    model.eigenvectors() * scaled
}

pub fn decimation_schedule(g: &ArrayGeometry, doa: &DirectionOfArrival, omega_hz: f64) -> Result<DecimationSchedule> {
    if !(omega_hz.is_finite() && omega_hz > 0.0) {
        return Err(Error::InvalidArgument(format!("half bandwidth must be positive, got {omega_hz}")));
    }
    let a = effective_aperture(g, doa);
    if a <= 1e-12 * crate::geometry::half_wavelength(g.carrier_hz) {
        return Err(Error::DegenerateAperture);
    }
    let t_s = 1.0 / (2.0 * omega_hz);
    let t_d = a / SPEED_OF_LIGHT;
    Ok(DecimationSchedule { t_s, t_d, ratio: t_d / t_s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_circular, build_ula, subspace_dimension};
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn zero_band_is_single_tone() {
        let src = SourceSpec::new(28e9, 0.0, 1.0, DirectionOfArrival::azimuth(0.0));
        let s = synthesize(&src, 64, 3).unwrap();
        assert_eq!(s.frequencies_hz, vec![28e9]);
    }

    #[test]
    fn tones_stay_in_band_and_seed_matters() {
        let src = SourceSpec::new(28e9, 3e9, 1.0, DirectionOfArrival::azimuth(0.0));
        let a = synthesize(&src, 256, 1).unwrap();
        assert!(a.frequencies_hz.iter().all(|f| (25e9..=31e9).contains(f)));
        assert_eq!(a, synthesize(&src, 256, 1).unwrap());
        assert_ne!(a.amplitudes, synthesize(&src, 256, 2).unwrap().amplitudes);
    }

    #[test]
    fn broadside_snapshot_is_flat() {
        let g = build_ula(8, 28e9).unwrap();
        let doa = DirectionOfArrival::azimuth(FRAC_PI_2);
        let src = SourceSpec::new(28e9, 3e9, 1.0, doa);
        let s = synthesize(&src, 32, 5).unwrap();
        let y = snapshot(&s, &g, &doa, 1.3e-9);
        let s0 = s.evaluate(1.3e-9);
        assert!(y.iter().all(|v| (v - s0).norm() < 1e-12 * s0.norm().max(1.0)));
    }

    #[test]
    fn tone_snapshot_matches_closed_form() {
        let g = build_circular(10, 28e9).unwrap();
        let doa = DirectionOfArrival::azimuth(0.7);
        let sig = SyntheticSignal { frequencies_hz: vec![27e9], amplitudes: vec![C64::new(0.5, -0.2)] };
        let t0 = 2.5e-9;
        let y = snapshot(&sig, &g, &doa, t0);
        let tau = delays(&g, &doa).delays_s;
        for m in 0..10 {
            let expect = C64::new(0.5, -0.2) * C64::from_polar(1.0, 2.0 * PI * 27e9 * (t0 - tau[m]));
            assert!((y[m] - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn ensemble_timing() {
        let g = build_ula(4, 28e9).unwrap();
        let doa = DirectionOfArrival::azimuth(0.0);
        let src = SourceSpec::new(28e9, 1e9, 1.0, doa);
        let s = synthesize(&src, 8, 1).unwrap();
        let e = ensemble(&s, &g, &doa, 1e-9, 0.5e-9, 5).unwrap();
        assert_eq!(e.timestamps.len(), 5);
        assert!((e.timestamps[4] - 3e-9).abs() < 1e-21);
        e.validate().unwrap();
        assert!(ensemble(&s, &g, &doa, 0.0, 1e-9, 0).unwrap().is_empty());
        assert!(ensemble(&s, &g, &doa, 0.0, 0.0, 3).is_err());
    }

    #[test]
    fn circular_schedule() {
        let g = build_circular(125, 28e9).unwrap();
        let doa = DirectionOfArrival::azimuth(0.0);
        let sched = decimation_schedule(&g, &doa, 2.75e9).unwrap();
        let rate = 1.0 / sched.t_d;
        assert!((rate - 1.38e9).abs() / 1.38e9 < 0.025, "{rate}");
        assert_eq!(sched.ratio.ceil() as usize, subspace_dimension(&g, &doa, 2.75e9));
    }

    #[test]
    fn broadside_schedule_is_degenerate() {
        let g = build_ula(16, 28e9).unwrap();
        let err = decimation_schedule(&g, &DirectionOfArrival::azimuth(FRAC_PI_2), 1e9);
        assert!(matches!(err, Err(Error::DegenerateAperture)));
    }
}
