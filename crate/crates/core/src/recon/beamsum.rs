//! Beamforming outputs used as references and baselines.

use std::ops::Range;

use crate::geometry::{delays, ArrayGeometry, DirectionOfArrival};
use crate::signal::{complex_normal, SnapshotEnsemble, SyntheticSignal};
use crate::{Error, Result, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct BeamsumOutput {
    pub times: Vec<f64>,
    pub values: Vec<C64>,
    /// Indices unaffected by filter edge effects.
    pub interior: Range<usize>,
}

/// Kaiser-windowed sinc interpolator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FractionalDelayFilter {
    pub half_length: usize,
    pub beta: f64,
}

impl Default for FractionalDelayFilter {
    fn default() -> Self {
        Self { half_length: 32, beta: 8.0 }
    }
}

/// Zeroth-order modified Bessel function of the first kind.
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

impl FractionalDelayFilter {
    fn tap(&self, u: f64) -> f64 {
        let l = self.half_length as f64;
        if u.abs() >= l {
            return 0.0;
        }
        let r = u / l;
        let window = bessel_i0(self.beta * (1.0 - r * r).sqrt()) / bessel_i0(self.beta);
        super::cgd::sinc(u) * window
    }

    /// Value of the uniformly sampled stream `x` (period `dt`, starting at
    /// `t0`) at time `t`.
    pub fn interpolate(&self, x: &[C64], t0: f64, dt: f64, t: f64) -> C64 {
        let pos = (t - t0) / dt;
        let center = pos.floor() as i64;
        let l = self.half_length as i64;
        let mut acc = C64::new(0.0, 0.0);
        for n in (center - l + 1)..=(center + l) {
            if n < 0 || n as usize >= x.len() {
                continue;
            }
            acc += x[n as usize] * self.tap(pos - n as f64);
        }
        acc
    }
}

fn phasor(f: f64, t: f64) -> C64 {
    let cycles = f * t;
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (cycles - cycles.round()))
}

fn uniform_period(e: &SnapshotEnsemble) -> Result<f64> {
    e.validate()?;
    if e.len() < 2 {
        return Err(Error::InvalidArgument("beamsum needs at least two snapshots".into()));
    }
    let dt = e.timestamps[1] - e.timestamps[0];
    for w in e.timestamps.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(Error::InvalidArgument("snapshot timestamps are not uniform".into()));
        }
    }
    Ok(dt)
}

/// `(1/M) sum_m y_m(t + tau_m)` with each element stream delayed by a
/// fractional-delay filter at complex baseband.
pub fn fractional_delay_beamsum(
    e: &SnapshotEnsemble,
    delays_s: &[f64],
    carrier_hz: f64,
    filter: &FractionalDelayFilter,
) -> Result<BeamsumOutput> {
    let dt = uniform_period(e)?;
    let m = e.elements();
    if delays_s.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: delays_s.len() });
    }
    let t0 = e.timestamps[0];
    let mut values = vec![C64::new(0.0, 0.0); e.len()];
    for (mi, &tau) in delays_s.iter().enumerate() {
        let stream: Vec<C64> = e
            .timestamps
            .iter()
            .zip(&e.samples)
            .map(|(&t, y)| y[mi] * phasor(carrier_hz, t).conj())
            .collect();
        let realign = phasor(carrier_hz, tau);
        for (k, &t) in e.timestamps.iter().enumerate() {
            values[k] += filter.interpolate(&stream, t0, dt, t + tau) * realign * phasor(carrier_hz, t);
        }
    }
    let scale = 1.0 / m as f64;
    values.iter_mut().for_each(|v| *v *= scale);
    let max_shift = delays_s.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let guard = filter.half_length + (max_shift / dt).ceil() as usize;
    let interior = guard.min(e.len())..e.len().saturating_sub(guard).max(guard.min(e.len()));
    Ok(BeamsumOutput { times: e.timestamps.clone(), values, interior })
}

/// Exact delay-and-sum output `(1/M) sum_m y_m(t + tau_m) = s(t)` evaluated
/// from the tone representation.
pub fn true_time_delay_reference(sig: &SyntheticSignal, times: &[f64]) -> Vec<C64> {
    times.iter().map(|&t| sig.evaluate(t)).collect()
}

/// Delay-and-sum with independent `CN(0, sigma2)` noise on every element:
/// `(1/M) sum_m (s(t) + eta_m(t))`.
pub fn true_time_delay_noisy(
    sig: &SyntheticSignal,
    g: &ArrayGeometry,
    times: &[f64],
    sigma2: f64,
    seed: u64,
) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = g.len();
    times
        .iter()
        .map(|&t| {
            let s = sig.evaluate(t);
            let noise: C64 = (0..m).map(|_| complex_normal(&mut rng, sigma2)).sum();
            s + noise / m as f64
        })
        .collect()
}

/// Phase-shift beamformer `(1/M) sum_m exp(j 2 pi f_c tau_m) y_m(t)`.
pub fn narrowband_beamsum(
    e: &SnapshotEnsemble,
    g: &ArrayGeometry,
    doa: &DirectionOfArrival,
    carrier_hz: f64,
) -> Result<Vec<C64>> {
    e.validate()?;
    let tau = delays(g, doa).delays_s;
    if e.elements() != tau.len() && !e.is_empty() {
        return Err(Error::DimensionMismatch { expected: tau.len(), got: e.elements() });
    }
    let weights: Vec<C64> = tau.iter().map(|&t| phasor(carrier_hz, t)).collect();
    let scale = 1.0 / tau.len() as f64;
    Ok(e.samples.iter().map(|y| y.iter().zip(&weights).map(|(v, w)| v * w).sum::<C64>() * scale).collect())
}

/// `||a - b||^2 / ||b||^2` over `range`, the energy-normalized error.
pub fn normalized_mse(estimate: &[C64], truth: &[C64], range: Range<usize>) -> f64 {
    normalized_error(estimate, truth, range).powi(2)
}

/// `||a - b|| / ||b||` over `range`.
pub fn normalized_error(estimate: &[C64], truth: &[C64], range: Range<usize>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in range {
        num += (estimate[i] - truth[i]).norm_sqr();
        den += truth[i].norm_sqr();
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_ula;
    use crate::signal::{ensemble, synthesize, SourceSpec};

    #[test]
    fn bessel_reference_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        // I0(1) and I0(8) from standard tables.
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(8.0) - 427.564_115_721_804_74).abs() < 1e-9);
    }

    #[test]
    fn zero_delay_is_plain_average() {
        let g = build_ula(4, 28e9).unwrap();
        let doa = DirectionOfArrival::azimuth(0.0);
        let sig = synthesize(&SourceSpec::new(28e9, 1e9, 1.0, doa), 16, 3).unwrap();
        let e = ensemble(&sig, &g, &doa, 0.0, 0.25e-9, 80).unwrap();
        let out = fractional_delay_beamsum(&e, &[0.0; 4], 28e9, &FractionalDelayFilter::default()).unwrap();
        for (k, v) in out.values.iter().enumerate() {
            let avg: C64 = e.samples[k].iter().sum::<C64>() / 4.0;
            assert!((v - avg).norm() < 1e-12 * (1.0 + avg.norm()));
        }
    }

    #[test]
    fn narrowband_recovers_carrier_tone() {
        let g = build_ula(16, 28e9).unwrap();
        let doa = DirectionOfArrival::azimuth(0.4);
        let sig = SyntheticSignal { frequencies_hz: vec![28e9], amplitudes: vec![C64::new(0.7, 0.2)] };
        let e = ensemble(&sig, &g, &doa, 0.0, 1e-10, 20).unwrap();
        let out = narrowband_beamsum(&e, &g, &doa, 28e9).unwrap();
        let truth = true_time_delay_reference(&sig, &e.timestamps);
        assert!(normalized_error(&out, &truth, 0..20) < 1e-12);
    }

    #[test]
    fn single_element_narrowband_is_identity() {
        let g = build_ula(1, 28e9).unwrap();
        let doa = DirectionOfArrival::azimuth(0.0);
        let sig = synthesize(&SourceSpec::new(28e9, 1e9, 1.0, doa), 8, 1).unwrap();
        let e = ensemble(&sig, &g, &doa, 0.0, 1e-10, 5).unwrap();
        let out = narrowband_beamsum(&e, &g, &doa, 28e9).unwrap();
        for (o, y) in out.iter().zip(&e.samples) {
            assert!((o - y[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn tone_is_aligned_by_fractional_delays() {
        let g = build_ula(8, 28e9).unwrap();
        let doa = DirectionOfArrival::azimuth(0.3);
        let sig = SyntheticSignal { frequencies_hz: vec![28.4e9], amplitudes: vec![C64::new(1.0, 0.0)] };
        let e = ensemble(&sig, &g, &doa, 0.0, 1.0 / (4.0 * 1e9), 200).unwrap();
        let tau = delays(&g, &doa).delays_s;
        let out = fractional_delay_beamsum(&e, &tau, 28e9, &FractionalDelayFilter::default()).unwrap();
        let truth = true_time_delay_reference(&sig, &out.times);
        assert!(normalized_error(&out.values, &truth, out.interior.clone()) < 1e-3);
        assert!(!out.interior.is_empty());
    }
}
