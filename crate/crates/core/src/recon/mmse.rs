//! Closed-form MMSE estimation `y_hat = R Phi^H (Phi R Phi^H + sigma2 I)^{-1} w`
//! and its mean-square error.
//!
//! With `sigma2 > 0` the system is positive definite and solved by
//! Cholesky. With `sigma2 = 0` it is only semidefinite whenever `R` is
//! rank-deficient along the measured directions; as long as `Phi` itself
//! has full row rank the noise-free readout lies in the range of
//! `Phi R Phi^H`, and the conditional mean is computed on that range.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::{inverse_condition, PsdSolver};
use crate::measure::MeasurementFamily;
use crate::signal::{complex_normal_vector, gaussian_snapshot};
use crate::slepian::CovarianceModel;
use crate::{Error, Result, C64};

/// Rows of `Phi` closer than this (smallest to largest singular value) to
/// dependent make the noise-free problem ill-posed.
pub const PHI_RANK_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mse {
    pub raw: f64,
    /// `raw / trace(R_signal)`.
    pub normalized: f64,
}

#[derive(Clone, Debug)]
pub struct ReconstructionReport {
    pub estimate: DVector<C64>,
    pub mse: Mse,
    pub empirical_mse: Option<f64>,
    pub k: usize,
    pub family: Option<MeasurementFamily>,
    pub sigma2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

pub(crate) fn check_inputs(phi: &DMatrix<C64>, m: usize, sigma2: f64) -> Result<()> {
    if phi.ncols() != m {
        return Err(Error::DimensionMismatch { expected: m, got: phi.ncols() });
    }
    if phi.nrows() == 0 {
        return Err(Error::InvalidArgument("measurement matrix has no rows".into()));
    }
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance must be nonnegative, got {sigma2}")));
    }
    if sigma2 == 0.0 && inverse_condition(phi) < PHI_RANK_TOL {
        return Err(Error::Singular("noise-free readout with rank-deficient Phi".into()));
    }
    Ok(())
}

/// Solver for `Phi R_total Phi^H + sigma2 I`.
pub(crate) fn system(phi: &DMatrix<C64>, r_total: &DMatrix<C64>, sigma2: f64) -> PsdSolver {
    let mut s = phi * r_total * phi.adjoint();
    s = (&s + s.adjoint()).scale(0.5);
    for i in 0..s.nrows() {
        s[(i, i)] += C64::new(sigma2, 0.0);
    }
    PsdSolver::new(&s)
}

/// Conditional-mean gain `G = R_sig Phi^H S^{-1}` and the MSE
/// `trace(R_sig) - trace(Phi R_sig)^H S^{-1} (Phi R_sig))`.
pub(crate) fn gain_and_mse(
    phi: &DMatrix<C64>,
    r_signal: &DMatrix<C64>,
    r_total: &DMatrix<C64>,
    sigma2: f64,
) -> Result<(DMatrix<C64>, Mse)> {
    check_inputs(phi, r_signal.nrows(), sigma2)?;
    let solver = system(phi, r_total, sigma2);
    let x = phi * r_signal;
    let y = solver.solve(&x);
    let explained: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a.conj() * b).re).sum();
    let trace = crate::linalg::trace_re(r_signal);
    let raw = (trace - explained).max(0.0);
    let normalized = if trace > 0.0 { raw / trace } else { 0.0 };
    Ok((y.adjoint(), Mse { raw, normalized }))
}

pub fn mmse_estimate(phi: &DMatrix<C64>, model: &CovarianceModel, sigma2: f64, w: &DVector<C64>) -> Result<DVector<C64>> {
    MmseReconstructor::new(phi, model.matrix(), sigma2)?.estimate(w)
}

pub fn mse_closed_form(phi: &DMatrix<C64>, model: &CovarianceModel, sigma2: f64) -> Result<Mse> {
    Ok(gain_and_mse(phi, model.matrix(), model.matrix(), sigma2)?.1)
}

/// Precomputed `M x K` gain for repeated reconstruction.
#[derive(Clone, Debug)]
pub struct MmseReconstructor {
    gain: DMatrix<C64>,
    mse: Mse,
}

impl MmseReconstructor {
    pub fn new(phi: &DMatrix<C64>, r: &DMatrix<C64>, sigma2: f64) -> Result<Self> {
        let (gain, mse) = gain_and_mse(phi, r, r, sigma2)?;
        Ok(Self { gain, mse })
    }

    /// Estimator of the signal part when the readout also sees
    /// independent interference with covariance `r_interference`.
    pub fn with_interference(
        phi: &DMatrix<C64>,
        r_signal: &DMatrix<C64>,
        r_interference: &DMatrix<C64>,
        sigma2: f64,
    ) -> Result<Self> {
        let total = r_signal + r_interference;
        let (gain, mse) = gain_and_mse(phi, r_signal, &total, sigma2)?;
        Ok(Self { gain, mse })
    }

    pub fn gain(&self) -> &DMatrix<C64> {
        &self.gain
    }

    pub fn mse(&self) -> Mse {
        self.mse
    }

    pub fn estimate(&self, w: &DVector<C64>) -> Result<DVector<C64>> {
        if w.len() != self.gain.ncols() {
            return Err(Error::DimensionMismatch { expected: self.gain.ncols(), got: w.len() });
        }
        Ok(&self.gain * w)
    }
}

/// Monte Carlo estimate of `E ||y_hat - y||^2` over exact Gaussian draws
/// `y ~ CN(0, R)` and fresh noise.
pub fn mc_mse(phi: &DMatrix<C64>, model: &CovarianceModel, sigma2: f64, trials: usize, seed: u64) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let rec = MmseReconstructor::new(phi, model.matrix(), sigma2)?;
    // Fixed-size chunks with their own seeds keep the result independent of
    // the thread count.
    const CHUNK: usize = 1024;
    let chunks = trials.div_ceil(CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(trials - c * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let y = gaussian_snapshot(model, &mut rng);
                let mut w = phi * &y;
                if sigma2 > 0.0 {
                    w += complex_normal_vector(&mut rng, phi.nrows(), sigma2);
                }
                let e = (&rec.gain * w - y).norm_squared();
                s += e;
                s2 += e * e;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = trials as f64;
    let mean = s / n;
    let var = if trials > 1 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { mean, std_error: (var / n).sqrt(), trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_ula, DirectionOfArrival};
    use crate::measure::{random_measurements, slepian_measurements};
    use crate::signal::SourceSpec;
    use crate::slepian::covariance;

    fn model(m: usize) -> CovarianceModel {
        let g = build_ula(m, 28e9).unwrap();
        covariance(&g, &SourceSpec::new(28e9, 3e9, 1.0, DirectionOfArrival::azimuth(0.0))).unwrap()
    }

    #[test]
    fn subspace_vector_is_recovered() {
        let r = model(16);
        let phi = slepian_measurements(&r, 3).unwrap().phi;
        let coeffs = DVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.1), C64::new(0.3, 0.0)]);
        let y0 = r.leading(3) * coeffs;
        let w = &phi * &y0;
        let y = mmse_estimate(&phi, &r, 0.0, &w).unwrap();
        assert!((y - y0).norm() < 1e-8);
    }

    #[test]
    fn zero_readout_gives_zero() {
        let r = model(8);
        let phi = random_measurements(3, 8, 1, true).unwrap().effective();
        let y = mmse_estimate(&phi, &r, 0.1, &DVector::zeros(3)).unwrap();
        assert_eq!(y.norm(), 0.0);
    }

    #[test]
    fn full_identity_has_zero_error() {
        let r = model(8);
        let eye = DMatrix::<C64>::identity(8, 8);
        assert!(mse_closed_form(&eye, &r, 0.0).unwrap().raw < 1e-12);
    }

    #[test]
    fn slepian_mse_is_tail() {
        let r = model(32);
        for k in [1, 4, 7, 12] {
            let phi = slepian_measurements(&r, k).unwrap().phi;
            let mse = mse_closed_form(&phi, &r, 0.0).unwrap();
            assert!((mse.raw - r.tail_energy(k)).abs() < 1e-10 * r.trace());
        }
    }

    #[test]
    fn huge_noise_approaches_trace() {
        let r = model(8);
        let phi = random_measurements(4, 8, 3, true).unwrap().effective();
        let mse = mse_closed_form(&phi, &r, 1e12).unwrap();
        assert!((mse.normalized - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rank_deficient_phi_is_singular_without_noise() {
        let r = model(8);
        let mut phi = random_measurements(2, 8, 3, true).unwrap().effective();
        let row = phi.row(0).into_owned();
        phi.row_mut(1).copy_from(&row);
        assert!(matches!(mse_closed_form(&phi, &r, 0.0), Err(Error::Singular(_))));
        assert!(mse_closed_form(&phi, &r, 0.1).is_ok());
    }

    #[test]
    fn mc_is_deterministic() {
        let r = model(8);
        let phi = random_measurements(3, 8, 3, true).unwrap().effective();
        let a = mc_mse(&phi, &r, 0.01, 500, 9).unwrap();
        let b = mc_mse(&phi, &r, 0.01, 500, 9).unwrap();
        assert_eq!(a, b);
    }
}
