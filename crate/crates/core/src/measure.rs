//! Measurement matrices for compressive array readout, `w = Phi y + eta`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::DelayProfile;
use crate::linalg::{inverse_condition, spectral_norm};
use crate::signal::{complex_normal, complex_normal_vector};
use crate::slepian::CovarianceModel;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementFamily {
    Slepian,
    Unimodular,
    RandomGaussian,
    BinaryIq,
}

impl MeasurementFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Slepian => "slepian",
            Self::Unimodular => "unimodular",
            Self::RandomGaussian => "random_gaussian",
            Self::BinaryIq => "binary_iq",
        }
    }
}

/// Scaling applied on top of the stored entries. The matrix used for
/// readout and MSE evaluation is `scale * phi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormPolicy {
    pub scale: f64,
    /// True when `scale` was chosen to make the spectral norm one.
    pub spectral_unit: bool,
}

impl NormPolicy {
    pub const RAW: Self = Self { scale: 1.0, spectral_unit: false };
}

#[derive(Clone, Debug)]
pub struct MeasurementMatrix {
    /// Stored entries (`K x M`). For binary-IQ these are exactly
    /// `{1, -1, j, -j}`.
    pub phi: DMatrix<C64>,
    pub family: MeasurementFamily,
    pub norm_policy: NormPolicy,
    /// Conditioning notes raised during construction.
    pub warnings: Vec<String>,
}

impl MeasurementMatrix {
    pub fn k(&self) -> usize {
        self.phi.nrows()
    }

    pub fn m(&self) -> usize {
        self.phi.ncols()
    }

    /// `scale * phi`.
    pub fn effective(&self) -> DMatrix<C64> {
        if self.norm_policy.scale == 1.0 {
            self.phi.clone()
        } else {
            self.phi.scale(self.norm_policy.scale)
        }
    }

    /// Copy rescaled to unit spectral norm.
    pub fn normalized(&self) -> Self {
        let n = spectral_norm(&self.phi);
        let mut out = self.clone();
        if n > 0.0 {
            out.norm_policy = NormPolicy { scale: 1.0 / n, spectral_unit: true };
        }
        out
    }

    /// Binary-IQ matrix from exact alphabet entries, normalized to unit
    /// spectral norm.
    pub fn binary_iq(phi: DMatrix<C64>) -> Result<Self> {
        if let Some(z) = phi.iter().find(|z| !is_alphabet(z)) {
            return Err(Error::InvalidArgument(format!("entry {z} is not in {{1, -1, j, -j}}")));
        }
        Ok(Self { phi, family: MeasurementFamily::BinaryIq, norm_policy: NormPolicy::RAW, warnings: vec![] }
            .normalized())
    }
}

pub fn is_alphabet(z: &C64) -> bool {
    let (re, im) = (z.re, z.im);
    (im == 0.0 && (re == 1.0 || re == -1.0)) || (re == 0.0 && (im == 1.0 || im == -1.0))
}

/// `Phi = V_K^H`.
pub fn slepian_measurements(model: &CovarianceModel, k: usize) -> Result<MeasurementMatrix> {
    if k == 0 || k > model.dim() {
        return Err(Error::InvalidArgument(format!("K = {k} outside 1..={}", model.dim())));
    }
    Ok(MeasurementMatrix {
        phi: model.leading(k).adjoint(),
        family: MeasurementFamily::Slepian,
        norm_policy: NormPolicy::RAW,
        warnings: vec![],
    })
}

/// `K` frequencies at the centers of `K` equal cells spanning
/// `[f_c - Omega, f_c + Omega]`.
pub fn default_frequency_grid(carrier_hz: f64, half_bandwidth_hz: f64, k: usize) -> Vec<f64> {
    let width = 2.0 * half_bandwidth_hz / k as f64;
    (0..k).map(|i| carrier_hz - half_bandwidth_hz + (i as f64 + 0.5) * width).collect()
}

/// `Phi[k, m] = exp(j 2 pi f_k tau_m)`, optionally scaled to unit spectral norm.
pub fn unimodular_measurements(freqs_hz: &[f64], profile: &DelayProfile, normalize: bool) -> Result<MeasurementMatrix> {
    if freqs_hz.is_empty() {
        return Err(Error::InvalidArgument("need at least one frequency".into()));
    }
    let tau = &profile.delays_s;
    let phi = DMatrix::from_fn(freqs_hz.len(), tau.len(), |k, m| {
        let cycles = freqs_hz[k] * tau[m];
        C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (cycles - cycles.round()))
    });
    let mut warnings = vec![];
    if phi.nrows() <= phi.ncols() {
        let rc = inverse_condition(&phi);
        if rc < 1e-8 {
            warnings.push(format!("unimodular rows are nearly dependent (inverse condition {rc:.2e})"));
        }
    }
    let out = MeasurementMatrix { phi, family: MeasurementFamily::Unimodular, norm_policy: NormPolicy::RAW, warnings };
    Ok(if normalize { out.normalized() } else { out })
}

/// I.i.d. `CN(0, 1)` entries.
pub fn random_measurements(k: usize, m: usize, seed: u64, normalize: bool) -> Result<MeasurementMatrix> {
    if k == 0 || m == 0 {
        return Err(Error::InvalidArgument("random measurements need K, M >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(k * m);
    for _ in 0..k * m {
        data.push(complex_normal(&mut rng, 1.0));
    }
    let phi = DMatrix::from_row_iterator(k, m, data);
    let out =
        MeasurementMatrix { phi, family: MeasurementFamily::RandomGaussian, norm_policy: NormPolicy::RAW, warnings: vec![] };
    Ok(if normalize { out.normalized() } else { out })
}

/// `w = Phi y + eta` with `eta ~ CN(0, sigma2 I)`.
pub fn apply_readout(phi: &MeasurementMatrix, y: &DVector<C64>, sigma2: f64, seed: u64) -> Result<DVector<C64>> {
    readout(&phi.effective(), y, sigma2, seed)
}

pub fn readout(phi: &DMatrix<C64>, y: &DVector<C64>, sigma2: f64, seed: u64) -> Result<DVector<C64>> {
    if y.len() != phi.ncols() {
        return Err(Error::DimensionMismatch { expected: phi.ncols(), got: y.len() });
    }
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance must be nonnegative, got {sigma2}")));
    }
    let mut w = phi * y;
    if sigma2 > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        w += complex_normal_vector(&mut rng, phi.nrows(), sigma2);
    }
    Ok(w)
}
