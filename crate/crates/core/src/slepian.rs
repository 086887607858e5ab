//! Prolate and generalized prolate matrices and the modulated covariance
//! models built from them.
//!
//! Lags are expressed in units of the array's reference lag
//! ([`crate::geometry::reference_lag`]): the mean projected spacing between
//! elements, in seconds. With that unit the half bandwidth becomes
//! `W = Omega * tau_ref` and a half-wavelength ULA has integer lags, so its
//! generalized prolate matrix is exactly the classical prolate matrix with
//! `W = (Omega / 2 f_c) |cos theta|`.
//!
//! The physical snapshot covariance (flat PSD of height `gamma` over
//! `[f_c - Omega, f_c + Omega]`) equals `physical_scale * R` where
//! `physical_scale = 1 / tau_ref`.

use nalgebra::DMatrix;

use crate::geometry::{delays, ArrayGeometry};
use crate::linalg::{hermitian_eigen, symmetric_eigen};
use crate::signal::SourceSpec;
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct ProlateSpec {
    pub normalized_lags: Vec<f64>,
    pub half_bandwidth: f64,
}

impl ProlateSpec {
    /// Lags `0, 1, ..., m - 1`.
    pub fn uniform(half_bandwidth: f64, m: usize) -> Self {
        Self { normalized_lags: (0..m).map(|i| i as f64).collect(), half_bandwidth }
    }

    pub fn len(&self) -> usize {
        self.normalized_lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized_lags.is_empty()
    }

    /// True when consecutive lags differ by exactly one (up to rounding).
    pub fn is_uniform(&self) -> bool {
        self.normalized_lags.windows(2).all(|w| ((w[1] - w[0]) - 1.0).abs() < 1e-9)
    }

    fn validate(&self) -> Result<()> {
        check_bandwidth(self.half_bandwidth)?;
        if self.normalized_lags.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidArgument("lags must be finite".into()));
        }
        Ok(())
    }
}

fn check_bandwidth(w: f64) -> Result<()> {
    if !(0.0..=0.5 + 1e-12).contains(&w) {
        return Err(Error::Domain(format!("half bandwidth W = {w} is outside [0, 1/2]")));
    }
    Ok(())
}

/// `sin(2 pi W x) / (pi x)`, continuous at `x = 0` where it equals `2W`.
pub fn prolate_kernel(w: f64, x: f64) -> f64 {
    let a = 2.0 * std::f64::consts::PI * w * x;
    if a.abs() < 1e-4 {
        let a2 = a * a;
        2.0 * w * (1.0 - a2 / 6.0 * (1.0 - a2 / 20.0))
    } else {
        a.sin() / (std::f64::consts::PI * x)
    }
}

/// Classical `m x m` prolate matrix `B[m,n] = sin(2 pi W (m - n)) / (pi (m - n))`.
pub fn prolate_matrix(w: f64, m: usize) -> Result<DMatrix<f64>> {
    check_bandwidth(w)?;
    if m == 0 {
        return Err(Error::InvalidArgument("prolate matrix needs m >= 1".into()));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| prolate_kernel(w, i as f64 - j as f64)))
}

pub fn generalized_prolate(spec: &ProlateSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let l = &spec.normalized_lags;
    let w = spec.half_bandwidth;
    Ok(DMatrix::from_fn(l.len(), l.len(), |i, j| prolate_kernel(w, l[i] - l[j])))
}

/// How a [`CovarianceModel`] was built from a plane-wave source.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub spec: ProlateSpec,
    /// Diagonal of `E`, `exp(-j 2 pi f_c tau_m)`.
    pub modulation: Vec<C64>,
    pub power: f64,
    pub carrier_hz: f64,
    pub half_bandwidth_hz: f64,
    pub tau_ref_s: f64,
    /// Physical covariance = `physical_scale * R`.
    pub physical_scale: f64,
}

/// Hermitian PSD covariance with an eagerly computed eigendecomposition.
#[derive(Clone, Debug)]
pub struct CovarianceModel {
    r: DMatrix<C64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
    provenance: Option<Provenance>,
}

impl CovarianceModel {
    /// Wraps an arbitrary Hermitian PSD matrix.
    pub fn from_hermitian(r: DMatrix<C64>) -> Result<Self> {
        crate::linalg::check_square(&r)?;
        let scale = r.norm();
        let skew = (&r - r.adjoint()).norm();
        if skew > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument(format!("matrix is not Hermitian (skew {skew:.3e})")));
        }
        let r = crate::linalg::hermitian_part(&r);
        let (mut values, vectors) = hermitian_eigen(&r);
        let top = values.first().copied().unwrap_or(0.0).max(0.0);
        if values.iter().any(|&v| v < -1e-10 * top.max(1e-300)) && top > 0.0 {
            let worst = values.last().copied().unwrap_or(0.0);
            return Err(Error::InvalidArgument(format!("matrix is not PSD (eigenvalue {worst:.3e})")));
        }
        clamp(&mut values);
        Ok(Self { r, eigenvalues: values, eigenvectors: vectors, provenance: None })
    }

    /// `R = gamma * E * B * E^H` for a generalized prolate matrix `B` and
    /// unit-modulus modulation `E`.
    pub fn from_prolate(spec: ProlateSpec, modulation: Vec<C64>, power: f64) -> Result<Self> {
        if modulation.len() != spec.len() {
            return Err(Error::DimensionMismatch { expected: spec.len(), got: modulation.len() });
        }
        let b = generalized_prolate(&spec)?;
        Self::assemble(b, spec, modulation, power, None)
    }

    fn assemble(
        b: DMatrix<f64>,
        spec: ProlateSpec,
        modulation: Vec<C64>,
        power: f64,
        physical: Option<(f64, f64, f64)>,
    ) -> Result<Self> {
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::InvalidArgument(format!("power must be positive, got {power}")));
        }
        let m = b.nrows();
        let e = &modulation;
        let r = DMatrix::from_fn(m, m, |i, j| e[i] * e[j].conj() * (power * b[(i, j)]));
        let (vb, qb) = symmetric_eigen(&b);
        let mut values: Vec<f64> = vb.iter().map(|v| v * power).collect();
        clamp(&mut values);
        let eigenvectors = DMatrix::from_fn(m, m, |i, k| e[i] * qb[(i, k)]);
        let (carrier_hz, half_bandwidth_hz, tau_ref_s) = physical.unwrap_or((0.0, 0.0, 1.0));
        let physical_scale = if half_bandwidth_hz > 0.0 { 1.0 / tau_ref_s } else { 1.0 };
        let provenance = Provenance {
            spec,
            modulation,
            power,
            carrier_hz,
            half_bandwidth_hz,
            tau_ref_s,
            physical_scale,
        };
        Ok(Self { r, eigenvalues: values, eigenvectors, provenance: Some(provenance) })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.r
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    /// Eigenvalues in descending order, clamped at zero.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvectors as columns, ordered like [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    /// First `k` eigenvectors, `V_K` (M x K).
    pub fn leading(&self, k: usize) -> DMatrix<C64> {
        self.eigenvectors.columns(0, k).into_owned()
    }

    /// Remaining eigenvectors, `V_perp` (M x (M - K)).
    pub fn trailing(&self, k: usize) -> DMatrix<C64> {
        self.eigenvectors.columns(k, self.dim() - k).into_owned()
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn trace(&self) -> f64 {
        crate::linalg::trace_re(&self.r)
    }

    /// `sum_{k > K} lambda_k`.
    pub fn tail_energy(&self, k: usize) -> f64 {
        self.eigenvalues.iter().skip(k).sum()
    }

    /// Number of eigenvalues strictly inside `(lo * lambda_1, hi * lambda_1)`.
    pub fn plateau_width(&self, lo: f64, hi: f64) -> usize {
        let top = self.eigenvalues.first().copied().unwrap_or(0.0);
        self.eigenvalues.iter().filter(|&&v| v > lo * top && v < hi * top).count()
    }

    /// `V_K V_K^H`.
    pub fn projector(&self, k: usize) -> DMatrix<C64> {
        let v = self.leading(k);
        &v * v.adjoint()
    }

    /// Sum of two models over the same array (independent sources).
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Self::from_hermitian(&self.r + &other.r)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::InvalidArgument(format!("scale must be nonnegative, got {s}")));
        }
        let mut out = self.clone();
        out.r.scale_mut(s);
        out.eigenvalues.iter_mut().for_each(|v| *v *= s);
        if let Some(p) = out.provenance.as_mut() {
            p.power *= s;
        }
        Ok(out)
    }
}

fn clamp(values: &mut [f64]) {
    values.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Covariance of the snapshots produced by `src` on array `g`.
///
/// A zero-bandwidth source is a pure tone: `R = gamma * v v^H` with
/// `v[m] = exp(-j 2 pi f_c tau_m)`.
pub fn covariance(g: &ArrayGeometry, src: &SourceSpec) -> Result<CovarianceModel> {
    src.validate()?;
    let profile = delays(g, &src.doa);
    let modulation: Vec<C64> = profile
        .delays_s
        .iter()
        .map(|&t| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * src.carrier_hz * t))
        .collect();
    let m = g.len();
    if src.half_bandwidth_hz == 0.0 {
        let spec = ProlateSpec { normalized_lags: profile.normalized_lags, half_bandwidth: 0.0 };
        let ones = DMatrix::from_element(m, m, 1.0);
        let phys = (src.carrier_hz, 0.0, profile.tau_ref_s);
        return CovarianceModel::assemble(ones, spec, modulation, src.power, Some(phys));
    }
    let w = src.half_bandwidth_hz * profile.tau_ref_s;
    if w > 0.5 + 1e-12 {
        return Err(Error::Domain(format!(
            "induced half bandwidth W = {w:.4} exceeds 1/2: the array aliases this band"
        )));
    }
    let spec = ProlateSpec { normalized_lags: profile.normalized_lags, half_bandwidth: w.min(0.5) };
    let b = generalized_prolate(&spec)?;
    let phys = (src.carrier_hz, src.half_bandwidth_hz, profile.tau_ref_s);
    CovarianceModel::assemble(b, spec, modulation, src.power, Some(phys))
}

/// Dense `R` for `src` on `g` without the eigendecomposition, for callers
/// that only need matrix products (interference sweeps, for example).
pub fn covariance_matrix(g: &ArrayGeometry, src: &SourceSpec) -> Result<DMatrix<C64>> {
    src.validate()?;
    let profile = delays(g, &src.doa);
    let e: Vec<C64> = profile
        .delays_s
        .iter()
        .map(|&t| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * src.carrier_hz * t))
        .collect();
    let m = g.len();
    let lags = &profile.normalized_lags;
    let w = src.half_bandwidth_hz * profile.tau_ref_s;
    if w > 0.5 + 1e-12 {
        return Err(Error::Domain(format!(
            "induced half bandwidth W = {w:.4} exceeds 1/2: the array aliases this band"
        )));
    }
    let kernel = |i: usize, j: usize| if w == 0.0 { 1.0 } else { prolate_kernel(w, lags[i] - lags[j]) };
    Ok(DMatrix::from_fn(m, m, |i, j| e[i] * e[j].conj() * (src.power * kernel(i, j))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_ula, DirectionOfArrival};
    use std::f64::consts::PI;

    #[test]
    fn half_band_is_identity() {
        let b = prolate_matrix(0.5, 9).unwrap();
        assert!((b - DMatrix::identity(9, 9)).amax() < 1e-15);
    }

    #[test]
    fn zero_band_is_zero() {
        assert_eq!(prolate_matrix(0.0, 5).unwrap().amax(), 0.0);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(prolate_matrix(0.6, 4), Err(Error::Domain(_))));
        assert!(matches!(prolate_matrix(-0.1, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn quarter_band_four_by_four() {
        // Tabulated by hand: sin(pi k / 2) / (pi k) for k = 1, 2, 3.
        let k1 = 1.0 / PI;
        let k3 = -1.0 / (3.0 * PI);
        let rows = [
            [0.5, k1, 0.0, k3],
            [k1, 0.5, k1, 0.0],
            [0.0, k1, 0.5, k1],
            [k3, 0.0, k1, 0.5],
        ];
        let b = prolate_matrix(0.25, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((b[(i, j)] - rows[i][j]).abs() < 1e-15);
            }
        }
        assert!((b.trace() - 2.0).abs() < 1e-15);
        let oracle = nalgebra::DMatrix::from_fn(4, 4, |i, j| rows[i][j]);
        let mut expect: Vec<f64> = oracle.symmetric_eigenvalues().iter().copied().collect();
        expect.sort_by(|a, b| b.total_cmp(a));
        let got = symmetric_eigen(&b).0;
        for (a, e) in got.iter().zip(&expect) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn generalized_reduces_to_classical() {
        let spec = ProlateSpec::uniform(0.3, 12);
        assert_eq!(generalized_prolate(&spec).unwrap(), prolate_matrix(0.3, 12).unwrap());
    }

    #[test]
    fn duplicate_lags_give_rank_one_block() {
        let spec = ProlateSpec { normalized_lags: vec![1.5, 1.5, 4.0], half_bandwidth: 0.2 };
        let b = generalized_prolate(&spec).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(b[(i, j)], 0.4);
            }
        }
    }

    #[test]
    fn zero_bandwidth_tone_is_rank_one() {
        let g = build_ula(8, 28e9).unwrap();
        let src = SourceSpec::new(28e9, 0.0, 2.0, DirectionOfArrival::azimuth(0.4));
        let model = covariance(&g, &src).unwrap();
        let ev = model.eigenvalues();
        assert!((ev[0] - 16.0).abs() < 1e-10);
        assert!(ev[1..].iter().all(|&v| v < 1e-10));
        let p = delays(&g, &src.doa);
        for i in 0..8 {
            for j in 0..8 {
                let v = |t: f64| C64::from_polar(1.0, -2.0 * PI * 28e9 * t);
                let expect = v(p.delays_s[i]) * v(p.delays_s[j]).conj() * 2.0;
                assert!((model.matrix()[(i, j)] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn aliasing_is_a_domain_error() {
        // Half-wavelength spacing for 28 GHz cannot hold a band reaching past 2 f_c.
        let g = build_ula(8, 28e9).unwrap();
        let src = SourceSpec::new(28e9, 30e9, 1.0, DirectionOfArrival::azimuth(0.0));
        assert!(matches!(covariance(&g, &src), Err(Error::Domain(_))));
    }

    #[test]
    fn ula_covariance_matches_classical_prolate() {
        let g = build_ula(32, 120e9).unwrap();
        let src = SourceSpec::new(120e9, 12.6e9, 1.5, DirectionOfArrival::azimuth(PI / 6.0));
        let model = covariance(&g, &src).unwrap();
        let w = 12.6e9 / (2.0 * 120e9) * (PI / 6.0).cos();
        let p = model.provenance().unwrap();
        assert!((p.spec.half_bandwidth - w).abs() < 1e-12);
        let b = prolate_matrix(w, 32).unwrap();
        let (vb, _) = symmetric_eigen(&b);
        for (a, e) in model.eigenvalues().iter().zip(&vb) {
            assert!((a - 1.5 * e.max(0.0)).abs() < 1e-12);
        }
        assert!((model.trace() - 1.5 * 2.0 * w * 32.0).abs() < 1e-9 * model.trace());
    }

    #[test]
    fn eigenvectors_diagonalize() {
        let g = build_ula(16, 28e9).unwrap();
        let src = SourceSpec::new(28e9, 3e9, 1.0, DirectionOfArrival::azimuth(0.2));
        let model = covariance(&g, &src).unwrap();
        let v = model.eigenvectors();
        let d = v.adjoint() * model.matrix() * v;
        for i in 0..16 {
            for j in 0..16 {
                let expect = if i == j { model.eigenvalues()[i] } else { 0.0 };
                assert!((d[(i, j)].re - expect).abs() < 1e-12 && d[(i, j)].im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tail_and_plateau_edges() {
        let model = CovarianceModel::from_prolate(ProlateSpec::uniform(0.5, 6), vec![C64::new(1.0, 0.0); 6], 1.0)
            .unwrap();
        assert_eq!(model.tail_energy(6), 0.0);
        assert!((model.tail_energy(0) - model.trace()).abs() < 1e-12);
        assert_eq!(model.plateau_width(0.01, 0.99), 0);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut r = DMatrix::<C64>::identity(3, 3);
        r[(0, 1)] = C64::new(0.0, 1.0);
        assert!(CovarianceModel::from_hermitian(r).is_err());
    }
}
