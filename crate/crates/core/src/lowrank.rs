//! Low-rank factorization `R ~ C U^H` whose leading block is a set of
//! modulated DFT columns, applied with FFTs when the lags are uniform.
//!
//! With `Q_F` the orthonormal Fourier block and `P = Q_F Q_F^H`,
//! `R = P R P + D` where `D = R - P R P` is Hermitian and numerically low
//! rank. `D` is compressed with a randomized range finder and a small
//! Hermitian eigendecomposition, and the kept part is `L_D diag(mu) L_D^H`:
//!
//! ```text
//! C = [Q_F, L_D]     U = [Q_F A, L_D diag(mu)]     A = Q_F^H R Q_F
//! ```
//!
//! The spectral error is the largest discarded part of `D`, and it is
//! measured after construction.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::linalg::{hermitian_eigen, hermitian_part};
use crate::signal::complex_normal_vector;
use crate::slepian::{CovarianceModel, ProlateSpec};
use crate::{Error, Result, C64};

const BLOCK: usize = 8;
const DENSE_CHECK_LIMIT: usize = 384;
const RANGE_SEED: u64 = 0x5eed_f00d;

#[derive(Clone)]
enum FourierBlock {
    /// Columns `E[m] exp(j 2 pi k (l0 + m) / M) / sqrt(M)` for integer `k`.
    Uniform {
        modulation: Vec<C64>,
        freqs: Vec<i64>,
        l0: f64,
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
    Dense,
}

#[derive(Clone)]
pub struct LowRankFactor {
    m: usize,
    fourier: FourierBlock,
    q_f: DMatrix<C64>,
    a: DMatrix<C64>,
    l_d: DMatrix<C64>,
    mu: Vec<f64>,
    epsilon: f64,
}

impl std::fmt::Debug for LowRankFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LowRankFactor")
            .field("m", &self.m)
            .field("rank", &self.rank())
            .field("fourier_column_count", &self.fourier_column_count())
            .field("epsilon", &self.epsilon)
            .finish()
    }
}

impl LowRankFactor {
    /// Factor a covariance model to spectral error `eps`.
    pub fn new(model: &CovarianceModel, eps: f64) -> Result<Self> {
        match model.provenance() {
            Some(p) if p.spec.half_bandwidth > 0.0 => build(model.matrix(), Some((&p.spec, &p.modulation)), eps),
            _ => build(model.matrix(), None, eps),
        }
    }

    /// Factor `gamma E B E^H` directly, without the eigendecomposition a
    /// [`CovarianceModel`] carries.
    pub fn from_prolate(spec: &ProlateSpec, modulation: &[C64], power: f64, eps: f64) -> Result<Self> {
        let r = dense_prolate_covariance(spec, modulation, power)?;
        build(&r, Some((spec, modulation)), eps)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// Number of columns of `C`.
    pub fn rank(&self) -> usize {
        self.q_f.ncols() + self.l_d.ncols()
    }

    pub fn fourier_column_count(&self) -> usize {
        self.q_f.ncols()
    }

    /// Measured `||R - C U^H||_2`.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn uses_fft(&self) -> bool {
        matches!(self.fourier, FourierBlock::Uniform { .. })
    }

    /// `C` as a dense `M x K` matrix.
    pub fn c(&self) -> DMatrix<C64> {
        concat_columns(&self.q_f, &self.l_d)
    }

    /// `U` as a dense `M x K` matrix.
    pub fn u(&self) -> DMatrix<C64> {
        let mut l = self.l_d.clone();
        for (j, &mu) in self.mu.iter().enumerate() {
            l.column_mut(j).scale_mut(mu);
        }
        concat_columns(&(&self.q_f * &self.a), &l)
    }

    /// `C x` for `x` of length K.
    pub fn apply_columns(&self, x: &DVector<C64>) -> Result<DVector<C64>> {
        if x.len() != self.rank() {
            return Err(Error::DimensionMismatch { expected: self.rank(), got: x.len() });
        }
        let l = self.q_f.ncols();
        let mut y = self.fourier_apply(&x.rows(0, l).into_owned());
        if !self.mu.is_empty() {
            y += &self.l_d * x.rows(l, self.mu.len());
        }
        Ok(y)
    }

    /// `C U^H x` for `x` of length M.
    pub fn apply(&self, x: &DVector<C64>) -> Result<DVector<C64>> {
        if x.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: x.len() });
        }
        let coeffs = &self.a * self.fourier_adjoint(x);
        let mut y = self.fourier_apply(&coeffs);
        if !self.mu.is_empty() {
            let mut z = self.l_d.adjoint() * x;
            for (zi, mu) in z.iter_mut().zip(&self.mu) {
                *zi *= *mu;
            }
            y += &self.l_d * z;
        }
        Ok(y)
    }

    fn fourier_apply(&self, x: &DVector<C64>) -> DVector<C64> {
        match &self.fourier {
            FourierBlock::Uniform { modulation, freqs, l0, inverse, .. } if !freqs.is_empty() => {
                let m = self.m;
                let mut buf = vec![C64::new(0.0, 0.0); m];
                for (&k, &xk) in freqs.iter().zip(x.iter()) {
                    buf[k.rem_euclid(m as i64) as usize] += xk * shift(k, *l0, m);
                }
                inverse.process(&mut buf);
                let s = 1.0 / (m as f64).sqrt();
                DVector::from_iterator(m, buf.iter().zip(modulation).map(|(b, e)| e * b * s))
            }
            _ => &self.q_f * x,
        }
    }

    fn fourier_adjoint(&self, x: &DVector<C64>) -> DVector<C64> {
        match &self.fourier {
            FourierBlock::Uniform { modulation, freqs, l0, forward, .. } if !freqs.is_empty() => {
                let m = self.m;
                let mut buf: Vec<C64> = x.iter().zip(modulation).map(|(v, e)| e.conj() * v).collect();
                forward.process(&mut buf);
                let s = 1.0 / (m as f64).sqrt();
                DVector::from_iterator(
                    freqs.len(),
                    freqs.iter().map(|&k| buf[k.rem_euclid(m as i64) as usize] * shift(k, *l0, m).conj() * s),
                )
            }
            _ => self.q_f.adjoint() * x,
        }
    }
}

fn shift(k: i64, l0: f64, m: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * l0 / m as f64)
}

fn concat_columns(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Dense `gamma E B E^H`.
pub fn dense_prolate_covariance(spec: &ProlateSpec, modulation: &[C64], power: f64) -> Result<DMatrix<C64>> {
    if modulation.len() != spec.len() {
        return Err(Error::DimensionMismatch { expected: spec.len(), got: modulation.len() });
    }
    let b = crate::slepian::generalized_prolate(spec)?;
    let m = spec.len();
    Ok(DMatrix::from_fn(m, m, |i, j| modulation[i] * modulation[j].conj() * (power * b[(i, j)])))
}

/// Centered integer DFT frequencies covering `|nu| <= W`.
fn band_frequencies(w: f64, m: usize) -> Vec<i64> {
    let l = crate::geometry::robust_ceil(2.0 * w * m as f64).min(m) as i64;
    let lo = -(l / 2);
    (lo..lo + l).collect()
}

fn fourier_block(spec: &ProlateSpec, modulation: &[C64]) -> (FourierBlock, DMatrix<C64>) {
    let m = spec.len();
    let freqs = band_frequencies(spec.half_bandwidth, m);
    let lags = &spec.normalized_lags;
    let raw = DMatrix::from_fn(m, freqs.len(), |i, k| {
        modulation[i] * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * freqs[k] as f64 * lags[i] / m as f64)
    });
    if spec.is_uniform() {
        let q = raw.scale(1.0 / (m as f64).sqrt());
        let mut planner = FftPlanner::new();
        let block = FourierBlock::Uniform {
            modulation: modulation.to_vec(),
            freqs,
            l0: lags[0],
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        };
        (block, q)
    } else {
        (FourierBlock::Dense, orthonormal_columns(&raw, 1e-10))
    }
}

/// Orthonormal basis for the column span, dropping numerically dependent
/// directions (relative threshold `tol`).
fn orthonormal_columns(a: &DMatrix<C64>, tol: f64) -> DMatrix<C64> {
    if a.ncols() == 0 {
        return a.clone();
    }
    let scale = a.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut cols: Vec<DVector<C64>> = Vec::new();
    for c in a.column_iter() {
        let mut v = c.into_owned();
        for _ in 0..2 {
            for q in &cols {
                let proj = q.dotc(&v);
                v -= q * proj;
            }
        }
        let n = v.norm();
        if n > tol * scale {
            cols.push(v.unscale(n));
        }
    }
    if cols.is_empty() {
        return DMatrix::zeros(a.nrows(), 0);
    }
    DMatrix::from_columns(&cols)
}

fn build(r: &DMatrix<C64>, fourier: Option<(&ProlateSpec, &[C64])>, eps: f64) -> Result<LowRankFactor> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let m = r.nrows();
    let (block, q_f) = match fourier {
        Some((spec, modulation)) => fourier_block(spec, modulation),
        None => (FourierBlock::Dense, DMatrix::zeros(m, 0)),
    };
    let rq = r * &q_f;
    let a = hermitian_part(&(q_f.adjoint() * &rq));
    let d_apply = |x: &DMatrix<C64>| -> DMatrix<C64> {
        let qx = q_f.adjoint() * x;
        r * x - &q_f * (&a * qx)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(RANGE_SEED);
    let mut target = eps / 4.0;
    for _ in 0..4 {
        let basis = range_finder(&d_apply, m, target, &mut rng);
        let dq = d_apply(&basis);
        let h = hermitian_part(&(basis.adjoint() * dq));
        let (values, vectors) = hermitian_eigen(&h);
        let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i].abs() > eps / 2.0).collect();
        let w = DMatrix::from_fn(h.nrows(), keep.len(), |i, j| vectors[(i, keep[j])]);
        let l_d = &basis * w;
        let mu: Vec<f64> = keep.iter().map(|&i| values[i]).collect();
        let err = residual_norm(r, &q_f, &a, &l_d, &mu, &mut rng);
        if err <= eps {
            return Ok(LowRankFactor { m, fourier: block, q_f, a, l_d, mu, epsilon: err });
        }
        if basis.ncols() >= m {
            break;
        }
        target /= 16.0;
    }
    Err(Error::Unreachable { eps, max_rank: m })
}

fn range_finder<F>(d_apply: &F, m: usize, target: f64, rng: &mut ChaCha8Rng) -> DMatrix<C64>
where
    F: Fn(&DMatrix<C64>) -> DMatrix<C64>,
{
    let gaussian = |rng: &mut ChaCha8Rng| {
        let cols: Vec<DVector<C64>> = (0..BLOCK).map(|_| complex_normal_vector(rng, m, 1.0)).collect();
        DMatrix::from_columns(&cols)
    };
    let mut basis = DMatrix::<C64>::zeros(m, 0);
    let mut y = d_apply(&gaussian(rng));
    // Probabilistic bound: ||(I - QQ^H) D|| <= 10 sqrt(2/pi) max_i ||(I - QQ^H) D g_i||
    // with failure probability 10^-BLOCK.
    let factor = 10.0 * (2.0 / std::f64::consts::PI).sqrt();
    while basis.ncols() < m {
        project_out(&mut y, &basis);
        let fresh = orthonormal_columns(&y, 1e-12);
        let fresh = orthonormal_against(&fresh, &basis);
        if fresh.ncols() > 0 {
            let room = m - basis.ncols();
            let take = fresh.ncols().min(room);
            basis = concat_columns(&basis, &fresh.columns(0, take).into_owned());
        }
        let mut z = d_apply(&gaussian(rng));
        project_out(&mut z, &basis);
        let worst = z.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        if factor * worst <= target || fresh.ncols() == 0 && worst == 0.0 {
            break;
        }
        y = z;
    }
    basis
}

fn project_out(y: &mut DMatrix<C64>, basis: &DMatrix<C64>) {
    if basis.ncols() == 0 {
        return;
    }
    for _ in 0..2 {
        let c = basis.adjoint() * &*y;
        *y -= basis * c;
    }
}

fn orthonormal_against(fresh: &DMatrix<C64>, basis: &DMatrix<C64>) -> DMatrix<C64> {
    let mut f = fresh.clone();
    project_out(&mut f, basis);
    orthonormal_columns(&f, 1e-8)
}

/// `||R - C U^H||_2`, exactly for small M and by block subspace iteration
/// otherwise.
fn residual_norm(
    r: &DMatrix<C64>,
    q_f: &DMatrix<C64>,
    a: &DMatrix<C64>,
    l_d: &DMatrix<C64>,
    mu: &[f64],
    rng: &mut ChaCha8Rng,
) -> f64 {
    let m = r.nrows();
    let apply = |x: &DMatrix<C64>| -> DMatrix<C64> {
        let mut y = r * x - q_f * (a * (q_f.adjoint() * x));
        if !mu.is_empty() {
            let mut z = l_d.adjoint() * x;
            for (j, &v) in mu.iter().enumerate() {
                z.row_mut(j).scale_mut(v);
            }
            y -= l_d * z;
        }
        y
    };
    if m <= DENSE_CHECK_LIMIT {
        let e = apply(&DMatrix::identity(m, m));
        let (values, _) = hermitian_eigen(&hermitian_part(&e));
        return values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    }
    let cols: Vec<DVector<C64>> = (0..BLOCK).map(|_| complex_normal_vector(rng, m, 1.0)).collect();
    let mut x = orthonormal_columns(&DMatrix::from_columns(&cols), 1e-12);
    let mut estimate = 0.0;
    for _ in 0..40 {
        let y = apply(&x);
        let h = hermitian_part(&(x.adjoint() * &y));
        let (values, _) = hermitian_eigen(&h);
        let top = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let converged = (top - estimate).abs() <= 1e-3 * top;
        estimate = top;
        if converged {
            break;
        }
        x = orthonormal_columns(&y, 1e-14);
        if x.ncols() == 0 {
            return 0.0;
        }
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_random_linear, build_ula, half_wavelength, DirectionOfArrival};
    use crate::signal::SourceSpec;
    use crate::slepian::covariance;

    fn tilted_ula(m: usize) -> CovarianceModel {
        let g = build_ula(m, 120e9).unwrap();
        let src = SourceSpec::new(120e9, 12.6e9, 1.0, DirectionOfArrival::azimuth(std::f64::consts::PI / 6.0));
        covariance(&g, &src).unwrap()
    }

    #[test]
    fn fourier_block_is_orthonormal() {
        let model = tilted_ula(64);
        let f = LowRankFactor::new(&model, 1e-6).unwrap();
        let q = &f.q_f;
        let gram = q.adjoint() * q;
        assert!((gram - DMatrix::identity(q.ncols(), q.ncols())).norm() < 1e-12);
        assert!(f.uses_fft());
    }

    #[test]
    fn fft_matches_dense_blocks() {
        let model = tilted_ula(50);
        let f = LowRankFactor::new(&model, 1e-8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = complex_normal_vector(&mut rng, f.fourier_column_count(), 1.0);
        let dense = &f.q_f * &x;
        assert!((f.fourier_apply(&x) - dense).norm() < 1e-12 * x.norm());
        let y = complex_normal_vector(&mut rng, 50, 1.0);
        let dense = f.q_f.adjoint() * &y;
        assert!((f.fourier_adjoint(&y) - dense).norm() < 1e-12 * y.norm());
    }

    #[test]
    fn error_is_within_eps() {
        let model = tilted_ula(128);
        let eps = 1e-6 * model.eigenvalues()[0];
        let f = LowRankFactor::new(&model, eps).unwrap();
        let approx = f.c() * f.u().adjoint();
        let (values, _) = hermitian_eigen(&hermitian_part(&(model.matrix() - approx)));
        let err = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err <= eps, "{err} > {eps}");
        assert!((err - f.epsilon()).abs() <= 1e-3 * eps + 1e-15);
    }

    #[test]
    fn huge_eps_gives_empty_correction() {
        let model = tilted_ula(32);
        let f = LowRankFactor::new(&model, 10.0 * model.eigenvalues()[0]).unwrap();
        assert_eq!(f.rank(), f.fourier_column_count());
    }

    #[test]
    fn nonuniform_lags_use_dense_block() {
        let d = half_wavelength(120e9);
        let g = build_random_linear(40, d, 9).unwrap();
        let src = SourceSpec::new(120e9, 12.6e9, 1.0, DirectionOfArrival::azimuth(0.0));
        let model = covariance(&g, &src).unwrap();
        let f = LowRankFactor::new(&model, 1e-8).unwrap();
        assert!(!f.uses_fft());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = complex_normal_vector(&mut rng, 40, 1.0);
        let dense = model.matrix() * &x;
        let fast = f.apply(&x).unwrap();
        assert!((fast - dense).norm() <= (1e-8 / model.eigenvalues()[0] + 1e-12) * model.eigenvalues()[0] * x.norm());
    }

    #[test]
    fn apply_basics() {
        let model = tilted_ula(32);
        let f = LowRankFactor::new(&model, 1e-9).unwrap();
        let zero = DVector::zeros(32);
        assert_eq!(f.apply(&zero).unwrap().norm(), 0.0);
        let mut e1 = DVector::zeros(f.rank());
        e1[0] = C64::new(1.0, 0.0);
        let col = f.apply_columns(&e1).unwrap();
        assert!((col - f.c().column(0)).norm() < 1e-12);
        assert!(f.apply(&DVector::zeros(5)).is_err());
        assert!(f.apply_columns(&DVector::zeros(f.rank() + 1)).is_err());
    }
}
