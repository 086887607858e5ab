//! Streaming least-squares reconstruction over overlapping frames.
//!
//! The signal is modeled as `s(t) = sum_i sum_n alpha_{i,n} psi_{i,n}(t)`
//! with `psi_{i,n} = w_i(t) phi_{i,n}(t)`, where the tapers `w_i` form a
//! partition of unity over the frames `[l_i, r_i]` and each `phi_{i,n}`
//! is a bandlimited function concentrated on its frame. Frames satisfy
//! `l_i < r_{i-1} < l_{i+1}`, so batch `i` (samples in `[l_i, l_{i+1})`)
//! touches only frames `i - 1` and `i`:
//!
//! ```text
//! z_i = A_i alpha_i + B_i alpha_{i-1}
//! ```
//!
//! The normal equations are block tridiagonal. Each batch eliminates the
//! previous block (forward sweep), and the current solution is recovered by
//! back substitution.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::linalg::symmetric_eigen;
use crate::recon::cgd::sinc;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    /// Nystrom-extended Slepian functions of the frame's interval and band.
    SampledSlepian,
    /// Complex exponentials evenly spread across the band.
    Fourier,
}

#[derive(Clone, Debug)]
pub struct FrameBasisPlan {
    pub frames: Vec<(f64, f64)>,
    /// Per-frame basis size.
    pub n_basis: usize,
    /// Half bandwidth of the complex-baseband signal (Hz).
    pub omega_hz: f64,
    pub family: BasisFamily,
    bases: Vec<FrameBasis>,
}

#[derive(Clone, Debug)]
struct FrameBasis {
    lo: f64,
    hi: f64,
    /// Slepian case: quadrature nodes and Nystrom weights (G x N).
    nodes: Vec<f64>,
    weights: DMatrix<f64>,
    /// Fourier case: frequencies (Hz).
    freqs: Vec<f64>,
}

/// Extra basis functions beyond the time-bandwidth product by default.
pub const DEFAULT_EXTRA: usize = 4;

impl FrameBasisPlan {
    pub fn new(frames: Vec<(f64, f64)>, omega_hz: f64, n_basis: usize, family: BasisFamily) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidArgument("plan needs at least one frame".into()));
        }
        if n_basis == 0 {
            return Err(Error::InvalidArgument("basis size must be positive".into()));
        }
        if !(omega_hz.is_finite() && omega_hz > 0.0) {
            return Err(Error::InvalidArgument(format!("half bandwidth must be positive, got {omega_hz}")));
        }
        for (i, &(l, r)) in frames.iter().enumerate() {
            if !(l < r) {
                return Err(Error::InvalidArgument(format!("frame {i} is empty")));
            }
            if i > 0 && !(l < frames[i - 1].1) {
                return Err(Error::InvalidArgument(format!("frame {i} does not overlap frame {}", i - 1)));
            }
            if i > 0 && i + 1 < frames.len() && !(frames[i - 1].1 < frames[i + 1].0) {
                return Err(Error::InvalidArgument(format!("frames {} and {} overlap", i - 1, i + 1)));
            }
        }
        let bases = frames.iter().map(|&(l, r)| FrameBasis::new(l, r, omega_hz, n_basis, family)).collect();
        Ok(Self { frames, n_basis, omega_hz, family, bases })
    }

    /// `count` frames of length `frame_len` starting at `t_start`, each
    /// overlapping the next by `overlap`. The basis size is
    /// `ceil(2 T Omega) + extra`.
    pub fn uniform(
        t_start: f64,
        frame_len: f64,
        overlap: f64,
        count: usize,
        omega_hz: f64,
        extra: usize,
        family: BasisFamily,
    ) -> Result<Self> {
        if !(overlap > 0.0 && 2.0 * overlap < frame_len) {
            return Err(Error::InvalidArgument("overlap must be positive and below half the frame".into()));
        }
        let step = frame_len - overlap;
        let frames = (0..count).map(|i| (t_start + i as f64 * step, t_start + i as f64 * step + frame_len)).collect();
        let n = crate::geometry::robust_ceil(2.0 * frame_len * omega_hz) + extra;
        Self::new(frames, omega_hz, n, family)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.frames[0].0, self.frames[self.frames.len() - 1].1)
    }

    /// Partition-of-unity taper of frame `i` (sin^2 / cos^2 ramps across
    /// the overlaps).
    pub fn taper(&self, i: usize, t: f64) -> f64 {
        let (l, r) = self.frames[i];
        if t < l || t > r {
            return 0.0;
        }
        let ramp = |a: f64, b: f64, t: f64| {
            let x = ((t - a) / (b - a)).clamp(0.0, 1.0);
            (std::f64::consts::FRAC_PI_2 * x).sin().powi(2)
        };
        let mut w = 1.0;
        if i > 0 {
            let prev_r = self.frames[i - 1].1;
            if t < prev_r {
                w *= ramp(l, prev_r, t);
            }
        }
        if i + 1 < self.frames.len() {
            let next_l = self.frames[i + 1].0;
            if t > next_l {
                w *= 1.0 - ramp(next_l, r, t);
            }
        }
        w
    }

    /// Row of `psi_{i,n}(t)` for `n < N`.
    pub fn psi(&self, i: usize, t: f64) -> DVector<C64> {
        let w = self.taper(i, t);
        if w == 0.0 {
            return DVector::zeros(self.n_basis);
        }
        self.bases[i].eval(t, self.omega_hz).map(|v| v * w)
    }

    /// Batch index of a sample at time `t`, if it falls inside the plan.
    pub fn batch_of(&self, t: f64) -> Option<usize> {
        let (lo, hi) = self.span();
        if t < lo || t > hi {
            return None;
        }
        let mut idx = 0;
        for (i, &(l, _)) in self.frames.iter().enumerate() {
            if t >= l {
                idx = i;
            }
        }
        Some(idx)
    }

    /// Splits samples into per-batch `(times, values)`.
    pub fn partition(&self, times: &[f64], values: &[C64]) -> Result<Vec<(Vec<f64>, Vec<C64>)>> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: values.len() });
        }
        let mut out = vec![(Vec::new(), Vec::new()); self.len()];
        for (&t, &v) in times.iter().zip(values) {
            let i = self
                .batch_of(t)
                .ok_or_else(|| Error::InvalidArgument(format!("sample time {t:e} lies outside the plan")))?;
            out[i].0.push(t);
            out[i].1.push(v);
        }
        Ok(out)
    }

    /// `A_i` and `B_i` for batch `i` sampled at `times`.
    pub fn design(&self, i: usize, times: &[f64]) -> (DMatrix<C64>, DMatrix<C64>) {
        let n = self.n_basis;
        let mut a = DMatrix::zeros(times.len(), n);
        let mut b = DMatrix::zeros(times.len(), n);
        for (row, &t) in times.iter().enumerate() {
            a.row_mut(row).copy_from(&self.psi(i, t).transpose());
            if i > 0 {
                b.row_mut(row).copy_from(&self.psi(i - 1, t).transpose());
            }
        }
        (a, b)
    }

    /// `s_hat(t)` from per-frame coefficients.
    pub fn evaluate(&self, alphas: &[DVector<C64>], t: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (i, alpha) in alphas.iter().enumerate() {
            let (l, r) = self.frames[i];
            if t >= l && t <= r {
                acc += self.psi(i, t).dot(alpha);
            }
        }
        acc
    }
}

impl FrameBasis {
    fn new(lo: f64, hi: f64, omega: f64, n: usize, family: BasisFamily) -> Self {
        match family {
            BasisFamily::Fourier => {
                let freqs = (0..n).map(|k| -omega + (k as f64 + 0.5) * 2.0 * omega / n as f64).collect();
                Self { lo, hi, nodes: vec![], weights: DMatrix::zeros(0, 0), freqs }
            }
            BasisFamily::SampledSlepian => {
                let tbw = crate::geometry::robust_ceil(2.0 * (hi - lo) * omega);
                let g = 64.max(8 * tbw).max(2 * n);
                let h = (hi - lo) / g as f64;
                let nodes: Vec<f64> = (0..g).map(|k| lo + (k as f64 + 0.5) * h).collect();
                let kernel =
                    DMatrix::from_fn(g, g, |a, b| h * 2.0 * omega * sinc(2.0 * omega * (nodes[a] - nodes[b])));
                let (values, vectors) = symmetric_eigen(&kernel);
                // phi_n(t) = (h / lambda_n) sum_g K(t, x_g) v_n[g]
                let weights = DMatrix::from_fn(g, n, |a, k| vectors[(a, k)] * h / values[k].max(1e-300));
                Self { lo, hi, nodes, weights, freqs: vec![] }
            }
        }
    }

    fn eval(&self, t: f64, omega: f64) -> DVector<C64> {
        if !self.freqs.is_empty() {
            let center = 0.5 * (self.lo + self.hi);
            return DVector::from_iterator(
                self.freqs.len(),
                self.freqs.iter().map(|&f| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * (t - center))),
            );
        }
        let k = DVector::from_iterator(
            self.nodes.len(),
            self.nodes.iter().map(|&x| 2.0 * omega * sinc(2.0 * omega * (t - x))),
        );
        let v = self.weights.transpose() * k;
        v.map(|x| C64::new(x, 0.0))
    }
}

struct Eliminated {
    /// Cholesky factor of `S_{i-1} + B_i^H B_i`.
    factor: Cholesky<C64, Dyn>,
    rhs: DVector<C64>,
    /// `B_i^H A_i`.
    coupling: DMatrix<C64>,
}

/// Online solver: push batches in order, solve at any time.
pub struct StreamingLs {
    plan: FrameBasisPlan,
    done: Vec<Eliminated>,
    /// Schur complement and right-hand side of the newest block.
    s: Option<(DMatrix<C64>, DVector<C64>)>,
}

impl StreamingLs {
    pub fn new(plan: FrameBasisPlan) -> Self {
        Self { plan, done: Vec::new(), s: None }
    }

    pub fn plan(&self) -> &FrameBasisPlan {
        &self.plan
    }

    pub fn batches(&self) -> usize {
        self.done.len() + usize::from(self.s.is_some())
    }

    /// Adds batch `i = self.batches()`.
    pub fn push(&mut self, times: &[f64], values: &[C64]) -> Result<()> {
        let i = self.batches();
        if i >= self.plan.len() {
            return Err(Error::InvalidArgument("more batches than frames".into()));
        }
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: values.len() });
        }
        let (a, b) = self.plan.design(i, times);
        let z = DVector::from_column_slice(values);
        let h = a.adjoint() * &a;
        let r_new = a.adjoint() * &z;
        match self.s.take() {
            None => self.s = Some((h, r_new)),
            Some((s_prev, r_prev)) => {
                let d = s_prev + b.adjoint() * &b;
                let rhs = r_prev + b.adjoint() * &z;
                let factor = checked_cholesky(d, i - 1)?;
                let coupling = b.adjoint() * &a;
                let s = h - coupling.adjoint() * factor.solve(&coupling);
                let r = r_new - coupling.adjoint() * factor.solve(&rhs);
                self.done.push(Eliminated { factor, rhs, coupling });
                self.s = Some((s, r));
            }
        }
        Ok(())
    }

    /// Coefficients minimizing the residual over all batches pushed so far.
    pub fn solve(&self) -> Result<Vec<DVector<C64>>> {
        let (s, r) = self.s.as_ref().ok_or_else(|| Error::InvalidArgument("no batches pushed".into()))?;
        let last = self.done.len();
        let factor = checked_cholesky(s.clone(), last)?;
        let mut alphas = vec![factor.solve(r)];
        for e in self.done.iter().rev() {
            let next = alphas.last().expect("seeded above");
            alphas.push(e.factor.solve(&(&e.rhs - &e.coupling * next)));
        }
        alphas.reverse();
        Ok(alphas)
    }
}

fn checked_cholesky(m: DMatrix<C64>, frame: usize) -> Result<Cholesky<C64, Dyn>> {
    let m = (&m + m.adjoint()).scale(0.5);
    let chol = Cholesky::new(m).ok_or(Error::RankDeficient { frame })?;
    let diag = chol.l_dirty().diagonal();
    let hi = diag.iter().map(|d| d.re).fold(0.0, f64::max);
    let lo = diag.iter().map(|d| d.re).fold(f64::INFINITY, f64::min);
    if !(lo > 0.0 && lo > 1e-7 * hi) {
        return Err(Error::RankDeficient { frame });
    }
    Ok(chol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(count: usize, family: BasisFamily) -> FrameBasisPlan {
        FrameBasisPlan::uniform(0.0, 4.0, 1.0, count, 1.0, 4, family).unwrap()
    }

    #[test]
    fn tapers_partition_unity() {
        let p = plan(5, BasisFamily::SampledSlepian);
        let (lo, hi) = p.span();
        for k in 0..=400 {
            let t = lo + (hi - lo) * k as f64 / 400.0;
            let s: f64 = (0..p.len()).map(|i| p.taper(i, t)).sum();
            assert!((s - 1.0).abs() < 1e-12, "t={t} sum={s}");
        }
    }

    #[test]
    fn rejects_bad_overlap() {
        assert!(FrameBasisPlan::new(vec![(0.0, 1.0), (1.5, 2.0)], 1.0, 3, BasisFamily::Fourier).is_err());
        assert!(FrameBasisPlan::new(vec![(0.0, 2.0), (1.0, 3.0), (1.5, 4.0)], 1.0, 3, BasisFamily::Fourier).is_err());
    }

    #[test]
    fn single_square_frame() {
        let p = FrameBasisPlan::new(vec![(0.0, 3.0)], 1.0, 5, BasisFamily::SampledSlepian).unwrap();
        let times = [0.2, 0.9, 1.4, 2.2, 2.8];
        let (a, _) = p.design(0, &times);
        let alpha = DVector::from_fn(5, |i, _| C64::new(i as f64 - 2.0, 0.5));
        let z = &a * &alpha;
        let mut ls = StreamingLs::new(p);
        ls.push(&times, z.as_slice()).unwrap();
        let got = ls.solve().unwrap();
        assert!((&got[0] - &alpha).norm() < 1e-8 * alpha.norm());
    }

    #[test]
    fn underdetermined_frame_is_rank_deficient() {
        let p = FrameBasisPlan::new(vec![(0.0, 3.0)], 1.0, 5, BasisFamily::SampledSlepian).unwrap();
        let mut ls = StreamingLs::new(p);
        ls.push(&[0.5, 1.0], &[C64::new(1.0, 0.0); 2]).unwrap();
        assert!(matches!(ls.solve(), Err(Error::RankDeficient { frame: 0 })));
    }

    #[test]
    fn representable_signal_is_exact() {
        for family in [BasisFamily::SampledSlepian, BasisFamily::Fourier] {
            let p = plan(4, family);
            let (lo, hi) = p.span();
            let times: Vec<f64> = (0..300).map(|k| lo + (hi - lo) * (k as f64 + 0.5) / 300.0).collect();
            let alphas: Vec<DVector<C64>> =
                (0..4).map(|i| DVector::from_fn(p.n_basis, |n, _| C64::new((i + n) as f64 * 0.1, 1.0))).collect();
            let z: Vec<C64> = times.iter().map(|&t| p.evaluate(&alphas, t)).collect();
            let mut ls = StreamingLs::new(p.clone());
            for (bt, bv) in p.partition(&times, &z).unwrap() {
                ls.push(&bt, &bv).unwrap();
            }
            let got = ls.solve().unwrap();
            let res: f64 = times.iter().zip(&z).map(|(&t, v)| (p.evaluate(&got, t) - v).norm_sqr()).sum();
            let zn: f64 = z.iter().map(|v| v.norm_sqr()).sum();
            assert!(res.sqrt() <= 1e-8 * zn.sqrt(), "{family:?}: {}", res.sqrt() / zn.sqrt());
        }
    }
}
