//! Binary-IQ measurement design.
//!
//! Rows with entries in `{1, -1, j, -j}` are chosen one at a time to keep as
//! much energy as possible inside the leading `K`-dimensional subspace while
//! staying nearly orthogonal (inside that subspace) to the rows chosen
//! before. Each row is a sign vector `h` in `{-1, 1}^(2M)` with
//! `phi = (h[..M] + j h[M..]) (1 - j) / 2`; the multiplication by
//! `(1 - j) / 2` maps `{+-1 +- j}` onto the alphabet and only rescales inner
//! products. The readout row is `phi^H`, matching the ideal `Phi = V_K^H`.
//!
//! For row `k` the lifted problem is
//!
//! ```text
//! minimize    trace(Q T),            Q = U_perp^T U_perp = I - U^T U
//! subject to  diag(T) = 1,  T PSD,
//!             trace(G_k' T) <= alpha for every earlier row k',
//! ```
//!
//! with `U` the realification of `V_K^H` and
//! `G_k' = P (h' h'^T + J h' h'^T J^T) P`, `P = U^T U`, so that
//! `trace(G_k' h h^T)` is the squared modulus of the complex inner product
//! of the projected rows. The relaxation is rounded by sampling `sign(V g)`
//! with `g ~ N(0, I)` and keeping the best feasible sample.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::symmetric_eigen;
use crate::measure::MeasurementMatrix;
use crate::sdp::{solve_sdp, SdpOptions, SdpProblem, SdpSolution};
use crate::slepian::CovarianceModel;
use crate::{Error, Result, C64};

/// `[[Re A, -Im A], [Im A, Re A]]`, the real form of `z -> A z`.
pub fn realify(a: &DMatrix<C64>) -> DMatrix<f64> {
    let (r, c) = a.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let z = a[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// `J h` for `h = [a; b]`, the real form of multiplication by `j`.
pub fn rotate(h: &DVector<f64>) -> DVector<f64> {
    let m = h.len() / 2;
    DVector::from_fn(h.len(), |i, _| if i < m { -h[i + m] } else { h[i - m] })
}

/// Alphabet row from a sign vector.
pub fn to_alphabet(h: &DVector<f64>) -> Result<Vec<C64>> {
    if h.len() % 2 != 0 {
        return Err(Error::InvalidArgument("sign vector must have even length".into()));
    }
    let m = h.len() / 2;
    (0..m)
        .map(|i| {
            let (a, b) = (h[i], h[i + m]);
            if a.abs() != 1.0 || b.abs() != 1.0 {
                return Err(Error::InvalidArgument(format!("entries must be +-1, got ({a}, {b})")));
            }
            let z = C64::new(a, b) * C64::new(1.0, -1.0) * 0.5;
            Ok(C64::new(z.re.round(), z.im.round()))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct RealifiedSubspaces {
    /// Real form of `V_K^H` (2K x 2M).
    pub u: DMatrix<f64>,
    /// Real form of `V_perp^H` (2(M - K) x 2M).
    pub u_perp: DMatrix<f64>,
}

impl RealifiedSubspaces {
    pub fn new(model: &CovarianceModel, k: usize) -> Result<Self> {
        let m = model.dim();
        if k == 0 || k > m {
            return Err(Error::InvalidArgument(format!("subspace dimension {k} outside 1..={m}")));
        }
        Ok(Self { u: realify(&model.leading(k).adjoint()), u_perp: realify(&model.trailing(k).adjoint()) })
    }

    pub fn m(&self) -> usize {
        self.u.ncols() / 2
    }

    /// `Q = U_perp^T U_perp`.
    pub fn q(&self) -> DMatrix<f64> {
        self.u_perp.transpose() * &self.u_perp
    }

    /// `h^T Q h`, evaluated as `|h|^2 - |U h|^2`.
    pub fn cost(&self, h: &DVector<f64>) -> f64 {
        h.norm_squared() - (&self.u * h).norm_squared()
    }

    /// `|<U a, U b>|^2` for the complex inner product.
    pub fn cross(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let ua = &self.u * a;
        let ub = &self.u * b;
        let re = ua.dot(&ub);
        let im = ua.dot(&(&self.u * rotate(b)));
        re * re + im * im
    }

    /// Factors `[P h, P J h]` of the constraint matrix for an earlier row.
    pub fn constraint_factors(&self, h: &DVector<f64>) -> Vec<DVector<f64>> {
        let p = |x: DVector<f64>| self.u.transpose() * (&self.u * x);
        vec![p(h.clone()), p(rotate(h))]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignOptions {
    /// Cross-correlation bound; `None` uses
    /// `0.1 (mean |U h'|^2 over earlier rows)^2`.
    pub alpha: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub sdp: SdpOptions,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self { alpha: None, trials: 2000, seed: 0xb1a5, sdp: SdpOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowReport {
    pub row: usize,
    pub alpha: f64,
    pub relaxation_objective: f64,
    pub dual_bound: f64,
    pub dual_slack_min: f64,
    pub primal_residual: f64,
    pub stationarity: f64,
    pub sdp_iterations: usize,
    pub rounded_objective: f64,
    pub feasible_trials: usize,
    pub trials: usize,
    /// Whether the relaxation was numerically rank one and its leading
    /// eigenvector's signs were used.
    pub rank_one: bool,
}

#[derive(Clone, Debug)]
pub struct BinaryIqDesign {
    pub measurement: MeasurementMatrix,
    /// Sign vectors, one per row.
    pub signs: Vec<DVector<f64>>,
    pub rows: Vec<RowReport>,
}

impl BinaryIqDesign {
    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("row reports serialize")
    }
}

#[derive(Clone, Debug)]
pub struct Rounding {
    pub h: DVector<f64>,
    pub objective: f64,
    pub feasible_trials: usize,
    /// Objective of every feasible sample in trial order (`inf` when
    /// infeasible).
    pub per_trial: Vec<f64>,
    pub rank_one: bool,
}

/// Randomized sign rounding of a relaxation `T = V V^T`.
///
/// `feasible` decides whether a candidate satisfies the constraints.
pub fn randomized_round<C, F>(
    factor: &DMatrix<f64>,
    cost: C,
    feasible: F,
    trials: usize,
    seed: u64,
) -> Option<Rounding>
where
    C: Fn(&DVector<f64>) -> f64 + Sync,
    F: Fn(&DVector<f64>) -> bool + Sync,
{
    let sign = |x: f64| if x >= 0.0 { 1.0 } else { -1.0 };
    // Leading direction of T from the small Gram V^T V.
    let (vals, vecs) = symmetric_eigen(&(factor.transpose() * factor));
    let rank_one = vals.len() < 2 || vals[1] < 1e-6 * vals[0].max(1e-300);
    let top = factor * vecs.column(0);
    let mut candidates: Vec<(f64, DVector<f64>)> = Vec::new();
    let mut used_top = false;
    if rank_one {
        let h = top.map(sign);
        if feasible(&h) {
            used_top = true;
            candidates.push((cost(&h), h));
        }
    }
    let r = factor.ncols();
    let per_trial: Vec<(f64, Option<DVector<f64>>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let g = DVector::from_fn(r, |_, _| StandardNormal.sample(&mut rng));
            let h = (factor * g).map(sign);
            if feasible(&h) {
                (cost(&h), Some(h))
            } else {
                (f64::INFINITY, None)
            }
        })
        .collect();
    let feasible_trials = per_trial.iter().filter(|p| p.1.is_some()).count();
    let objectives: Vec<f64> = per_trial.iter().map(|p| p.0).collect();
    for (c, h) in per_trial.into_iter() {
        if let Some(h) = h {
            if candidates.last().is_none_or(|b| c < b.0) || candidates.is_empty() {
                candidates.push((c, h));
            }
        }
    }
    let best = candidates.into_iter().min_by(|a, b| a.0.total_cmp(&b.0))?;
    Some(Rounding { h: best.1, objective: best.0, feasible_trials, per_trial: objectives, rank_one: used_top })
}

/// SDP for one row given the earlier rows.
pub fn row_problem(sub: &RealifiedSubspaces, prior: &[DVector<f64>], alpha: f64) -> SdpProblem {
    SdpProblem {
        q: sub.q(),
        q_identity_minus_gram: Some(sub.u.clone()),
        constraints: prior.iter().map(|h| sub.constraint_factors(h)).collect(),
        alpha,
    }
}

/// Default cross-correlation bound for a row given the earlier rows.
pub fn default_alpha(sub: &RealifiedSubspaces, prior: &[DVector<f64>]) -> f64 {
    if prior.is_empty() {
        return 1.0;
    }
    let mean = prior.iter().map(|h| (&sub.u * h).norm_squared()).sum::<f64>() / prior.len() as f64;
    0.1 * mean * mean
}

/// Designs `k` binary-IQ rows for the leading `k`-dimensional subspace of
/// `model`.
pub fn design_binary_iq(model: &CovarianceModel, k: usize, opts: &DesignOptions) -> Result<BinaryIqDesign> {
    if opts.trials == 0 {
        return Err(Error::InvalidArgument("at least one rounding trial is required".into()));
    }
    if let Some(a) = opts.alpha {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {a}")));
        }
    }
    let sub = RealifiedSubspaces::new(model, k)?;
    let m = sub.m();
    let mut signs: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut rows = Vec::with_capacity(k);
    for row in 0..k {
        let alpha = opts.alpha.unwrap_or_else(|| default_alpha(&sub, &signs));
        let problem = row_problem(&sub, &signs, alpha);
        let sdp_opts = SdpOptions { seed: opts.sdp.seed.wrapping_add(row as u64), ..opts.sdp };
        let sol: SdpSolution = solve_sdp(&problem, &sdp_opts)?;
        let prior = &signs;
        let rounding = randomized_round(
            &sol.factor,
            |h| sub.cost(h),
            |h| prior.iter().all(|p| sub.cross(p, h) <= alpha),
            opts.trials,
            opts.seed.wrapping_add(row as u64),
        )
        .ok_or(Error::NoFeasibleCandidate { row, trials: opts.trials })?;
        rows.push(RowReport {
            row,
            alpha,
            relaxation_objective: sol.objective,
            dual_bound: sol.dual_bound,
            dual_slack_min: sol.dual_slack_min,
            primal_residual: sol.primal_residual,
            stationarity: sol.stationarity,
            sdp_iterations: sol.iterations,
            rounded_objective: rounding.objective,
            feasible_trials: rounding.feasible_trials,
            trials: opts.trials,
            rank_one: rounding.rank_one,
        });
        signs.push(rounding.h);
    }
    let mut phi = DMatrix::zeros(k, m);
    for (i, h) in signs.iter().enumerate() {
        for (j, z) in to_alphabet(h)?.into_iter().enumerate() {
            phi[(i, j)] = z.conj();
        }
    }
    Ok(BinaryIqDesign { measurement: MeasurementMatrix::binary_iq(phi)?, signs, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::is_alphabet;
    use crate::slepian::ProlateSpec;

    fn model(m: usize, w: f64) -> CovarianceModel {
        let modulation = (0..m).map(|i| C64::from_polar(1.0, 0.3 * i as f64)).collect();
        CovarianceModel::from_prolate(ProlateSpec::uniform(w, m), modulation, 1.0).unwrap()
    }

    #[test]
    fn alphabet_map_covers_all_four_points() {
        let h = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0, -1.0]);
        let phi = to_alphabet(&h).unwrap();
        assert_eq!(phi, vec![C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0)]);
        assert!(to_alphabet(&DVector::from_vec(vec![0.5, 1.0])).is_err());
    }

    #[test]
    fn realification_matches_complex_product() {
        let a = DMatrix::from_fn(2, 3, |i, j| C64::new(i as f64 + 0.5, j as f64 - 1.0));
        let z = DVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.1), C64::new(0.0, 3.0)]);
        let y = &a * &z;
        let h = DVector::from_fn(6, |i, _| if i < 3 { z[i].re } else { z[i - 3].im });
        let yr = realify(&a) * h;
        for i in 0..2 {
            assert!((yr[i] - y[i].re).abs() < 1e-12 && (yr[i + 2] - y[i].im).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_term_is_lifted_trace() {
        let cm = model(6, 0.2);
        let sub = RealifiedSubspaces::new(&cm, 2).unwrap();
        let a = DVector::from_fn(12, |i, _| if i % 3 == 0 { 1.0 } else { -1.0 });
        let b = DVector::from_fn(12, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        let p = SdpProblem { q: sub.q(), q_identity_minus_gram: None, constraints: vec![sub.constraint_factors(&a)], alpha: 1.0 };
        let lifted = (p.constraint_matrix(0) * &b).dot(&b);
        assert!((lifted - sub.cross(&a, &b)).abs() < 1e-9 * (1.0 + lifted));
        // Complex form with the rows mapped to the alphabet.
        let vk = cm.leading(2);
        let za = DVector::from_vec(to_alphabet(&a).unwrap());
        let zb = DVector::from_vec(to_alphabet(&b).unwrap());
        let ip = (vk.adjoint() * za).dotc(&(vk.adjoint() * zb));
        assert!((ip.norm_sqr() - lifted / 4.0).abs() < 1e-9 * (1.0 + lifted));
    }

    #[test]
    fn design_rows_are_in_alphabet_and_respect_bound() {
        let cm = model(12, 0.15);
        let opts = DesignOptions { trials: 400, ..DesignOptions::default() };
        let d = design_binary_iq(&cm, 3, &opts).unwrap();
        assert!(d.measurement.phi.iter().all(is_alphabet));
        for (i, r) in d.rows.iter().enumerate() {
            assert!(r.dual_bound <= r.relaxation_objective + 1e-6);
            assert!(r.relaxation_objective <= r.rounded_objective + 1e-6);
            for j in 0..i {
                let sub = RealifiedSubspaces::new(&cm, 3).unwrap();
                assert!(sub.cross(&d.signs[j], &d.signs[i]) <= r.alpha * (1.0 + 1e-12));
            }
        }
        assert!(d.report_json().contains("rounded_objective"));
    }

    #[test]
    fn rounding_best_is_running_minimum() {
        let cm = model(8, 0.2);
        let sub = RealifiedSubspaces::new(&cm, 2).unwrap();
        let sol = solve_sdp(&row_problem(&sub, &[], 1.0), &SdpOptions::default()).unwrap();
        let r = randomized_round(&sol.factor, |h| sub.cost(h), |_| true, 64, 3).unwrap();
        let min = r.per_trial.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(r.objective <= min + 1e-12);
        assert_eq!(r.feasible_trials, 64);
    }
}

