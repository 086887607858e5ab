//! Semidefinite relaxation solver for
//!
//! ```text
//! minimize    trace(Q T)
//! subject to  diag(T) = 1,  trace(G_k T) <= alpha,  T PSD
//! ```
//!
//! where every `G_k` is given by a few vectors, `G_k = sum_f f f^T`.
//!
//! The default method is a dense primal-dual interior-point method. A
//! low-rank alternative factors `T = V V^T` with unit-norm rows of `V` and
//! runs block-coordinate (row-by-row) minimization on an augmented
//! Lagrangian of the inequality constraints; each row update is the closed
//! form minimizer of the linearized objective on the sphere. With
//! `r(r+1)/2` above the number of constraints, second-order stationary
//! points of the factored problem are optimal for the SDP. A dense ADMM
//! solver (PSD projection by eigendecomposition) is kept for small problems.
//!
//! Every solution carries a dual certificate: multipliers `mu >= 0`,
//! `y_i`, and `lambda_min(Q + sum mu_k G_k - Diag(y))`, which yield the
//! lower bound `sum y - alpha sum mu + n min(lambda_min, 0)` on the optimum.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::symmetric_eigen;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct SdpProblem {
    /// Symmetric PSD objective matrix.
    pub q: DMatrix<f64>,
    /// When set, `Q = I - L^T L` for this `L`, used for fast products.
    pub q_identity_minus_gram: Option<DMatrix<f64>>,
    /// Factors of each constraint matrix.
    pub constraints: Vec<Vec<DVector<f64>>>,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpMethod {
    InteriorPoint,
    LowRank,
    Admm,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpOptions {
    pub method: SdpMethod,
    /// Relative stationarity / feasibility tolerance.
    pub tol: f64,
    pub max_iterations: usize,
    /// Factor width; `None` picks `ceil(sqrt(2 (n + constraints))) + 1`.
    pub rank: Option<usize>,
    pub seed: u64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { method: SdpMethod::InteriorPoint, tol: 1e-8, max_iterations: 20_000, rank: None, seed: 0x5d9 }
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    /// Symmetric PSD, unit diagonal.
    pub t: DMatrix<f64>,
    /// `T = V V^T`.
    pub factor: DMatrix<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Largest constraint violation `max(0, trace(G_k T) - alpha)`.
    pub primal_residual: f64,
    /// Relative stationarity residual of the final iterate.
    pub stationarity: f64,
    /// Inequality multipliers.
    pub multipliers: Vec<f64>,
    /// `lambda_min` of the dual slack matrix.
    pub dual_slack_min: f64,
    /// Certified lower bound on the SDP optimum.
    pub dual_bound: f64,
    pub method: SdpMethod,
}

impl SdpProblem {
    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn constraint_matrix(&self, k: usize) -> DMatrix<f64> {
        let n = self.n();
        let mut g = DMatrix::zeros(n, n);
        for f in &self.constraints[k] {
            g += f * f.transpose();
        }
        g
    }

    /// `trace(G_k X X^T)` for a factor `X` (n x r).
    pub fn constraint_value(&self, k: usize, x: &DMatrix<f64>) -> f64 {
        self.constraints[k].iter().map(|f| (x.transpose() * f).norm_squared()).sum()
    }

    pub fn objective_of(&self, x: &DMatrix<f64>) -> f64 {
        (x.transpose() * &self.q * x).trace()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || self.q.ncols() != n {
            return Err(Error::InvalidArgument("objective must be a nonempty square matrix".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", self.alpha)));
        }
        for c in &self.constraints {
            if let Some(f) = c.iter().find(|f| f.len() != n) {
                return Err(Error::DimensionMismatch { expected: n, got: f.len() });
            }
        }
        Ok(())
    }

    /// Diagonal multipliers `y_i = (C V V^T)_ii` matching a factor with unit
    /// rows, where `C = Q + sum mu_k G_k`.
    fn diagonal_multipliers(&self, v: &DMatrix<f64>, mu: &[f64]) -> Vec<f64> {
        let cv = self.effective_cost(mu) * v;
        (0..self.n()).map(|i| cv.row(i).dot(&v.row(i))).collect()
    }

    /// `(lambda_min(S), lower bound)` for dual variables `(y, mu)`, with
    /// `S = Q + sum mu_k G_k - Diag(y)`.
    pub fn dual_certificate(&self, y: &[f64], mu: &[f64]) -> (f64, f64) {
        let n = self.n();
        let mut s = self.effective_cost(mu);
        for i in 0..n {
            s[(i, i)] -= y[i];
        }
        let lmin = s.symmetric_eigenvalues().min();
        let bound = y.iter().sum::<f64>() - self.alpha * mu.iter().sum::<f64>() + n as f64 * lmin.min(0.0);
        (lmin, bound)
    }

    /// Largest tangent component of `C V` over the rows of `V`, relative to
    /// the size of `C`.
    fn stationarity(&self, v: &DMatrix<f64>, mu: &[f64]) -> f64 {
        let c = self.effective_cost(mu);
        let cv = &c * v;
        let worst = (0..self.n())
            .map(|i| {
                let g = cv.row(i);
                let vi = v.row(i);
                (g - vi * g.dot(&vi)).norm()
            })
            .fold(0.0, f64::max);
        worst / (1.0 + c.amax() * (self.n() as f64).sqrt())
    }

    fn effective_cost(&self, mu: &[f64]) -> DMatrix<f64> {
        let mut c = self.q.clone();
        for (k, &m) in mu.iter().enumerate() {
            if m > 0.0 {
                for f in &self.constraints[k] {
                    c += (f * f.transpose()).scale(m);
                }
            }
        }
        c
    }
}

pub fn solve_sdp(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    p.validate()?;
    match opts.method {
        SdpMethod::InteriorPoint => solve_interior_point(p, opts),
        SdpMethod::LowRank => solve_low_rank(p, opts),
        SdpMethod::Admm => solve_admm(p, opts),
    }
}

struct RowState<'a> {
    p: &'a SdpProblem,
    v: DMatrix<f64>,
    /// `Q V` (dense objective) or `L V` (identity-minus-gram objective).
    qv: DMatrix<f64>,
    /// `f^T V` per constraint factor.
    proj: Vec<Vec<DVector<f64>>>,
    lambda: Vec<f64>,
}

impl<'a> RowState<'a> {
    fn new(p: &'a SdpProblem, v: DMatrix<f64>) -> Self {
        let qv = match &p.q_identity_minus_gram {
            Some(l) => l * &v,
            None => &p.q * &v,
        };
        let proj = p.constraints.iter().map(|c| c.iter().map(|f| v.transpose() * f).collect()).collect();
        let lambda = vec![0.0; p.constraints.len()];
        Self { p, v, qv, proj, lambda }
    }

    fn constraint_value(&self, k: usize) -> f64 {
        self.proj[k].iter().map(|a| a.norm_squared()).sum()
    }

    /// Row `i` of `C V` excluding the diagonal term, where `C = Q + sum lambda_k G_k`.
    fn off_diagonal_row(&self, i: usize) -> DVector<f64> {
        let r = self.v.ncols();
        let vi = self.v.row(i).transpose();
        let mut g = match &self.p.q_identity_minus_gram {
            Some(l) => {
                // (I - L^T L) V, minus the diagonal 1 - |L_i|^2.
                let li = l.column(i);
                let lv = self.qv.transpose() * li;
                -(lv - &vi * li.norm_squared())
            }
            None => self.qv.row(i).transpose() - &vi * self.p.q[(i, i)],
        };
        for (k, &lam) in self.lambda.iter().enumerate() {
            if lam == 0.0 {
                continue;
            }
            for (f, a) in self.p.constraints[k].iter().zip(&self.proj[k]) {
                let fi = f[i];
                if fi != 0.0 {
                    g += (a - &vi * fi) * (lam * fi);
                }
            }
        }
        debug_assert_eq!(g.len(), r);
        g
    }

    fn set_row(&mut self, i: usize, new: &DVector<f64>) {
        let old = self.v.row(i).transpose();
        let delta = new - &old;
        match &self.p.q_identity_minus_gram {
            Some(l) => self.qv += l.column(i) * delta.transpose(),
            None => self.qv += self.p.q.column(i) * delta.transpose(),
        }
        for (k, c) in self.p.constraints.iter().enumerate() {
            for (f, a) in c.iter().zip(self.proj[k].iter_mut()) {
                if f[i] != 0.0 {
                    *a += &delta * f[i];
                }
            }
        }
        self.v.row_mut(i).copy_from(&new.transpose());
    }

    fn update_lambda(&mut self, mu: &[f64], rho: f64) {
        for k in 0..self.lambda.len() {
            let c = self.constraint_value(k);
            self.lambda[k] = (mu[k] + rho * (c - self.p.alpha)).max(0.0);
        }
    }

    fn objective(&self) -> f64 {
        match &self.p.q_identity_minus_gram {
            Some(_) => self.v.nrows() as f64 - self.qv.norm_squared(),
            None => self.v.iter().zip(self.qv.iter()).map(|(a, b)| a * b).sum(),
        }
    }

    /// Riemannian gradient norm of the augmented Lagrangian at fixed lambda.
    fn stationarity(&self) -> f64 {
        let n = self.v.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let vi = self.v.row(i).transpose();
            let mut g = self.off_diagonal_row(i);
            let diag = self.diagonal_cost(i);
            g += &vi * diag;
            let tangent = &g - &vi * g.dot(&vi);
            worst = worst.max(tangent.norm());
        }
        worst
    }

    fn diagonal_cost(&self, i: usize) -> f64 {
        let mut d = match &self.p.q_identity_minus_gram {
            Some(l) => 1.0 - l.column(i).norm_squared(),
            None => self.p.q[(i, i)],
        };
        for (k, &lam) in self.lambda.iter().enumerate() {
            for f in &self.p.constraints[k] {
                d += lam * f[i] * f[i];
            }
        }
        d
    }
}

fn default_rank(p: &SdpProblem) -> usize {
    let m = (p.n() + p.constraints.len()) as f64;
    ((2.0 * m).sqrt().ceil() as usize + 1).min(p.n())
}

fn solve_low_rank(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    let n = p.n();
    let r = opts.rank.unwrap_or_else(|| default_rank(p)).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v = DMatrix::from_fn(n, r, |_, _| StandardNormal.sample(&mut rng));
    for mut row in v.row_iter_mut() {
        let nrm = row.norm();
        row /= nrm;
    }
    let mut st = RowState::new(p, v);
    let ncons = p.constraints.len();
    let mut mu = vec![0.0; ncons];
    let scale = 1.0 + p.q.amax() * n as f64;
    let cscale: f64 = (0..ncons).map(|k| p.constraint_matrix(k).amax()).fold(0.0, f64::max) * n as f64;
    let mut rho = if ncons > 0 { scale / (cscale * p.alpha.max(1e-300)).max(1e-300) * 1e-2 } else { 0.0 };
    rho = rho.max(1e-12);
    let feas_tol = opts.tol * p.alpha;
    let grad_tol = opts.tol * scale;
    let mut iterations = 0;
    let mut last_violation = f64::INFINITY;
    let mut converged = false;
    while iterations < opts.max_iterations {
        // Inner sweeps at fixed multipliers.
        let mut prev = f64::INFINITY;
        loop {
            for i in 0..n {
                let g = st.off_diagonal_row(i);
                let nrm = g.norm();
                if nrm > 0.0 {
                    st.set_row(i, &(-g / nrm));
                }
                if ncons > 0 {
                    st.update_lambda(&mu, rho);
                }
            }
            iterations += 1;
            let obj = st.objective();
            let stalled = (prev - obj).abs() <= 1e-15 * scale;
            prev = obj;
            if iterations % 10 == 0 || stalled {
                if st.stationarity() <= grad_tol || stalled {
                    break;
                }
            }
            if iterations >= opts.max_iterations {
                break;
            }
        }
        if ncons == 0 {
            converged = st.stationarity() <= grad_tol;
            break;
        }
        let violation = (0..ncons).map(|k| (st.constraint_value(k) - p.alpha).max(0.0)).fold(0.0, f64::max);
        let slack_ok = (0..ncons).all(|k| st.lambda[k] * (p.alpha - st.constraint_value(k)).max(0.0) <= grad_tol);
        let change = (0..ncons).map(|k| (st.lambda[k] - mu[k]).abs()).fold(0.0, f64::max);
        mu.clone_from(&st.lambda);
        if violation <= feas_tol && slack_ok && change * cscale <= grad_tol && st.stationarity() <= grad_tol {
            converged = true;
            break;
        }
        if violation > 0.25 * last_violation {
            rho *= 4.0;
        }
        last_violation = violation;
        st.update_lambda(&mu, rho);
    }
    if !converged && iterations >= opts.max_iterations {
        let stationarity = st.stationarity() / scale;
        return Err(Error::NonConvergence { iterations, residual: stationarity });
    }
    finish(p, st.v, mu, iterations, SdpMethod::LowRank)
}

fn finish(p: &SdpProblem, v: DMatrix<f64>, mu: Vec<f64>, iterations: usize, method: SdpMethod) -> Result<SdpSolution> {
    let y = p.diagonal_multipliers(&v, &mu);
    let stationarity = p.stationarity(&v, &mu);
    assemble(p, v, y, mu, iterations, stationarity, method)
}

fn assemble(
    p: &SdpProblem,
    v: DMatrix<f64>,
    y: Vec<f64>,
    mu: Vec<f64>,
    iterations: usize,
    stationarity: f64,
    method: SdpMethod,
) -> Result<SdpSolution> {
    let t = &v * v.transpose();
    let objective = p.objective_of(&v);
    let primal_residual =
        (0..p.constraints.len()).map(|k| (p.constraint_value(k, &v) - p.alpha).max(0.0)).fold(0.0, f64::max);
    let (dual_slack_min, dual_bound) = p.dual_certificate(&y, &mu);
    Ok(SdpSolution {
        t,
        factor: v,
        objective,
        iterations,
        primal_residual,
        stationarity,
        multipliers: mu,
        dual_slack_min,
        dual_bound,
        method,
    })
}

/// Residual accepted when the interior-point iteration stops improving.
const STALL_ACCEPT: f64 = 1e-6;

/// Dense primal-dual path-following method (HKM direction with Mehrotra
/// predictor-corrector) on the standard form
/// `min <Q, X>` s.t. `diag(X) = 1`, `<G_k, X> + s_k = alpha`, `X PSD`, `s >= 0`.
fn solve_interior_point(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    let n = p.n();
    let c = p.constraints.len();
    let m = n + c;
    let alpha = p.alpha;
    let factors = &p.constraints;

    // A(X, s) and A^T(y) for the block problem.
    let apply_a = |x: &DMatrix<f64>, s: &[f64]| -> DVector<f64> {
        let mut out = DVector::zeros(m);
        for i in 0..n {
            out[i] = x[(i, i)];
        }
        for k in 0..c {
            out[n + k] = factors[k].iter().map(|f| f.dot(&(x * f))).sum::<f64>() + s[k];
        }
        out
    };
    let apply_at = |y: &DVector<f64>| -> DMatrix<f64> {
        let mut out = DMatrix::from_diagonal(&y.rows(0, n).into_owned());
        for k in 0..c {
            for f in &factors[k] {
                out.ger(y[n + k], f, f, 1.0);
            }
        }
        out
    };
    let b = DVector::from_fn(m, |i, _| if i < n { 1.0 } else { alpha });
    let norm_b = 1.0 + b.norm();
    let norm_c = 1.0 + p.q.norm();

    let scale = 1.0 + p.q.amax().max(factors.iter().flatten().map(|f| f.norm_squared()).fold(0.0, f64::max));
    let mut x = DMatrix::<f64>::identity(n, n);
    let mut s = vec![alpha; c];
    let mut y = DVector::<f64>::zeros(m);
    let mut z = DMatrix::<f64>::identity(n, n) * scale;
    let mut zs = vec![scale; c];

    let sym = |a: DMatrix<f64>| (&a + a.transpose()) * 0.5;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut history: Vec<f64> = Vec::new();
    while iterations < opts.max_iterations.min(200) {
        let ax = apply_a(&x, &s);
        let rp = &b - &ax;
        let rd = &p.q - apply_at(&y) - &z;
        let rds: Vec<f64> = (0..c).map(|k| -y[n + k] - zs[k]).collect();
        let gap = x.dot(&z) + s.iter().zip(&zs).map(|(a, b)| a * b).sum::<f64>();
        let mu = gap / (n + c) as f64;
        let pobj = p.q.dot(&x);
        let dobj = b.dot(&y);
        let pinf = rp.norm() / norm_b;
        let dinf = (rd.norm_squared() + rds.iter().map(|v| v * v).sum::<f64>()).sqrt() / norm_c;
        let rgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        residual = pinf.max(dinf).max(rgap);
        history.push(residual);
        if residual <= opts.tol {
            break;
        }
        // Near the boundary of the cone progress can stall short of `tol`;
        // accept once the residual is below the loose bound and flat.
        if residual <= STALL_ACCEPT && history.len() > 5 && residual > 0.5 * history[history.len() - 6] {
            break;
        }
        if !dobj.is_finite() || dobj.abs() > 1e12 * norm_c {
            return Err(Error::Infeasible(format!("dual objective diverged; alpha {alpha} admits no relaxed point")));
        }
        iterations += 1;

        let zchol = z.clone().cholesky().ok_or(Error::NonConvergence { iterations, residual })?;
        let xl = x.clone().cholesky().ok_or(Error::NonConvergence { iterations, residual })?.l();
        let zl = zchol.l();
        let zi = zchol.inverse();
        let xf: Vec<Vec<DVector<f64>>> = factors.iter().map(|fs| fs.iter().map(|f| &x * f).collect()).collect();
        let zf: Vec<Vec<DVector<f64>>> = factors.iter().map(|fs| fs.iter().map(|f| &zi * f).collect()).collect();

        // Schur complement M_ij = <A_i, X A_j Z^-1> plus the slack block.
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for j in 0..n {
            for i in 0..n {
                schur[(i, j)] = x[(i, j)] * zi[(i, j)];
            }
        }
        for k in 0..c {
            for i in 0..n {
                let v: f64 = xf[k].iter().zip(&zf[k]).map(|(a, b)| a[i] * b[i]).sum();
                schur[(i, n + k)] = v;
                schur[(n + k, i)] = v;
            }
            for l in 0..c {
                let mut v = 0.0;
                for (f, zfk) in factors[k].iter().zip(&zf[k]) {
                    for (e, xel) in factors[l].iter().zip(&xf[l]) {
                        v += f.dot(xel) * e.dot(zfk);
                    }
                }
                schur[(n + k, n + l)] = v;
            }
            schur[(n + k, n + k)] += s[k] / zs[k];
        }
        let schur = sym(schur);
        let mchol = schur.clone().cholesky().ok_or(Error::NonConvergence { iterations, residual })?;

        let x_rd_zi = &x * &rd * &zi;
        // Solves for a direction with target sigma * mu and corrector terms.
        let direction = |target: f64, corr: Option<(&DMatrix<f64>, &[f64])>| {
            let mut rc = &zi * target - &x - &x_rd_zi;
            let mut rcs: Vec<f64> = (0..c).map(|k| target / zs[k] - s[k] - s[k] / zs[k] * rds[k]).collect();
            if let Some((cm, cs)) = corr {
                rc -= cm;
                for k in 0..c {
                    rcs[k] -= cs[k];
                }
            }
            let rhs = &rp - apply_a(&rc, &rcs);
            let dy = mchol.solve(&rhs);
            let dz = &rd - apply_at(&dy);
            let dzs: Vec<f64> = (0..c).map(|k| rds[k] - dy[n + k]).collect();
            let mut dx = &zi * target - &x - &x * &dz * &zi;
            if let Some((cm, _)) = corr {
                dx -= cm;
            }
            let dx = sym(dx);
            let mut dxs: Vec<f64> = (0..c).map(|k| target / zs[k] - s[k] - s[k] / zs[k] * dzs[k]).collect();
            if let Some((_, cs)) = corr {
                for k in 0..c {
                    dxs[k] -= cs[k];
                }
            }
            (dx, dxs, dy, dz, dzs)
        };

        let (dxa, dsa, _, dza, dzsa) = direction(0.0, None);
        let ap = max_step(&xl, &dxa, &s, &dsa).min(1.0);
        let ad = max_step(&zl, &dza, &zs, &dzsa).min(1.0);
        let gap_aff = (&x + &dxa * ap).dot(&(&z + &dza * ad))
            + (0..c).map(|k| (s[k] + ap * dsa[k]) * (zs[k] + ad * dzsa[k])).sum::<f64>();
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);
        let corr_m = &dxa * &dza * &zi;
        let corr_s: Vec<f64> = (0..c).map(|k| dsa[k] * dzsa[k] / zs[k]).collect();
        let (dx, ds, dy, dz, dzs) = direction(sigma * mu, Some((&corr_m, &corr_s)));
        let ap = confirm_step(&x, &dx, (0.98 * max_step(&xl, &dx, &s, &ds)).min(1.0));
        let ad = confirm_step(&z, &dz, (0.98 * max_step(&zl, &dz, &zs, &dzs)).min(1.0));
        x += &dx * ap;
        x = sym(x);
        for k in 0..c {
            s[k] += ap * ds[k];
            zs[k] += ad * dzs[k];
        }
        y += &dy * ad;
        z += &dz * ad;
        z = sym(z);
    }
    if residual > opts.tol.max(STALL_ACCEPT) {
        return Err(Error::NonConvergence { iterations, residual });
    }
    // Unit-diagonal rescaling keeps T PSD; the factor comes from its
    // eigendecomposition.
    let d: Vec<f64> = (0..n).map(|i| x[(i, i)].max(1e-300).sqrt()).collect();
    let t = DMatrix::from_fn(n, n, |i, j| x[(i, j)] / (d[i] * d[j]));
    let v = psd_factor(&t);
    let mu: Vec<f64> = (0..c).map(|k| (-y[n + k]).max(0.0)).collect();
    let yd: Vec<f64> = (0..n).map(|i| y[i]).collect();
    assemble(p, v, yd, mu, iterations, residual, SdpMethod::InteriorPoint)
}

/// Shrinks `a` until `X + a dX` is positive definite.
fn confirm_step(x: &DMatrix<f64>, dx: &DMatrix<f64>, mut a: f64) -> f64 {
    for _ in 0..60 {
        if (x + dx * a).cholesky().is_some() {
            return a;
        }
        a *= 0.8;
    }
    0.0
}

/// Largest `a` with `X + a dX` PSD and `s + a ds >= 0`, where `l` is the
/// Cholesky factor of `X`. The cone bound comes from a Lanczos estimate of
/// `lambda_min(L^-1 dX L^-T)`, which can only overestimate the step, so
/// callers confirm the final step with a factorization.
fn max_step(l: &DMatrix<f64>, dx: &DMatrix<f64>, s: &[f64], ds: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, d) in s.iter().zip(ds) {
        if *d < 0.0 {
            best = best.min(-a / d);
        }
    }
    let op = |v: &DVector<f64>| -> DVector<f64> {
        let u = l.tr_solve_lower_triangular(v).unwrap_or_else(|| v.clone());
        l.solve_lower_triangular(&(dx * u)).unwrap_or_else(|| v.clone())
    };
    let lmin = lanczos_min(op, l.nrows());
    if lmin < 0.0 {
        best = best.min(-1.0 / lmin);
    }
    best
}

/// Smallest eigenvalue of a symmetric operator by Lanczos with full
/// reorthogonalization.
fn lanczos_min<F: Fn(&DVector<f64>) -> DVector<f64>>(op: F, n: usize) -> f64 {
    let steps = n.min(80);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(steps);
    let mut q = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64) * 0.7548776662).fract());
    q.normalize_mut();
    let mut alphas = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);
    let mut last = f64::INFINITY;
    for j in 0..steps {
        let mut w = op(&q);
        let a = w.dot(&q);
        alphas.push(a);
        basis.push(q.clone());
        for b in &basis {
            let c = w.dot(b);
            w.axpy(-c, b, 1.0);
        }
        let beta = w.norm();
        let done = beta <= 1e-12 * (1.0 + a.abs());
        if j % 5 == 4 || done || j + 1 == steps {
            let k = alphas.len();
            let t = DMatrix::from_fn(k, k, |r, c| {
                if r == c {
                    alphas[r]
                } else if r + 1 == c {
                    betas[r]
                } else if c + 1 == r {
                    betas[c]
                } else {
                    0.0
                }
            });
            let m = t.symmetric_eigenvalues().min();
            if done || (m - last).abs() <= 1e-4 * (1.0 + m.abs()) {
                return m;
            }
            last = m;
        }
        betas.push(beta);
        q = w / beta;
    }
    last
}

/// Projection of `y` onto `{diag(Z) = 1, trace(G_k Z) <= alpha}`.
struct AffineProjector {
    g: Vec<DMatrix<f64>>,
    diag: Vec<DVector<f64>>,
    h: DMatrix<f64>,
    alpha: f64,
}

impl AffineProjector {
    fn new(p: &SdpProblem) -> Self {
        let g: Vec<DMatrix<f64>> = (0..p.constraints.len()).map(|k| p.constraint_matrix(k)).collect();
        let diag: Vec<DVector<f64>> = g.iter().map(|m| m.diagonal()).collect();
        let c = g.len();
        let h = DMatrix::from_fn(c, c, |k, l| g[k].dot(&g[l]) - diag[k].dot(&diag[l]));
        Self { g, diag, h, alpha: p.alpha }
    }

    fn project(&self, y: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
        let c = self.g.len();
        let ydiag = y.diagonal();
        let shifted = ydiag.map(|v| v - 1.0);
        let r: Vec<f64> = (0..c).map(|k| self.g[k].dot(y) - self.diag[k].dot(&shifted) - self.alpha).collect();
        let mut eta = vec![0.0; c];
        for _ in 0..500 {
            let mut moved: f64 = 0.0;
            for k in 0..c {
                if self.h[(k, k)] <= 0.0 {
                    continue;
                }
                let hk: f64 = (0..c).map(|l| self.h[(k, l)] * eta[l]).sum();
                let next = (eta[k] + (r[k] - hk) / self.h[(k, k)]).max(0.0);
                moved = moved.max((next - eta[k]).abs());
                eta[k] = next;
            }
            if moved <= 1e-15 * (1.0 + eta.iter().fold(0.0f64, |a, b| a.max(*b))) {
                break;
            }
        }
        let mut z = y.clone();
        for (k, &e) in eta.iter().enumerate() {
            if e > 0.0 {
                z -= self.g[k].scale(e);
            }
        }
        for i in 0..z.nrows() {
            z[(i, i)] = 1.0;
        }
        (z, eta)
    }
}

fn psd_projection(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, vectors) = symmetric_eigen(&((a + a.transpose()) * 0.5));
    let n = a.nrows();
    let mut scaled = vectors.clone();
    for (j, &l) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(l.max(0.0));
    }
    let out = scaled * vectors.transpose();
    debug_assert_eq!(out.nrows(), n);
    out
}

fn solve_admm(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    let n = p.n();
    let proj = AffineProjector::new(p);
    let mut z = DMatrix::<f64>::identity(n, n);
    let mut u = DMatrix::<f64>::zeros(n, n);
    let mut x = z.clone();
    let mut rho = 1.0_f64.max(p.q.amax());
    let mut eta = vec![0.0; p.constraints.len()];
    let mut iterations = 0;
    let scale = 1.0 + p.q.amax() * n as f64;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        x = psd_projection(&(&z - &u - p.q.scale(1.0 / rho)));
        let z_prev = z.clone();
        let (z_new, e) = proj.project(&(&x + &u));
        z = z_new;
        eta = e;
        u += &x - &z;
        let primal = (&x - &z).norm();
        let dual = rho * (&z - &z_prev).norm();
        if primal <= opts.tol * (n as f64).sqrt() && dual <= opts.tol * scale {
            converged = true;
            break;
        }
        if primal > 10.0 * dual / rho.max(1e-300) * rho {
            rho *= 2.0;
            u /= 2.0;
        } else if dual > 10.0 * primal * rho / rho.max(1e-300) {
            rho /= 2.0;
            u *= 2.0;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations, residual: (&x - &z).norm() });
    }
    // Unit-diagonal PSD matrix from the PSD iterate, then its factor.
    let d: Vec<f64> = (0..n).map(|i| x[(i, i)].max(1e-300).sqrt()).collect();
    let t = DMatrix::from_fn(n, n, |i, j| x[(i, j)] / (d[i] * d[j]));
    let v = psd_factor(&t);
    // Multipliers of the inequality constraints are rho * eta in the
    // scaled ADMM form.
    let mu: Vec<f64> = eta.iter().map(|e| e * rho).collect();
    finish(p, v, mu, iterations, SdpMethod::Admm)
}

/// `V` with `V V^T = T` (eigenvalues clamped at zero), rows renormalized to
/// unit length.
pub fn psd_factor(t: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, vectors) = symmetric_eigen(t);
    let keep: Vec<usize> = (0..values.len()).filter(|&j| values[j] > 1e-14 * values[0].max(1e-300)).collect();
    let mut v = DMatrix::from_fn(t.nrows(), keep.len().max(1), |i, j| {
        keep.get(j).map_or(0.0, |&c| vectors[(i, c)] * values[c].sqrt())
    });
    for mut row in v.row_iter_mut() {
        let nrm = row.norm();
        if nrm > 0.0 {
            row /= nrm;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_psd(n: usize, rank: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: DMatrix<f64> = DMatrix::from_fn(n, rank, |_, _| StandardNormal.sample(&mut rng));
        &a * a.transpose()
    }

    #[test]
    fn zero_objective_is_trivial() {
        let p = SdpProblem { q: DMatrix::zeros(6, 6), q_identity_minus_gram: None, constraints: vec![], alpha: 1.0 };
        let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert!(sol.objective.abs() <= 1e-8);
        for i in 0..6 {
            assert!((sol.t[(i, i)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn methods_agree() {
        let q = random_psd(8, 3, 11);
        let f: DVector<f64> = DVector::from_fn(8, |i, _| if i % 2 == 0 { 1.0 } else { -0.5 });
        let p = SdpProblem { q, q_identity_minus_gram: None, constraints: vec![vec![f]], alpha: 0.5 };
        let ipm = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert!(ipm.primal_residual <= 1e-6 && ipm.stationarity <= 1e-6);
        assert!(ipm.dual_bound <= ipm.objective + 1e-9);
        assert!(ipm.objective - ipm.dual_bound < 1e-6 * (1.0 + ipm.objective.abs()));
        for method in [SdpMethod::LowRank, SdpMethod::Admm] {
            let other = solve_sdp(&p, &SdpOptions { method, tol: 1e-8, ..SdpOptions::default() }).unwrap();
            assert!(
                (other.objective - ipm.objective).abs() < 1e-4 * (1.0 + ipm.objective.abs()),
                "{method:?}: {} vs {}",
                other.objective,
                ipm.objective
            );
        }
    }

    #[test]
    fn factor_reconstructs() {
        let mut t = random_psd(5, 5, 2);
        let d: Vec<f64> = (0..5).map(|i| t[(i, i)].sqrt()).collect();
        t = DMatrix::from_fn(5, 5, |i, j| t[(i, j)] / (d[i] * d[j]));
        let v = psd_factor(&t);
        assert!((&v * v.transpose() - t).amax() < 1e-10);
    }
}
