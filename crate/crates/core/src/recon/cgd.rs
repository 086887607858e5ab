//! Recovery of uniform Nyquist-rate samples from nonuniform samples of a
//! bandlimited signal.
//!
//! Samples `s(t_i)` are demodulated by the carrier, and the regularized
//! system `(G + delta I) a = b` with `G[i, j] = sinc(2 Omega (t_i - t_j))` is
//! solved by the conjugate residual method. The Nyquist-grid values are
//! `c_n = sum_i a_i sinc(2 Omega (t_n - t_i))` on `t_n = t_0 + n / (2 Omega)`.
//! Conjugate residual minimizes the residual over each Krylov space, so the
//! residual norm never increases from one iteration to the next.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgdOptions {
    pub delta: f64,
    /// Stop once `||b - (G + delta I) a|| <= eps ||b||`.
    pub eps: f64,
    pub max_iterations: usize,
}

impl Default for CgdOptions {
    fn default() -> Self {
        Self { delta: 1e-3, eps: 1e-6, max_iterations: 200 }
    }
}

#[derive(Clone, Debug)]
pub struct CgdRecovery {
    pub grid_times: Vec<f64>,
    /// Recovered complex-baseband samples on the grid.
    pub baseband: Vec<C64>,
    pub iterations: usize,
    /// Relative residual after each iteration, starting with the initial one.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub carrier_hz: f64,
}

impl CgdRecovery {
    /// Grid values remodulated to the carrier, `c_n exp(j 2 pi f_c t_n)`.
    pub fn passband(&self) -> Vec<C64> {
        self.grid_times
            .iter()
            .zip(&self.baseband)
            .map(|(&t, &c)| c * carrier_phasor(self.carrier_hz, t))
            .collect()
    }
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn carrier_phasor(f: f64, t: f64) -> C64 {
    let cycles = f * t;
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (cycles - cycles.round()))
}

/// Sorts samples by time and averages values whose times agree within
/// `tol` seconds.
pub fn merge_coincident(times: &[f64], values: &[C64], tol: f64) -> (Vec<f64>, Vec<C64>) {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut out_t: Vec<f64> = Vec::new();
    let mut out_v: Vec<C64> = Vec::new();
    let mut count = 0usize;
    for i in order {
        match out_t.last() {
            Some(&last) if (times[i] - last).abs() <= tol => {
                count += 1;
                let n = count as f64;
                let v = out_v.last_mut().expect("nonempty alongside times");
                *v += (values[i] - *v) / n;
            }
            _ => {
                out_t.push(times[i]);
                out_v.push(values[i]);
                count = 1;
            }
        }
    }
    (out_t, out_v)
}

/// Recovers the Nyquist grid `t_0 + n / (2 Omega)` for `n < grid_len`.
pub fn cgd_uniform_recovery(
    times: &[f64],
    samples: &[C64],
    carrier_hz: f64,
    omega_hz: f64,
    t0: f64,
    grid_len: usize,
    opts: &CgdOptions,
) -> Result<CgdRecovery> {
    if times.len() != samples.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), got: samples.len() });
    }
    if times.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    if !(omega_hz.is_finite() && omega_hz > 0.0) {
        return Err(Error::InvalidArgument(format!("half bandwidth must be positive, got {omega_hz}")));
    }
    if !(opts.delta > 0.0 && opts.eps > 0.0) {
        return Err(Error::InvalidArgument("delta and eps must be positive".into()));
    }
    let n = times.len();
    let rate = 2.0 * omega_hz;
    let b = DVector::from_iterator(n, times.iter().zip(samples).map(|(&t, &s)| s * carrier_phasor(carrier_hz, t).conj()));
    let mut g = DMatrix::<f64>::from_fn(n, n, |i, j| sinc(rate * (times[i] - times[j])));
    for i in 0..n {
        g[(i, i)] += opts.delta;
    }
    let apply = |x: &DVector<C64>| -> DVector<C64> {
        let re = &g * DVector::from_iterator(n, x.iter().map(|z| z.re));
        let im = &g * DVector::from_iterator(n, x.iter().map(|z| z.im));
        DVector::from_iterator(n, re.iter().zip(im.iter()).map(|(&a, &b)| C64::new(a, b)))
    };
    let (a, history, converged) = conjugate_residual(apply, &b, opts.eps, opts.max_iterations);
    let iterations = history.len() - 1;
    let grid_times: Vec<f64> = (0..grid_len).map(|k| t0 + k as f64 / rate).collect();
    let baseband = grid_times
        .iter()
        .map(|&tn| times.iter().zip(a.iter()).map(|(&ti, &ai)| ai * sinc(rate * (tn - ti))).sum())
        .collect();
    Ok(CgdRecovery { grid_times, baseband, iterations, residual_history: history, converged, carrier_hz })
}

/// Conjugate residual iteration for a Hermitian operator. Returns the best
/// iterate, the relative residual history and whether `eps` was reached.
pub fn conjugate_residual<F>(apply: F, b: &DVector<C64>, eps: f64, max_iterations: usize) -> (DVector<C64>, Vec<f64>, bool)
where
    F: Fn(&DVector<C64>) -> DVector<C64>,
{
    let bn = b.norm();
    let mut x = DVector::zeros(b.len());
    if bn == 0.0 {
        return (x, vec![0.0], true);
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ar = apply(&r);
    let mut ap = ar.clone();
    let mut rar = r.dotc(&ar);
    let mut history = vec![1.0];
    for _ in 0..max_iterations {
        let denom = ap.norm_squared();
        if denom == 0.0 {
            break;
        }
        let alpha = rar / denom;
        x += &p * alpha;
        r -= &ap * alpha;
        let rel = r.norm() / bn;
        history.push(rel);
        if rel <= eps {
            return (x, history, true);
        }
        ar = apply(&r);
        let next = r.dotc(&ar);
        let beta = next / rar;
        rar = next;
        p = &r + &p * beta;
        ap = &ar + &ap * beta;
    }
    (x, history, false)
}
