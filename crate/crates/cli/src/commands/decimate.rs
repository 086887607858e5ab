use std::path::Path;

use serde::Serialize;
use slepbeam::geometry::{delays, subspace_dimension};
use slepbeam::measure::{readout, slepian_measurements};
use slepbeam::recon::{cgd_uniform_recovery, merge_coincident, BasisFamily, CgdOptions, FrameBasisPlan, MmseReconstructor, StreamingLs};
use slepbeam::signal::{decimation_schedule, ensemble, synthesize, SyntheticSignal};
use slepbeam::slepian::covariance;
use slepbeam::C64;

use super::Outcome;
use crate::config::{BasisConfig, DecimateRecoverConfig, RecoveryMethod};
use crate::error::HarnessError;
use crate::output::{guard, num, write_csv, write_json, Meta, Table};

/// Samples closer than this are treated as one (seconds).
const MERGE_TOL_S: f64 = 1e-16;

#[derive(Serialize)]
struct Report {
    t_s: f64,
    t_d: f64,
    ratio: f64,
    snapshot_rate_hz: f64,
    k: usize,
    snapshots: usize,
    samples: usize,
    method: &'static str,
    iterations: Option<usize>,
    converged: Option<bool>,
    final_residual: Option<f64>,
    basis_size: Option<usize>,
    grid_points: usize,
    scored_points: usize,
    snr_db: f64,
}

fn phasor(f: f64, t: f64) -> C64 {
    let cycles = f * t;
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (cycles - cycles.round()))
}

/// `10 log10(|truth|^2 / |error|^2)` over the grid minus `edge` of its
/// length at each end.
fn interior_snr(grid: &[f64], estimate: &[C64], sig: &SyntheticSignal, edge: f64) -> (f64, usize) {
    let cut = (grid.len() as f64 * edge).floor() as usize;
    let (mut num, mut den) = (0.0, 0.0);
    let range = cut..grid.len().saturating_sub(cut);
    let n = range.len();
    for i in range {
        let truth = sig.evaluate(grid[i]);
        num += (estimate[i] - truth).norm_sqr();
        den += truth.norm_sqr();
    }
    (10.0 * (den / num).log10(), n)
}

pub fn run(cfg: &DecimateRecoverConfig, meta: &Meta, out: &Path) -> Result<Outcome, HarnessError> {
    let g = cfg.geometry.build()?;
    let src = cfg.source.spec();
    let doa = src.doa;
    let omega = src.half_bandwidth_hz;
    let schedule = decimation_schedule(&g, &doa, omega)?;
    let rate = cfg.snapshot_rate_hz.unwrap_or(1.0 / schedule.t_d);
    let head = format!("T_s = {:e} s, T_d = {:e} s, ratio = {:.4}", schedule.t_s, schedule.t_d, schedule.ratio);
    if cfg.dry_run {
        return Ok(Outcome { files: vec![], summary: vec![head, format!("snapshot rate {rate:e} Hz")] });
    }

    let tau = delays(&g, &doa).delays_s;
    let mut distinct = tau.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() <= MERGE_TOL_S);
    let m = g.len() as f64;
    let solver_entries = match cfg.recovery {
        RecoveryMethod::Cgd { snapshots, .. } => (snapshots as f64 * distinct.len() as f64).powi(2),
        RecoveryMethod::Streaming { frame_len_s, .. } => {
            let per_frame = frame_len_s * rate * distinct.len() as f64 + 1.0;
            per_frame * (2.0 * frame_len_s * omega + 64.0) * 4.0
        }
    };
    guard(3.0 * m * m + solver_entries, "decimate-recover")?;

    let k = cfg.k.unwrap_or(subspace_dimension(&g, &doa, omega) + cfg.k_extra).min(g.len());
    let model = covariance(&g, &src)?;
    // The synthetic signal has the physical PSD; match the model to it.
    let scale = model.provenance().map_or(1.0, |p| p.physical_scale);
    let model = model.scaled(scale)?;
    let phi = slepian_measurements(&model, k)?.effective();
    let rec = MmseReconstructor::new(&phi, model.matrix(), cfg.noise_var)?;
    let sig = synthesize(&src, cfg.tones, meta.seed)?;
    let period = 1.0 / rate;

    // Snapshot -> readout -> MMSE estimate -> element samples at t - tau_m.
    let collect = |t_start: f64, count: usize, keep: &dyn Fn(f64) -> bool| -> Result<(Vec<f64>, Vec<C64>), HarnessError> {
        let e = ensemble(&sig, &g, &doa, t_start, period, count)?;
        let (mut times, mut values) = (Vec::new(), Vec::new());
        for (i, (t, y)) in e.timestamps.iter().zip(&e.samples).enumerate() {
            let w = readout(&phi, y, cfg.noise_var, meta.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))?;
            let y_hat = rec.estimate(&w)?;
            for (mi, &tm) in tau.iter().enumerate() {
                let ts = t - tm;
                if keep(ts) {
                    times.push(ts);
                    values.push(y_hat[mi]);
                }
            }
        }
        Ok((times, values))
    };

    let (grid, estimate, snapshots, samples, method_fields) = match cfg.recovery {
        RecoveryMethod::Cgd { snapshots, delta, eps, max_iterations } => {
            let (times, values) = collect(0.0, snapshots, &|_| true)?;
            let (mt, mv) = merge_coincident(&times, &values, MERGE_TOL_S);
            let t0 = mt[0];
            let span = mt[mt.len() - 1] - t0;
            let grid_len = (span * 2.0 * omega).floor() as usize;
            let opts = CgdOptions { delta, eps, max_iterations };
            let r = cgd_uniform_recovery(&mt, &mv, src.carrier_hz, omega, t0, grid_len, &opts)?;
            let fields = ("cgd", Some(r.iterations), Some(r.converged), r.residual_history.last().copied(), None);
            (r.grid_times.clone(), r.passband(), snapshots, mt.len(), fields)
        }
        RecoveryMethod::Streaming { frame_len_s, overlap_s, frames, extra_basis, basis } => {
            let family = match basis {
                BasisConfig::Slepian => BasisFamily::SampledSlepian,
                BasisConfig::Fourier => BasisFamily::Fourier,
            };
            let plan = FrameBasisPlan::uniform(0.0, frame_len_s, overlap_s, frames, omega, extra_basis, family)?;
            let (lo, hi) = plan.span();
            let reach = tau.iter().fold(0.0f64, |a, t| a.max(t.abs()));
            let count = ((hi - lo + 2.0 * reach) / period).ceil() as usize + 1;
            let (times, values) = collect(lo - reach, count, &|t| t >= lo && t <= hi)?;
            let baseband: Vec<C64> = times.iter().zip(&values).map(|(&t, &v)| v * phasor(src.carrier_hz, t).conj()).collect();
            let mut ls = StreamingLs::new(plan.clone());
            for (bt, bv) in plan.partition(&times, &baseband)? {
                ls.push(&bt, &bv)?;
            }
            let alphas = ls.solve()?;
            let grid: Vec<f64> = (0..).map(|n| lo + n as f64 / (2.0 * omega)).take_while(|&t| t <= hi).collect();
            let est = grid.iter().map(|&t| plan.evaluate(&alphas, t) * phasor(src.carrier_hz, t)).collect();
            let fields = ("streaming", None, None, None, Some(plan.n_basis));
            (grid, est, count, times.len(), fields)
        }
    };
    let (snr_db, scored) = interior_snr(&grid, &estimate, &sig, cfg.edge_fraction);

    let mut trace = Table::new(&["t_s", "truth_re", "truth_im", "estimate_re", "estimate_im"]);
    for (&t, e) in grid.iter().zip(&estimate) {
        let s = sig.evaluate(t);
        trace.push(&[num(t), num(s.re), num(s.im), num(e.re), num(e.im)]);
    }
    let (method, iterations, converged, final_residual, basis_size) = method_fields;
    let report = Report {
        t_s: schedule.t_s,
        t_d: schedule.t_d,
        ratio: schedule.ratio,
        snapshot_rate_hz: rate,
        k,
        snapshots,
        samples,
        method,
        iterations,
        converged,
        final_residual,
        basis_size,
        grid_points: grid.len(),
        scored_points: scored,
        snr_db,
    };
    let files = vec![
        write_csv(out, "decimate_trace.csv", meta, &trace)?,
        write_json(out, "decimate_report.json", meta, &report)?,
    ];
    let mut summary = vec![head, format!("{method}: {samples} samples, K={k}, recovery SNR {snr_db:.2} dB")];
    if let Some(it) = iterations {
        summary.push(format!("CGD iterations: {it}"));
    }
    Ok(Outcome { files, summary })
}
