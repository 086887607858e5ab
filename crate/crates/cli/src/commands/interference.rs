use std::path::Path;

use rayon::prelude::*;
use slepbeam::recon::{mse_with_interference, separated};
use slepbeam::slepian::{covariance, covariance_matrix};
use slepbeam::{ArrayGeometry, CovarianceModel, DMatrix, SourceSpec, C64};

use super::{readout, Outcome, ReadoutContext};
use crate::config::{InterferenceSweepConfig, SourceConfig, SweepAxis};
use crate::error::HarnessError;
use crate::output::{guard, num, write_csv, Meta, Table};

/// One readout evaluated along the sweep.
pub(crate) struct Curve {
    pub family: &'static str,
    pub k: usize,
    pub phi: DMatrix<C64>,
}

/// Interferer for sweep value `x`.
fn interferer_at(template: &SourceConfig, signal_power: f64, axis: &SweepAxis, x: f64) -> SourceSpec {
    let mut s = *template;
    match axis {
        SweepAxis::InterfererAzimuth { .. } => s.azimuth_deg = x,
        SweepAxis::DynamicRange { .. } => s.power = signal_power * 10f64.powf(x / 10.0),
    }
    s.spec()
}

pub(crate) fn sweep_table(
    g: &ArrayGeometry,
    r0: &CovarianceModel,
    signal: &SourceSpec,
    interferer: &SourceConfig,
    axis: &SweepAxis,
    noise_var: f64,
    curves: &[Curve],
) -> Result<Table, HarnessError> {
    let xs = axis.values();
    let per_point = xs
        .par_iter()
        .map(|&x| {
            let i = interferer_at(interferer, signal.power, axis, x);
            // A silent interferer contributes nothing (and has no covariance model).
            let ri = if i.power > 0.0 { covariance_matrix(g, &i)? } else { DMatrix::zeros(g.len(), g.len()) };
            let sep = separated(g, signal, &i);
            let mses = curves
                .iter()
                .map(|c| mse_with_interference(&c.phi, r0.matrix(), &ri, noise_var))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((sep, mses))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let mut table = Table::new(&[axis.name(), "family", "k", "mse", "mse_normalized", "tail_energy", "separated"]);
    for (&x, (sep, mses)) in xs.iter().zip(&per_point) {
        for (c, m) in curves.iter().zip(mses) {
            table.push(&[
                num(x),
                c.family.into(),
                c.k.to_string(),
                num(m.raw),
                num(m.normalized),
                num(r0.tail_energy(c.k)),
                sep.to_string(),
            ]);
        }
    }
    Ok(table)
}

pub(crate) fn sweep_entries(m: usize, points: usize, curves: usize) -> f64 {
    let m2 = (m as f64).powi(2);
    m2 * (4.0 + curves as f64) + m2 * points.min(rayon::current_num_threads()) as f64 * 3.0
}

pub fn run(cfg: &InterferenceSweepConfig, meta: &Meta, out: &Path) -> Result<Outcome, HarnessError> {
    let points: Vec<_> = cfg.families.iter().flat_map(|f| f.k_values.iter().map(move |&k| (f.family, k))).collect();
    guard(sweep_entries(cfg.geometry.elements(), cfg.sweep.values().len(), points.len()), "interference-sweep")?;
    let g = cfg.geometry.build()?;
    let signal = cfg.signal.spec();
    let r0 = covariance(&g, &signal)?;
    let ctx = ReadoutContext { model: &r0, geometry: &g, source: &signal, seed: meta.seed, normalize: true, iq: &cfg.iq };
    let curves = points
        .iter()
        .map(|&(family, k)| Ok(Curve { family: family.name(), k, phi: readout(&ctx, family, k)? }))
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let table = sweep_table(&g, &r0, &signal, &cfg.interferer, &cfg.sweep, cfg.noise_var, &curves)?;
    let summary = summarize(&table, &curves);
    let file = write_csv(out, "interference_sweep.csv", meta, &table)?;
    Ok(Outcome { files: vec![file], summary })
}

/// Peak location and value per curve.
pub(crate) fn summarize(table: &Table, curves: &[Curve]) -> Vec<String> {
    let mut best: Vec<(f64, f64)> = vec![(f64::NAN, f64::NEG_INFINITY); curves.len()];
    for (row, line) in table.body().lines().skip(1).enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let (x, mse) = (cells[0].parse::<f64>().unwrap_or(f64::NAN), cells[3].parse::<f64>().unwrap_or(f64::NAN));
        let b = &mut best[row % curves.len()];
        if mse > b.1 {
            *b = (x, mse);
        }
    }
    curves
        .iter()
        .zip(best)
        .map(|(c, (x, v))| format!("{} K={}: peak MSE {v:.4e} at {x}", c.family, c.k))
        .collect()
}
