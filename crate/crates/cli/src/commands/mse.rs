use std::path::Path;

use rayon::prelude::*;
use slepbeam::recon::{mc_mse, mse_closed_form};
use slepbeam::slepian::covariance;

use super::{readout, Outcome, ReadoutContext};
use crate::config::{Family, MseSweepConfig};
use crate::error::HarnessError;
use crate::output::{guard, num, write_csv, Meta, Table};

pub fn run(cfg: &MseSweepConfig, meta: &Meta, out: &Path) -> Result<Outcome, HarnessError> {
    let m = cfg.geometry.elements() as f64;
    let points: Vec<(Family, usize)> =
        cfg.families.iter().flat_map(|f| f.k_values.iter().map(move |&k| (f.family, k))).collect();
    let iq_points = points.iter().filter(|p| p.0 == Family::BinaryIq).count() as f64;
    guard(m * m * (4.0 + points.len() as f64) + iq_points * 12.0 * (2.0 * m).powi(2), "mse-sweep")?;
    let g = cfg.geometry.build()?;
    let source = cfg.source.spec();
    let model = covariance(&g, &source)?;
    let ctx = ReadoutContext { model: &model, geometry: &g, source: &source, seed: meta.seed, normalize: cfg.normalize, iq: &cfg.iq };

    let rows = points
        .par_iter()
        .map(|&(family, k)| {
            let phi = readout(&ctx, family, k)?;
            let mse = mse_closed_form(&phi, &model, cfg.noise_var)?;
            let mc = if cfg.monte_carlo_trials > 0 {
                let seed = meta.seed ^ ((k as u64) << 32) ^ family as u64;
                Some(mc_mse(&phi, &model, cfg.noise_var, cfg.monte_carlo_trials, seed)?)
            } else {
                None
            };
            Ok((mse, mc))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let mut table = Table::new(&["family", "k", "mse", "mse_normalized", "tail_energy", "mc_mean", "mc_std_error"]);
    let mut summary = Vec::new();
    for (&(family, k), (mse, mc)) in points.iter().zip(&rows) {
        let (mean, se) = mc.map_or((String::new(), String::new()), |e| (num(e.mean), num(e.std_error)));
        table.push(&[family.name().into(), k.to_string(), num(mse.raw), num(mse.normalized), num(model.tail_energy(k)), mean, se]);
        summary.push(format!("{} K={k}: normalized MSE {:.4e}", family.name(), mse.normalized));
    }
    let file = write_csv(out, "mse_sweep.csv", meta, &table)?;
    Ok(Outcome { files: vec![file], summary })
}
