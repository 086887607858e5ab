use std::path::Path;

use serde::Serialize;
use slepbeam::iqdesign::design_binary_iq;
use slepbeam::measure::{is_alphabet, slepian_measurements};
use slepbeam::recon::mse_closed_form;
use slepbeam::slepian::covariance;
use slepbeam::RowReport;

use super::interference::{summarize, sweep_entries, sweep_table, Curve};
use super::Outcome;
use crate::config::DesignIqConfig;
use crate::error::HarnessError;
use crate::output::{guard, num, write_csv, write_json, Meta, Table};

#[derive(Serialize)]
struct DesignReport<'a> {
    k: usize,
    /// Noise-free MSE of the unit-norm design, normalized by `trace(R)`.
    mse_normalized: f64,
    slepian_mse_normalized: f64,
    rows: &'a [RowReport],
}

pub fn run(cfg: &DesignIqConfig, meta: &Meta, out: &Path) -> Result<Outcome, HarnessError> {
    let m = cfg.geometry.elements();
    let mut entries = 12.0 * (2.0 * m as f64).powi(2);
    if let Some(e) = &cfg.evaluation {
        entries += sweep_entries(m, e.sweep.values().len(), cfg.k_values.len() + e.slepian_k_values.len());
    }
    guard(entries, "design-iq")?;
    let g = cfg.geometry.build()?;
    let source = cfg.source.spec();
    let model = covariance(&g, &source)?;

    let mut files = Vec::new();
    let mut summary = Vec::new();
    let mut curves = Vec::new();
    let mut rows = Table::new(&[
        "k",
        "row",
        "alpha",
        "relaxation_objective",
        "dual_bound",
        "rounded_objective",
        "feasible_trials",
        "trials",
        "sdp_iterations",
        "rank_one",
    ]);
    // Designs run one after another; each parallelizes its rounding trials.
    for &k in &cfg.k_values {
        let design = design_binary_iq(&model, k, &cfg.iq.options(meta.seed.wrapping_add(k as u64)))?;
        if !design.measurement.phi.iter().all(is_alphabet) {
            return Err(HarnessError::Numerical(format!("K={k} design left the {{1, -1, j, -j}} alphabet")));
        }
        let phi = design.measurement.normalized().effective();
        let mse = mse_closed_form(&phi, &model, 0.0)?;
        let slepian = mse_closed_form(&slepian_measurements(&model, k)?.effective(), &model, 0.0)?;
        for r in &design.rows {
            rows.push(&[
                k.to_string(),
                r.row.to_string(),
                num(r.alpha),
                num(r.relaxation_objective),
                num(r.dual_bound),
                num(r.rounded_objective),
                r.feasible_trials.to_string(),
                r.trials.to_string(),
                r.sdp_iterations.to_string(),
                r.rank_one.to_string(),
            ]);
        }
        let mut matrix = Table::new(&["k", "m", "re", "im"]);
        for i in 0..design.measurement.phi.nrows() {
            for j in 0..design.measurement.phi.ncols() {
                let z = design.measurement.phi[(i, j)];
                matrix.push(&[i.to_string(), j.to_string(), num(z.re), num(z.im)]);
            }
        }
        files.push(write_csv(out, &format!("phi_binary_iq_k{k}.csv"), meta, &matrix)?);
        let report = DesignReport {
            k,
            mse_normalized: mse.normalized,
            slepian_mse_normalized: slepian.normalized,
            rows: &design.rows,
        };
        files.push(write_json(out, &format!("design_k{k}.json"), meta, &report)?);
        summary.push(format!(
            "K={k}: binary-IQ normalized MSE {:.4e} (Slepian {:.4e})",
            mse.normalized, slepian.normalized
        ));
        curves.push(Curve { family: "binary_iq", k, phi });
    }
    files.push(write_csv(out, "design_rows.csv", meta, &rows)?);

    if let Some(e) = &cfg.evaluation {
        for &k in &e.slepian_k_values {
            curves.push(Curve { family: "slepian", k, phi: slepian_measurements(&model, k)?.effective() });
        }
        let table = sweep_table(&g, &model, &source, &e.interferer, &e.sweep, e.noise_var, &curves)?;
        summary.extend(summarize(&table, &curves));
        files.push(write_csv(out, "design_sweep.csv", meta, &table)?);
    }
    Ok(Outcome { files, summary })
}
