use std::path::Path;

use rayon::prelude::*;
use slepbeam::geometry::effective_aperture;
use slepbeam::slepian::covariance;
use slepbeam::{SourceSpec, SPEED_OF_LIGHT};

use super::Outcome;
use crate::config::SpectrumConfig;
use crate::error::HarnessError;
use crate::output::{guard, num, write_csv, Meta, Table};

pub fn run(cfg: &SpectrumConfig, meta: &Meta, out: &Path) -> Result<Outcome, HarnessError> {
    let entries: f64 = cfg.cases.iter().map(|c| 3.0 * (c.geometry.elements() as f64).powi(2) * c.half_bandwidths_hz.len() as f64).sum();
    guard(entries, "spectrum")?;
    let geometries = cfg.cases.iter().map(|c| c.geometry.build()).collect::<Result<Vec<_>, _>>()?;
    let points: Vec<(usize, f64)> =
        cfg.cases.iter().enumerate().flat_map(|(i, c)| c.half_bandwidths_hz.iter().map(move |&w| (i, w))).collect();
    let spectra = points
        .par_iter()
        .map(|&(i, omega)| {
            let c = &cfg.cases[i];
            let src = SourceSpec::new(c.carrier_hz, omega, 1.0, c.direction.doa());
            Ok(covariance(&geometries[i], &src)?.eigenvalues().to_vec())
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let mut table = Table::new(&["label", "half_bandwidth_hz", "time_bandwidth", "k", "eigenvalue", "eigenvalue_over_first"]);
    let mut summary = Vec::new();
    for (&(i, omega), values) in points.iter().zip(&spectra) {
        let c = &cfg.cases[i];
        let tb = 2.0 * omega * effective_aperture(&geometries[i], &c.direction.doa()) / SPEED_OF_LIGHT;
        let top = values.first().copied().unwrap_or(0.0);
        let shown = c.max_index.unwrap_or(values.len()).min(values.len());
        for (k, &v) in values.iter().take(shown).enumerate() {
            let rel = if top > 0.0 { v / top } else { 0.0 };
            table.push(&[c.label.clone(), num(omega), num(tb), (k + 1).to_string(), num(v), num(rel)]);
        }
        let above_half = values.iter().filter(|&&v| v >= 0.5).count();
        summary.push(format!("{} omega={omega:e} Hz: 2TΩ={tb:.3}, eigenvalues >= 1/2: {above_half}", c.label));
    }
    let file = write_csv(out, "spectrum.csv", meta, &table)?;
    Ok(Outcome { files: vec![file], summary })
}
