use std::path::{Path, PathBuf};

use clap::ValueEnum;
use slepbeam::geometry::delays;
use slepbeam::iqdesign::design_binary_iq;
use slepbeam::measure::{default_frequency_grid, random_measurements, slepian_measurements, unimodular_measurements};
use slepbeam::{ArrayGeometry, CovarianceModel, DMatrix, SourceSpec, C64};

use crate::config::{ExperimentConfig, Family, IqConfig};
use crate::error::HarnessError;
use crate::output::Meta;

mod decimate;
mod design;
mod interference;
mod mse;
mod spectrum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Spectrum,
    MseSweep,
    InterferenceSweep,
    DesignIq,
    DecimateRecover,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::MseSweep => "mse-sweep",
            Self::InterferenceSweep => "interference-sweep",
            Self::DesignIq => "design-iq",
            Self::DecimateRecover => "decimate-recover",
        }
    }
}

/// Files written and one-line summaries for the terminal.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

pub fn run(cmd: Command, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, HarnessError> {
    let meta = Meta {
        version: env!("CARGO_PKG_VERSION"),
        command: cmd.name(),
        scenario: cfg.scenario.clone(),
        config_sha256: cfg.hash(),
        seed: cfg.seed,
    };
    let missing = || HarnessError::config(format!("config has no `{}` section", cmd.name().replace('-', "_")));
    match cmd {
        Command::Spectrum => spectrum::run(cfg.spectrum.as_ref().ok_or_else(missing)?, &meta, out_dir),
        Command::MseSweep => mse::run(cfg.mse_sweep.as_ref().ok_or_else(missing)?, &meta, out_dir),
        Command::InterferenceSweep => {
            interference::run(cfg.interference_sweep.as_ref().ok_or_else(missing)?, &meta, out_dir)
        }
        Command::DesignIq => design::run(cfg.design_iq.as_ref().ok_or_else(missing)?, &meta, out_dir),
        Command::DecimateRecover => decimate::run(cfg.decimate_recover.as_ref().ok_or_else(missing)?, &meta, out_dir),
    }
}

pub(crate) struct ReadoutContext<'a> {
    pub model: &'a CovarianceModel,
    pub geometry: &'a ArrayGeometry,
    pub source: &'a SourceSpec,
    pub seed: u64,
    pub normalize: bool,
    pub iq: &'a IqConfig,
}

/// Readout matrix for one sweep point.
pub(crate) fn readout(ctx: &ReadoutContext, family: Family, k: usize) -> Result<DMatrix<C64>, HarnessError> {
    let point_seed = ctx.seed.wrapping_add(k as u64);
    let m = match family {
        Family::Slepian => slepian_measurements(ctx.model, k)?,
        Family::Unimodular => {
            let freqs = default_frequency_grid(ctx.source.carrier_hz, ctx.source.half_bandwidth_hz, k);
            unimodular_measurements(&freqs, &delays(ctx.geometry, &ctx.source.doa), false)?
        }
        Family::RandomGaussian => random_measurements(k, ctx.geometry.len(), point_seed, false)?,
        Family::BinaryIq => design_binary_iq(ctx.model, k, &ctx.iq.options(point_seed))?.measurement,
    };
    let m = if ctx.normalize { m.normalized() } else { m };
    Ok(m.effective())
}
