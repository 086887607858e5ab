//! Experiment configuration: JSON files validated against the published
//! schema, then deserialized and checked for physical consistency.

use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use slepbeam::geometry::{build_circular, build_random_linear, build_ula, build_upa};
use slepbeam::{ArrayGeometry, ArrayKind, DirectionOfArrival, SdpMethod, SdpOptions, SourceSpec};

use crate::error::HarnessError;

/// The schema shipped with the crate. `schema_is_current` in the tests keeps
/// it in sync with the types below.
pub const PUBLISHED_SCHEMA: &str = include_str!("../schema/experiment.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-form identifier copied into every output header.
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse_sweep: Option<MseSweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interference_sweep: Option<InterferenceSweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_iq: Option<DesignIqConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimate_recover: Option<DecimateRecoverConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    /// Half-wavelength uniform linear array on the x-axis.
    Ula { elements: usize, carrier_hz: f64 },
    /// Half-wavelength `rows x cols` planar array in the x-y plane.
    Upa { rows: usize, cols: usize, carrier_hz: f64 },
    /// Ring with half-wavelength arc spacing.
    Circular { elements: usize, carrier_hz: f64 },
    /// Uniform random positions on `[0, elements * spacing_m]`.
    RandomLinear { elements: usize, spacing_m: f64, layout_seed: u64 },
    Custom { carrier_hz: f64, positions_m: Vec<[f64; 3]> },
}

impl GeometrySpec {
    pub fn elements(&self) -> usize {
        match self {
            Self::Ula { elements, .. } | Self::Circular { elements, .. } | Self::RandomLinear { elements, .. } => *elements,
            Self::Upa { rows, cols, .. } => rows.saturating_mul(*cols),
            Self::Custom { positions_m, .. } => positions_m.len(),
        }
    }

    pub fn build(&self) -> Result<ArrayGeometry, HarnessError> {
        let g = match self {
            Self::Ula { elements, carrier_hz } => build_ula(*elements, *carrier_hz),
            Self::Upa { rows, cols, carrier_hz } => build_upa(*rows, *cols, *carrier_hz),
            Self::Circular { elements, carrier_hz } => build_circular(*elements, *carrier_hz),
            Self::RandomLinear { elements, spacing_m, layout_seed } => {
                build_random_linear(*elements, *spacing_m, *layout_seed)
            }
            Self::Custom { carrier_hz, positions_m } => {
                ArrayGeometry::new(ArrayKind::Custom, *carrier_hz, positions_m.clone())
            }
        };
        g.map_err(|e| HarnessError::config(format!("geometry: {e}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DirectionConfig {
    pub azimuth_deg: f64,
    #[serde(default)]
    pub elevation_deg: f64,
}

impl DirectionConfig {
    pub fn doa(&self) -> DirectionOfArrival {
        DirectionOfArrival::from_degrees(self.azimuth_deg, self.elevation_deg)
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub carrier_hz: f64,
    pub half_bandwidth_hz: f64,
    /// PSD height `gamma`.
    #[serde(default = "one")]
    pub power: f64,
    pub azimuth_deg: f64,
    #[serde(default)]
    pub elevation_deg: f64,
}

impl SourceConfig {
    pub fn spec(&self) -> SourceSpec {
        let doa = DirectionOfArrival::from_degrees(self.azimuth_deg, self.elevation_deg);
        SourceSpec::new(self.carrier_hz, self.half_bandwidth_hz, self.power, doa)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub cases: Vec<SpectrumCase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SpectrumCase {
    pub label: String,
    pub geometry: GeometrySpec,
    pub carrier_hz: f64,
    pub direction: DirectionConfig,
    /// One spectrum per entry.
    pub half_bandwidths_hz: Vec<f64>,
    /// Number of leading eigenvalues to emit; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_index: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Slepian,
    Unimodular,
    RandomGaussian,
    BinaryIq,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Slepian => "slepian",
            Self::Unimodular => "unimodular",
            Self::RandomGaussian => "random_gaussian",
            Self::BinaryIq => "binary_iq",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SdpMethodConfig {
    InteriorPoint,
    LowRank,
    Admm,
}

fn default_trials() -> usize {
    2000
}

fn default_sdp_tolerance() -> f64 {
    1e-8
}

fn default_sdp_iterations() -> usize {
    20_000
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct IqConfig {
    #[serde(default = "default_trials")]
    pub rounding_trials: usize,
    /// Cross-correlation bound; derived from the earlier rows when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_method")]
    pub sdp_method: SdpMethodConfig,
    #[serde(default = "default_sdp_tolerance")]
    pub sdp_tolerance: f64,
    #[serde(default = "default_sdp_iterations")]
    pub sdp_max_iterations: usize,
}

fn default_method() -> SdpMethodConfig {
    SdpMethodConfig::InteriorPoint
}

impl Default for IqConfig {
    fn default() -> Self {
        Self {
            rounding_trials: default_trials(),
            alpha: None,
            sdp_method: default_method(),
            sdp_tolerance: default_sdp_tolerance(),
            sdp_max_iterations: default_sdp_iterations(),
        }
    }
}

impl IqConfig {
    pub fn options(&self, seed: u64) -> slepbeam::DesignOptions {
        let method = match self.sdp_method {
            SdpMethodConfig::InteriorPoint => SdpMethod::InteriorPoint,
            SdpMethodConfig::LowRank => SdpMethod::LowRank,
            SdpMethodConfig::Admm => SdpMethod::Admm,
        };
        let sdp = SdpOptions {
            method,
            tol: self.sdp_tolerance,
            max_iterations: self.sdp_max_iterations,
            seed: seed ^ 0x5d9,
            ..SdpOptions::default()
        };
        slepbeam::DesignOptions { alpha: self.alpha, trials: self.rounding_trials, seed, sdp }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FamilySweep {
    pub family: Family,
    pub k_values: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MseSweepConfig {
    pub geometry: GeometrySpec,
    pub source: SourceConfig,
    #[serde(default)]
    pub noise_var: f64,
    /// Scale every matrix to unit spectral norm before evaluation.
    #[serde(default = "yes")]
    pub normalize: bool,
    pub families: Vec<FamilySweep>,
    /// Monte Carlo trials per point in addition to the closed form; 0 skips.
    #[serde(default)]
    pub monte_carlo_trials: usize,
    #[serde(default)]
    pub iq: IqConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "axis", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepAxis {
    /// Interferer azimuth; the elevation stays at the interferer's value.
    InterfererAzimuth { start_deg: f64, stop_deg: f64, step_deg: f64 },
    /// `10 log10(gamma_1 / gamma_0)`.
    DynamicRange { start_db: f64, stop_db: f64, step_db: f64 },
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            Self::InterfererAzimuth { .. } => "interferer_azimuth_deg",
            Self::DynamicRange { .. } => "dynamic_range_db",
        }
    }

    /// Inclusive grid `start, start + step, ...` up to `stop`.
    pub fn values(&self) -> Vec<f64> {
        let (a, b, s) = match *self {
            Self::InterfererAzimuth { start_deg, stop_deg, step_deg } => (start_deg, stop_deg, step_deg),
            Self::DynamicRange { start_db, stop_db, step_db } => (start_db, stop_db, step_db),
        };
        let n = ((b - a) / s + 1e-9).floor();
        if !(n >= 0.0) {
            return vec![];
        }
        (0..=n as usize).map(|i| a + i as f64 * s).collect()
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let (a, b, s) = match *self {
            Self::InterfererAzimuth { start_deg, stop_deg, step_deg } => (start_deg, stop_deg, step_deg),
            Self::DynamicRange { start_db, stop_db, step_db } => (start_db, stop_db, step_db),
        };
        if !(a.is_finite() && b.is_finite() && s.is_finite() && s > 0.0) {
            return Err(HarnessError::config("sweep bounds must be finite with a positive step"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct InterferenceSweepConfig {
    pub geometry: GeometrySpec,
    pub signal: SourceConfig,
    /// Template interferer; the sweep axis overrides one of its fields.
    pub interferer: SourceConfig,
    #[serde(default)]
    pub noise_var: f64,
    pub families: Vec<FamilySweep>,
    pub sweep: SweepAxis,
    #[serde(default)]
    pub iq: IqConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DesignIqConfig {
    pub geometry: GeometrySpec,
    pub source: SourceConfig,
    pub k_values: Vec<usize>,
    #[serde(default)]
    pub iq: IqConfig,
    /// Optional interference sweep of each design against Slepian rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<DesignEvaluation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DesignEvaluation {
    pub interferer: SourceConfig,
    pub sweep: SweepAxis,
    #[serde(default)]
    pub noise_var: f64,
    #[serde(default)]
    pub slepian_k_values: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum BasisConfig {
    Slepian,
    Fourier,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum RecoveryMethod {
    /// Regularized sinc-kernel system solved by conjugate residuals.
    Cgd { snapshots: usize, delta: f64, eps: f64, max_iterations: usize },
    /// Overlapping tapered frames solved online.
    Streaming { frame_len_s: f64, overlap_s: f64, frames: usize, extra_basis: usize, basis: BasisConfig },
}

fn default_tones() -> usize {
    slepbeam::signal::DEFAULT_TONES
}

fn default_interior() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DecimateRecoverConfig {
    pub geometry: GeometrySpec,
    pub source: SourceConfig,
    /// Slepian readout rows; `subspace dimension + k_extra` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub k_extra: usize,
    /// Snapshot rate; `1 / T_d` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_rate_hz: Option<f64>,
    #[serde(default = "default_tones")]
    pub tones: usize,
    #[serde(default)]
    pub noise_var: f64,
    /// Fraction of the record dropped at each end when scoring.
    #[serde(default = "default_interior")]
    pub edge_fraction: f64,
    /// Print the snapshot schedule and stop.
    #[serde(default)]
    pub dry_run: bool,
    pub recovery: RecoveryMethod,
}

impl ExperimentConfig {
    /// Schema check, deserialization and semantic validation.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| HarnessError::config(format!("not valid JSON: {e}")))?;
        validate_against_schema(&value)?;
        let cfg: Self = serde_json::from_value(value).map_err(|e| HarnessError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if let Some(s) = &self.spectrum {
            for c in &s.cases {
                check_geometry(&c.geometry)?;
                positive("carrier_hz", c.carrier_hz)?;
                for &w in &c.half_bandwidths_hz {
                    nonnegative("half_bandwidths_hz", w)?;
                }
            }
        }
        if let Some(m) = &self.mse_sweep {
            check_geometry(&m.geometry)?;
            check_source(&m.source)?;
            nonnegative("noise_var", m.noise_var)?;
            check_families(&m.families, m.geometry.elements())?;
            check_iq(&m.iq)?;
        }
        if let Some(i) = &self.interference_sweep {
            check_geometry(&i.geometry)?;
            check_source(&i.signal)?;
            check_source(&i.interferer)?;
            nonnegative("noise_var", i.noise_var)?;
            check_families(&i.families, i.geometry.elements())?;
            i.sweep.validate()?;
            check_iq(&i.iq)?;
        }
        if let Some(d) = &self.design_iq {
            check_geometry(&d.geometry)?;
            check_source(&d.source)?;
            check_ks(&d.k_values, d.geometry.elements())?;
            check_iq(&d.iq)?;
            if let Some(e) = &d.evaluation {
                check_source(&e.interferer)?;
                e.sweep.validate()?;
                nonnegative("noise_var", e.noise_var)?;
                check_ks(&e.slepian_k_values, d.geometry.elements())?;
            }
        }
        if let Some(d) = &self.decimate_recover {
            check_geometry(&d.geometry)?;
            check_source(&d.source)?;
            if d.source.half_bandwidth_hz <= 0.0 {
                return Err(HarnessError::config("decimated recovery needs a positive half bandwidth"));
            }
            if let Some(k) = d.k {
                check_ks(&[k], d.geometry.elements())?;
            }
            if let Some(r) = d.snapshot_rate_hz {
                positive("snapshot_rate_hz", r)?;
            }
            nonnegative("noise_var", d.noise_var)?;
            if !(0.0..0.5).contains(&d.edge_fraction) {
                return Err(HarnessError::config("edge_fraction must lie in [0, 0.5)"));
            }
            if d.tones == 0 {
                return Err(HarnessError::config("tones must be at least 1"));
            }
            match d.recovery {
                RecoveryMethod::Cgd { snapshots, delta, eps, max_iterations } => {
                    positive("delta", delta)?;
                    positive("eps", eps)?;
                    if snapshots == 0 || max_iterations == 0 {
                        return Err(HarnessError::config("snapshots and max_iterations must be positive"));
                    }
                }
                RecoveryMethod::Streaming { frame_len_s, overlap_s, frames, .. } => {
                    positive("frame_len_s", frame_len_s)?;
                    positive("overlap_s", overlap_s)?;
                    if frames == 0 {
                        return Err(HarnessError::config("frames must be positive"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn validate_against_schema(value: &serde_json::Value) -> Result<(), HarnessError> {
    let schema: serde_json::Value = serde_json::from_str(PUBLISHED_SCHEMA).expect("bundled schema is JSON");
    let validator = jsonschema::validator_for(&schema).expect("bundled schema compiles");
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{}: {e}", e.instance_path)).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::config(format!("schema violation: {}", errors.join("; "))))
    }
}

/// The schema generated from the config types.
pub fn generated_schema() -> String {
    let schema = schemars::schema_for!(ExperimentConfig);
    serde_json::to_string_pretty(&schema).expect("schema serializes") + "\n"
}

fn positive(name: &str, v: f64) -> Result<(), HarnessError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(HarnessError::config(format!("{name} must be positive, got {v}")))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<(), HarnessError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(HarnessError::config(format!("{name} must be nonnegative, got {v}")))
    }
}

fn check_geometry(g: &GeometrySpec) -> Result<(), HarnessError> {
    if g.elements() == 0 {
        return Err(HarnessError::config("geometry has no elements"));
    }
    match g {
        GeometrySpec::Ula { carrier_hz, .. }
        | GeometrySpec::Upa { carrier_hz, .. }
        | GeometrySpec::Circular { carrier_hz, .. }
        | GeometrySpec::Custom { carrier_hz, .. } => positive("carrier_hz", *carrier_hz),
        GeometrySpec::RandomLinear { spacing_m, .. } => positive("spacing_m", *spacing_m),
    }
}

fn check_source(s: &SourceConfig) -> Result<(), HarnessError> {
    positive("carrier_hz", s.carrier_hz)?;
    nonnegative("half_bandwidth_hz", s.half_bandwidth_hz)?;
    nonnegative("power", s.power)?;
    if !(s.azimuth_deg.is_finite() && s.elevation_deg.is_finite()) {
        return Err(HarnessError::config("angles must be finite"));
    }
    Ok(())
}

fn check_ks(ks: &[usize], m: usize) -> Result<(), HarnessError> {
    match ks.iter().find(|&&k| k == 0 || k > m) {
        Some(k) => Err(HarnessError::config(format!("K = {k} is outside 1..={m}"))),
        None => Ok(()),
    }
}

fn check_families(f: &[FamilySweep], m: usize) -> Result<(), HarnessError> {
    f.iter().try_for_each(|s| check_ks(&s.k_values, m))
}

fn check_iq(iq: &IqConfig) -> Result<(), HarnessError> {
    if iq.rounding_trials == 0 {
        return Err(HarnessError::config("rounding_trials must be positive"));
    }
    if let Some(a) = iq.alpha {
        positive("alpha", a)?;
    }
    positive("sdp_tolerance", iq.sdp_tolerance)
}
