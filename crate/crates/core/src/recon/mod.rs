//! Reconstruction from compressive readout, error evaluation, interference
//! analysis, streaming and nonuniform-to-uniform recovery, and beamforming
//! references.

pub mod beamsum;
pub mod cgd;
pub mod interference;
pub mod mmse;
pub mod streaming;

pub use beamsum::{
    fractional_delay_beamsum, narrowband_beamsum, normalized_error, normalized_mse, true_time_delay_noisy,
    true_time_delay_reference, BeamsumOutput, FractionalDelayFilter,
};
pub use cgd::{cgd_uniform_recovery, merge_coincident, CgdOptions, CgdRecovery};
pub use interference::{
    composite_covariance, mmse_interference_estimate, mse_with_interference, separated, CompositeCovariance,
    SceneModel,
};
pub use mmse::{mc_mse, mmse_estimate, mse_closed_form, McEstimate, MmseReconstructor, Mse, ReconstructionReport};
pub use streaming::{BasisFamily, FrameBasisPlan, StreamingLs};
