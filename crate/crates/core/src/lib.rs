//! Broadband plane-wave array models built on Slepian (prolate) subspaces.
//!
//! The crate covers array geometry and delay profiles, prolate and
//! generalized prolate covariance models, signal synthesis, compressive
//! linear readout, MMSE reconstruction (with interference), streaming and
//! nonuniform-to-uniform recovery from temporally decimated snapshots, and
//! binary-IQ measurement design by semidefinite relaxation.

pub mod error;
pub mod geometry;
pub mod io;
pub mod iqdesign;
pub mod linalg;
pub mod lowrank;
pub mod measure;
pub mod recon;
pub mod sdp;
pub mod signal;
pub mod slepian;

pub use nalgebra::{DMatrix, DVector};
pub type C64 = nalgebra::Complex<f64>;

pub use error::{Error, Result};
pub use geometry::{ArrayGeometry, ArrayKind, DelayProfile, DirectionOfArrival, SPEED_OF_LIGHT};
pub use iqdesign::{BinaryIqDesign, DesignOptions, RealifiedSubspaces, RowReport};
pub use lowrank::LowRankFactor;
pub use measure::{MeasurementFamily, MeasurementMatrix, NormPolicy};
pub use recon::{ReconstructionReport, SceneModel};
pub use sdp::{SdpMethod, SdpOptions, SdpProblem, SdpSolution};
pub use signal::{SnapshotEnsemble, SourceSpec, SyntheticSignal};
pub use slepian::{CovarianceModel, ProlateSpec};
