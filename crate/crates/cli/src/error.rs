use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("infeasible design: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) | Self::Io(_) => 3,
            Self::Infeasible(_) => 4,
        }
    }
}

impl From<slepbeam::Error> for HarnessError {
    fn from(e: slepbeam::Error) -> Self {
        use slepbeam::Error as E;
        match e {
            E::InvalidArgument(_) | E::Domain(_) | E::DimensionMismatch { .. } | E::DegenerateAperture => {
                Self::Config(e.to_string())
            }
            E::Infeasible(_) | E::NoFeasibleCandidate { .. } => Self::Infeasible(e.to_string()),
            E::Io(io) => Self::Io(io),
            _ => Self::Numerical(e.to_string()),
        }
    }
}
