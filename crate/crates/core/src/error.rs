use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A parameter is outside the mathematical domain of the operation
    /// (for example a half bandwidth above 1/2, which aliases).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular system: {0}")]
    Singular(String),

    /// Zero effective aperture: temporal decimation is impossible because
    /// every element sees the wavefront at the same instant.
    #[error("degenerate aperture: the array has zero depth along the arrival direction")]
    DegenerateAperture,

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no feasible candidate for row {row} after {trials} rounding trials")]
    NoFeasibleCandidate { row: usize, trials: usize },

    #[error("rank-deficient normal equations at frame {frame}")]
    RankDeficient { frame: usize },

    #[error("unreachable approximation error {eps:.3e} with rank <= {max_rank}")]
    Unreachable { eps: f64, max_rank: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}
