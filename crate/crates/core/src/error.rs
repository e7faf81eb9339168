use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("generic sampling failed after {attempts} attempts (last rank {last_rank}, target {target_rank})")]
    SamplingFailure {
        attempts: usize,
        last_rank: usize,
        target_rank: usize,
    },

    #[error("no stress vanishes nowhere: framework is not redundantly rigid")]
    NotRedundant,

    #[error("framework has no nonzero equilibrium stress")]
    NoStress,

    #[error("stress projection collapsed to zero")]
    ProjectionCollapse,

    #[error("split vertex and its neighbours are affinely degenerate")]
    AffineDegeneracy,

    #[error(
        "perturbation to a generic framework failed after {iterations} shrink iterations: {reason}"
    )]
    PerturbationFailure { iterations: usize, reason: String },

    #[error("stress space has dimension {dimension}, expected a unique stress")]
    StressSpaceNotUnique { dimension: usize },

    #[error("certification check failed: {0}")]
    CertificationFailed(String),

    #[error("invalid sequence at step {index}: {source}")]
    InvalidSequence { index: usize, source: Box<Error> },

    #[error("step {index} failed: {source}")]
    Step { index: usize, source: Box<Error> },

    #[error("stress space dimension {dimension} at prefix {index} of a pure Hennenberg sequence, expected 1")]
    StressDimension { index: usize, dimension: usize },
}

impl Error {
    /// Stable kebab-case name, used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::PreconditionViolation(_) => "precondition-violation",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::SamplingFailure { .. } => "sampling-failure",
            Error::NotRedundant => "not-redundant",
            Error::NoStress => "no-stress",
            Error::ProjectionCollapse => "projection-collapse",
            Error::AffineDegeneracy => "affine-degeneracy",
            Error::PerturbationFailure { .. } => "perturbation-failure",
            Error::StressSpaceNotUnique { .. } => "stress-space-not-unique",
            Error::CertificationFailed(_) => "certification-failed",
            Error::InvalidSequence { .. } => "invalid-sequence",
            Error::Step { source, .. } => source.name(),
            Error::StressDimension { .. } => "stress-dimension",
        }
    }

    /// Strips step wrappers and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } | Error::InvalidSequence { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_step(self, index: usize) -> Self {
        Error::Step {
            index,
            source: Box::new(self),
        }
    }
}
