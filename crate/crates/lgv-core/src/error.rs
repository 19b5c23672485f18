//! Error type shared by all numeric operations.

use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Inputs violate a documented precondition (shape mismatch, empty
    /// collection, out-of-range argument, ...).
    InvalidArgument(String),
    /// A weight vector is bound to a different model spec than the one it
    /// is used with.
    SpecMismatch { expected: u64, found: u64 },
    /// Training produced a non-finite loss.
    TrainingDiverged { epoch: usize },
    /// An attack hit a non-finite gradient.
    NonFiniteGradient { iteration: usize },
    /// Not enough examples survive a correctness filter; carries how many
    /// were available.
    InsufficientExamples { requested: usize, available: usize },
    /// Two anchor points that were supposed to span a plane are collinear.
    DegeneratePlane,
    /// Malformed binary payload (IDX parsing).
    Format(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::SpecMismatch { expected, found } => write!(
                f,
                "weight vector bound to spec {found:#x}, expected {expected:#x}"
            ),
            Error::TrainingDiverged { epoch } => {
                write!(f, "training diverged (non-finite loss) at epoch {epoch}")
            }
            Error::NonFiniteGradient { iteration } => {
                write!(f, "non-finite attack gradient at iteration {iteration}")
            }
            Error::InsufficientExamples {
                requested,
                available,
            } => write!(
                f,
                "requested {requested} examples but only {available} are classified correctly by every target"
            ),
            Error::DegeneratePlane => write!(f, "anchor points are collinear; plane is degenerate"),
            Error::Format(msg) => write!(f, "malformed data: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl fmt::Display) -> Error {
    Error::InvalidArgument(alloc::format!("{msg}"))
}
