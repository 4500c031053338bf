use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what}: expected length {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("backward called before forward")]
    NoForwardCache,
    #[error("network architectures differ")]
    ArchitectureMismatch,
    #[error("channel {0} has zero mean probe gain")]
    DegenerateChannel(usize),
    #[error("positions coincide; angle is undefined")]
    CoincidentPositions,
    #[error("replay buffer holds {have} transitions, need {needed}")]
    InsufficientBuffer { needed: usize, have: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            found,
        })
    }
}
