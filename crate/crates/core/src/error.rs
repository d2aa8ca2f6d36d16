use alloc::string::String;

pub type Result<T, E = SketchError> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SketchError {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("point id {0} is already stored")]
    DuplicateId(u64),

    #[error("stream exceeded its declared bound of {bound} points")]
    StreamBound { bound: u64 },

    #[error("timestamp {got} precedes the last update at {last}")]
    OutOfOrder { last: u64, got: u64 },

    #[error("grid clock mode does not accept {0}")]
    ClockMode(&'static str),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("unsatisfiable: {0}")]
    Unsatisfiable(String),
}

impl SketchError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        SketchError::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(SketchError::Dimension { expected, found })
        }
    }
}
