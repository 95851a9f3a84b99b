use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("{what} row {row} is not on the simplex (sum {sum}, min {min})")]
    OffSimplex {
        what: &'static str,
        row: usize,
        sum: f64,
        min: f64,
    },
    #[error("weights are not symmetric at edge ({0}, {1}); symmetrize first")]
    NonSymmetric(usize, usize),
    #[error("edge ({0}, {1}) references a node outside the graph")]
    EdgeOutOfRange(usize, usize),
    #[error("history holds {available} past states but delay index {needed} was requested")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("point lies outside the {what} component by {excess}")]
    OutsideComponent { what: &'static str, excess: f64 },
    #[error("non-finite value in {component} at step {step}")]
    NonFinite { component: &'static str, step: usize },
    #[error("domain violation after step {step}: {detail}")]
    DomainViolation { step: usize, detail: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(what: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { what, expected, found }
    }
}

pub(crate) fn ensure_len(what: &'static str, expected: usize, v: &[f64]) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::dims(what, expected, v.len()))
    }
}
