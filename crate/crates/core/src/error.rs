use alloc::string::String;
use core::fmt;

/// Errors raised by model fitting and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The dataset violates a structural invariant (shape, labels, names).
    InvalidData(String),
    /// A column has zero standard deviation and cannot be standardized.
    ConstantColumn { variable: String },
    /// The data at hand carries no usable variation (e.g. all cases identical).
    DegenerateData(&'static str),
    /// A fit or diagnostic parameter is out of range.
    InvalidConfig(String),
    DimensionMismatch { expected: usize, found: usize },
    /// The dataset does not match the one the model was trained on.
    FingerprintMismatch { expected: u64, found: u64 },
    UnknownNode(usize),
    UnknownTree(usize),
    UnknownClass(usize),
    /// No case was out-of-bag in any tree.
    NoOobCases,
    /// ROC is undefined when every scored case falls in one group.
    UndefinedCurve(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidData(msg) => write!(f, "invalid data: {msg}"),
            Error::ConstantColumn { variable } => {
                write!(f, "variable `{variable}` is constant and cannot be standardized")
            }
            Error::DegenerateData(msg) => write!(f, "degenerate data: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected} columns, found {found}")
            }
            Error::FingerprintMismatch { expected, found } => write!(
                f,
                "dataset fingerprint {found:016x} does not match the training data ({expected:016x})"
            ),
            Error::UnknownNode(id) => write!(f, "unknown node id {id}"),
            Error::UnknownTree(id) => write!(f, "unknown tree id {id}"),
            Error::UnknownClass(id) => write!(f, "unknown class id {id}"),
            Error::NoOobCases => write!(f, "no case was out-of-bag in any tree"),
            Error::UndefinedCurve(msg) => write!(f, "ROC curve undefined: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
