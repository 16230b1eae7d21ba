use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    Domain(String),
    /// The operation is not available for this chain or observable.
    Unsupported(String),
    /// A state does not belong to the chain's state space.
    Lookup(String),
    /// Inputs are well-formed but cannot be used together.
    Usage(String),
    /// A table or support would exceed the desk-scale size limit.
    Size(String),
    /// A fit or diagnostic has too little usable data.
    Degenerate(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Unsupported(m) => write!(f, "unsupported operation: {m}"),
            Error::Lookup(m) => write!(f, "lookup error: {m}"),
            Error::Usage(m) => write!(f, "usage error: {m}"),
            Error::Size(m) => write!(f, "size error: {m}"),
            Error::Degenerate(m) => write!(f, "degenerate input: {m}"),
        }
    }
}

impl core::error::Error for Error {}

macro_rules! domain {
    ($($arg:tt)*) => { $crate::Error::Domain(alloc::format!($($arg)*)) };
}
pub(crate) use domain;
