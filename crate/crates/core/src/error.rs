use alloc::string::String;
use core::fmt;

/// Errors raised by the library. Verification failures of a Schottky system
/// are reported as data (see [`crate::schottky::ViolationReport`]), not here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    ZeroVector,
    DimensionMismatch { expected: usize, found: usize },
    PointNotOnHyperplane,
    InvalidRadii(String),
    BadModulus(u64),
    ModulusTooLarge { n: usize, modulus: u64 },
    CapExceeded { cap: usize },
    NotUnimodular,
    IndexOutOfRange { index: usize, len: usize },
    PreconditionViolated(String),
    SearchExhausted(String),
    EqualFunctions,
    EmptyModuli,
    Malformed(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ZeroVector => write!(f, "zero vector has no projective class"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::PointNotOnHyperplane => write!(f, "point does not lie on the hyperplane"),
            Error::InvalidRadii(s) => write!(f, "invalid radii: {s}"),
            Error::BadModulus(d) => write!(f, "unsupported modulus {d}"),
            Error::ModulusTooLarge { n, modulus } => {
                write!(
                    f,
                    "matrices of size {n} mod {modulus} do not pack into a 64-bit key"
                )
            }
            Error::CapExceeded { cap } => write!(f, "closure exceeded the cap of {cap} elements"),
            Error::NotUnimodular => write!(f, "matrix does not have determinant 1"),
            Error::IndexOutOfRange { index, len } => {
                write!(
                    f,
                    "generator index {index} out of range for {len} generators"
                )
            }
            Error::PreconditionViolated(s) => write!(f, "precondition violated: {s}"),
            Error::SearchExhausted(s) => write!(f, "search exhausted: {s}"),
            Error::EqualFunctions => write!(f, "the two bit strings are equal"),
            Error::EmptyModuli => write!(f, "no moduli given"),
            Error::Malformed(s) => write!(f, "malformed input: {s}"),
        }
    }
}

impl core::error::Error for Error {}
