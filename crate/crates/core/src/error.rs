use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix [[{a}, {b}], [{c}, {d}]] has determinant {det}, expected 1")]
    Determinant { a: i64, b: i64, c: i64, d: i64, det: i64 },

    #[error("integer overflow in group arithmetic")]
    Overflow,

    #[error("point {re} + {im}i is not in the upper half plane")]
    NotUpperHalfPlane { re: f64, im: f64 },

    #[error("point {re} + {im}i violates the precision guard (imaginary part below {min})")]
    PrecisionGuard { re: f64, im: f64, min: f64 },

    #[error("seed element {0} is not in Gamma0({1})")]
    NotMember(String, i64),

    #[error("empty seed set")]
    EmptySeeds,

    #[error("integral toward the cusp diverges: nonzero q^0 part")]
    Divergent,

    #[error("eta product has fractional leading power {num}/24")]
    FractionalPower { num: i64 },

    #[error("invalid eta factor ({m}, {e}): multiplier and exponent must be positive")]
    EtaFactor { m: i64, e: i64 },

    #[error("form is not cuspidal")]
    NotCuspidal,

    #[error("weight mismatch: {0} vs {1}")]
    WeightMismatch(i64, i64),

    #[error("{what}: residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { what: String, residual: f64, tolerance: f64 },

    #[error("element is not polynomial-restricted")]
    NotRestricted,

    #[error("operator order bound violated at multi-index {index:?}: order {order}")]
    OrderBound { index: Vec<u32>, order: usize },

    #[error("{0}")]
    Flag(String),

    #[error("Lie closure violated at multi-index {index:?}: operator order {order}")]
    LieClosure { index: Vec<u32>, order: usize },

    #[error("rank deficient system: {0}")]
    RankDeficient(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("incompatible operands: {0}")]
    Incompatible(String),

    #[error("polynomial degree {degree} exceeds bound {bound}")]
    DegreeBound { degree: usize, bound: usize },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
