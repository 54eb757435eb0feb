use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("exponent {0} is outside the series exponent lattice")]
    ExponentOffLattice(String),
    #[error("series is not invertible: {0}")]
    NotInvertible(String),
    #[error("q-exponent {exponent} is not below the truncation order {order}")]
    OrderExceeded { exponent: String, order: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("lattice basis is singular")]
    SingularBasis,
    #[error("lattice invariant violated: {0}")]
    InvariantViolation(String),
    #[error("enumeration would visit about {predicted} vectors, above the cap of {cap}")]
    CutoffTooLarge { predicted: u64, cap: u64 },
    #[error("precision loss: tail estimate {tail:e} against partial sum {sum:e}")]
    PrecisionLoss { tail: f64, sum: f64 },
    #[error("tolerance exceeded in {transformation} at tau={tau}, z={z}: deviation {deviation:e}")]
    ToleranceExceeded {
        transformation: String,
        tau: String,
        z: String,
        deviation: f64,
    },
    #[error("identity violated: {0}")]
    IdentityViolation(String),
    #[error("residual antiholomorphic dependence: {0}")]
    HolomorphyFailure(String),
    #[error("unsupported dimension D={0}")]
    UnsupportedDimension(usize),
    #[error("result {0} is not an integer")]
    NonIntegral(String),
}
