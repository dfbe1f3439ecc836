use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("gamma must lie in the open interval (0, 1), got {0}")]
    GammaOutOfRange(f64),
    #[error("q0 must be at least 2, got {0}")]
    Q0TooSmall(u64),
    #[error("lambda0 must lie in the open interval (0, 1), got {0}")]
    Lambda0OutOfRange(f64),
    #[error("scale X must be finite and greater than 1, got {0}")]
    ScaleOutOfRange(f64),
    #[error("epsilon must be finite and positive, got {0}")]
    EpsilonOutOfRange(f64),
    #[error("instance too small: Delta = {delta} is not below H = {h}")]
    DeltaNotBelowH { delta: f64, h: f64 },
    #[error("sieve limit {0} outside [2, 2^40]")]
    SieveLimit(u64),
    #[error("range upper end {hi} exceeds the prime table limit {limit}")]
    RangeBeyondTable { hi: f64, limit: u64 },
    #[error("prime set was built for a different gamma or range than the run parameters")]
    SetMismatch,
    #[error("kernel parameter out of domain: {0}")]
    KernelDomain(&'static str),
    #[error("kernel does not match the run: {0}")]
    KernelMismatch(&'static str),
    #[error("phase argument {0} too large for double precision reduction")]
    PrecisionExhausted(f64),
    #[error("quadrature did not converge after {panels} panels")]
    NoConvergence { panels: usize },
    #[error("numerator and denominator are not coprime: {a}/{q}")]
    NotCoprime { a: i64, q: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("t = {t} lies outside the band [{delta}, {h}]")]
    OutsideBand { t: f64, delta: f64, h: f64 },
    #[error("approximation could not be verified for x = {0}")]
    VerificationFailed(f64),
}
