use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("prime list insufficient: primes up to {required} are required, list ends at {available}")]
    InsufficientPrimes { required: u64, available: u64 },

    #[error("invalid range [{lo}, {hi}): need 1 <= lo < hi")]
    InvalidRange { lo: u64, hi: u64 },

    #[error("0 has no factorization")]
    ZeroFactorization,

    #[error("coverage gap: need values on [{need_lo}, {need_hi}], table covers [{lo}, {hi})")]
    Coverage {
        need_lo: u64,
        need_hi: u64,
        lo: u64,
        hi: u64,
    },

    #[error("integer overflow evaluating term `{term}`")]
    Overflow { term: String },

    #[error("invalid function spec: {0}")]
    InvalidSpec(String),

    #[error("function `{spec}` is not ±1-valued at n = {n}")]
    NotSignValued { spec: String, n: i64 },

    #[error("shift family is not certified independent; pass an explicit override to study dependent families")]
    DependentFamily,

    #[error("invalid shift family: {0}")]
    InvalidFamily(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("block cache format error: {0}")]
    CacheFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error is a coverage or overflow failure (as opposed to bad input).
    pub fn is_coverage(&self) -> bool {
        matches!(self, Error::Coverage { .. } | Error::Overflow { .. } | Error::InsufficientPrimes { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
