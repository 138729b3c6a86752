use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{0} is not a prime")]
    NotPrime(u32),
    #[error("field element {value} out of range for modulus {modulus}")]
    OutOfRange { value: u64, modulus: u32 },
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u32, u32),
    #[error("inversion of zero")]
    InverseOfZero,
    #[error("division by the zero polynomial")]
    DivisionByZero,
    #[error("gcd of two zero polynomials is undefined")]
    GcdOfZeros,
    #[error("Moebius function is undefined at the zero polynomial")]
    MoebiusOfZero,
    #[error("degree must be at least {min}, got {got}")]
    DegreeTooSmall { min: usize, got: usize },

    #[error("insufficient precision: need coefficients below index {needed}, known below {available}")]
    InsufficientPrecision { needed: i64, available: i64 },
    #[error("empty linear combination")]
    EmptyCombination,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("generating matrix slab {rows}x{cols} too small for {needed_rows} digits and {needed_cols} index digits")]
    SlabTooSmall {
        rows: usize,
        cols: usize,
        needed_rows: usize,
        needed_cols: usize,
    },

    #[error("N = {n} out of range (point set holds {available})")]
    CountOutOfRange { n: u64, available: u64 },
    #[error("grid of {required} evaluations exceeds budget {budget}; use the sampled lower-bound mode")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error("Walsh index {k} must be below q^m = {limit}")]
    IndexTooLarge { k: u64, limit: u64 },
    #[error("imaginary residue {residue:e} above tolerance {tolerance:e}")]
    ImaginaryResidue { residue: f64, tolerance: f64 },
    #[error("leading digit b_w vanishes at w = {w} < m")]
    VanishingLeadDigit { w: u32 },
    #[error("mean-zero check needs k != 0")]
    ZeroIndex,
    #[error("spectral and direct routes disagree: {direct} vs {spectral}")]
    RouteDisagreement { direct: String, spectral: String },

    #[error("log threshold needs a total degree of at least 2, got {0}")]
    TotalDegreeTooSmall(u32),
    #[error("event hypothesis violated: {0}")]
    Hypothesis(String),
}

pub type Result<T> = std::result::Result<T, Error>;
