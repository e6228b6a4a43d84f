use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid needs an even mode count >= 8 and a positive length (got n_modes={n_modes}, length={length})")]
    InvalidGrid { n_modes: usize, length: f64 },

    #[error("expected {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("mode {mode} is outside the grid range [{min}, {max}]")]
    ModeOutOfRange { mode: i64, min: i64, max: i64 },

    #[error("derivative order {0} is not supported (use 1 or 2)")]
    UnsupportedOrder(u32),

    #[error("analytic weight must be nonnegative, got {0}")]
    NegativeWeight(f64),

    #[error("regularity index must be nonnegative, got {0}")]
    NegativeRegularity(f64),

    #[error("invalid weight schedule: {0}")]
    InvalidSchedule(String),

    #[error("time {t} lies outside [0, {t_max}]")]
    TimeOutOfRange { t: f64, t_max: f64 },

    #[error("time went backwards: {t} after {previous}")]
    TimeRegression { previous: f64, t: f64 },

    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("samples are not uniformly spaced in time")]
    NonUniformSamples,

    #[error("argument must be a nonnegative squared modulus, got {0}")]
    NegativeArgument(f64),

    #[error("nonlinearity exponents must be >= 1 (gamma={gamma}, sigma={sigma})")]
    InvalidExponent { gamma: u32, sigma: u32 },

    #[error("{0} must be real-valued (Hermitian coefficients)")]
    NotReal(&'static str),

    #[error("semiclassical parameter {0} outside the admissible range")]
    InvalidEpsilon(f64),

    #[error("non-finite value in {what} at t={t}")]
    NonFinite { what: &'static str, t: f64 },

    #[error("instability at t={t}: norm grew by a factor {growth:.3e}")]
    Unstable { t: f64, growth: f64 },

    #[error("time step {dt} does not divide the horizon {horizon}")]
    StepMismatch { dt: f64, horizon: f64 },

    #[error("under-resolved wave field at t={t}: tail mass fraction {tail:.3e} exceeds {threshold:.1e}")]
    Underresolved { t: f64, tail: f64, threshold: f64 },

    #[error("iterative scheme diverged at iteration {iteration} (ratio {ratio:.3})")]
    Divergence { iteration: usize, ratio: f64 },

    #[error("iterative scheme needs j_max >= 2, got {0}")]
    InvalidIterationCount(usize),

    #[error("trajectories are not aligned: {0}")]
    Misaligned(String),

    #[error("plane wave with k={k} is incompatible with the periodic box (k L / eps must be a multiple of 2 pi)")]
    IncompatiblePlaneWave { k: f64 },
}
