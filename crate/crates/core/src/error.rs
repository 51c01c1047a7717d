use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid exponent p = {p}: {reason}")]
    InvalidExponent { p: f64, reason: &'static str },

    #[error("unknown metric family `{0}`")]
    UnknownFamily(String),

    #[error("metric `{family}`: {reason}")]
    InvalidMetric { family: String, reason: String },

    #[error("radius {r} outside the metric domain (0, {r_max})")]
    OutOfDomain { r: f64, r_max: f64 },

    #[error("warp function is not positive at r = {r} (w = {w})")]
    DegenerateWarp { r: f64, w: f64 },

    #[error("parabolic metric: {0}")]
    Parabolic(String),

    #[error("metric is not pole-complete (w(0) = 0, w'(0) = 1 required)")]
    NotPoleComplete,

    #[error("quadrature failed on [{a}, {b}]: error estimate {estimate:e} above tolerance {tolerance:e}")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        tolerance: f64,
    },

    #[error("root finder did not converge: {0}")]
    RootFinding(String),

    #[error("level {t} outside computed range ({lo}, {hi})")]
    LevelOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line search failed at iteration {iteration}: {detail}")]
    LineSearch { iteration: usize, detail: String },

    #[error("solver disagreement: {0}")]
    SolverDisagreement(String),

    #[error("numerical differentiation failed near t = {t}: {detail}")]
    Differentiation { t: f64, detail: String },

    #[error("unknown solver `{0}`")]
    UnknownSolver(String),

    #[error("unknown claim `{0}`")]
    UnknownClaim(String),
}

pub type Result<T> = std::result::Result<T, Error>;
