use thiserror::Error;

/// Errors raised by the design library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid design space: {0}")]
    InvalidSpace(String),

    #[error("label {label} out of range 1..={t} at position {position}")]
    LabelOutOfRange { label: usize, t: usize, position: usize },

    #[error("sequence has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("block uses {distinct} distinct treatments but only {t} are available")]
    TooManyDistinct { distinct: usize, t: usize },

    #[error("covariance matrix is not positive definite (eigenvalues {min_eig:.3e} .. {max_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64, max_eig: f64 },

    #[error("covariance matrix is not symmetric")]
    NotSymmetric,

    #[error("matrix is singular")]
    Singular,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("quadratic family is empty")]
    EmptyFamily,

    #[error("quadratic {0} is not convex")]
    NotConvex(usize),

    #[error("upper envelope is unbounded below")]
    Unbounded,

    #[error("no feasible stationary weights on the active set")]
    NoFeasibleWeights,

    #[error("design moments are degenerate (carryover trace is zero)")]
    Degenerate,

    #[error("tau0 direction is singular for this design (tau0' C22 tau0 = {0:.3e})")]
    SingularDirection(f64),

    #[error("tau0 must be a nonzero vector of length {0}")]
    InvalidTau0(usize),

    #[error("exact permutation averaging is limited to t <= {max}, got t = {t}")]
    TooManyTreatments { t: usize, max: usize },

    #[error("lambda* is undefined for t = {0} (needs t >= 3)")]
    LambdaStarUndefined(usize),

    #[error("no information about lambda: every r_s envelope value is zero")]
    NoLambdaInformation,

    /// Carries the best iterate (canonical sequence, weight) and its max score.
    #[error("optimizer did not converge in {iterations} iterations (max score {max_score:.6e})")]
    NonConvergence {
        iterations: usize,
        max_score: f64,
        best: Vec<(String, f64)>,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
