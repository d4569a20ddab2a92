use thiserror::Error;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is singular at pivot {pivot}")]
    Singular { pivot: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("dense guard exceeded: dimension {dim} > {limit}")]
    DenseGuard { dim: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Poisson ratio {0} exceeds 1/2")]
    PoissonRatio(f64),

    #[error("pressure elimination needs finite lambda (subdomain {subdomain} is incompressible); use the saddle-point formulation")]
    IncompressibleReformulation { subdomain: usize },

    #[error("local solver for subdomain {subdomain} failed: {source}")]
    LocalFactorization {
        subdomain: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("coarse solver failed: {0}")]
    CoarseFactorization(#[source] Box<Error>),

    #[error("preconditioner is not positive definite (p'Kp = {0:e}); use GMRES instead of PCG")]
    IndefinitePreconditioner(f64),

    #[error("GMRES stagnated: no residual reduction over {window} iterations (at iteration {iteration})")]
    Stagnation { window: usize, iteration: usize },

    #[error("iteration limit {0} reached without convergence")]
    NoConvergence(usize),

    #[error("sparse factorization failed: {0}")]
    Sparse(String),

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("case {case}: {source}")]
    Case {
        case: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
