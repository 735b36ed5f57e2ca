use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The box intersected with the linear cuts is empty (or numerically so).
    #[error("projection subproblem is infeasible (max violation {violation:.3e})")]
    Infeasible { violation: f64 },

    #[error("switching sub-gradient produced no feasible step in {steps} iterations")]
    EmptyFeasibleSet { steps: usize },

    #[error("solver requires a smooth problem (gradient Lipschitz constant missing or oracle non-smooth)")]
    NonSmoothProblem,

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("hidden strong convexity modulus mu_h is missing or below 1e-12")]
    MissingMuH,

    #[error("start point is not tau-feasible: F2(x0) = {f2:.6e} > tau = {tau:.6e}")]
    InfeasibleStart { f2: f64, tau: f64 },

    #[error("feasibility target not reached within budget (best F2 = {best_f2:.6e}, target {target:.6e})")]
    FeasibilityNotReached { best_f2: f64, target: f64 },

    #[error("no grid point satisfies the constraint")]
    NoFeasibleGridPoint,

    #[error("outer iteration {outer}: {source}")]
    Inner {
        outer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn at_outer(self, outer: usize) -> Self {
        Error::Inner {
            outer,
            source: Box::new(self),
        }
    }
}
