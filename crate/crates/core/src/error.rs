use thiserror::Error;

/// Every failure mode of the library. Variants carry enough numbers to be
/// reported as diagnostic JSON by the command-line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("exact division left relative residual {residual:.3e} (tolerance {tol:.1e})")]
    DivisionResidualTooLarge { residual: f64, tol: f64 },
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("common factor reduction failed: {0}")]
    ReductionFailed(String),

    #[error("lattice context mismatch: {left} vs {right} exceptional classes")]
    ContextMismatch { left: usize, right: usize },
    #[error("C^2 + C.K = {0} is odd")]
    ParityViolation(i64),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("condition (*) fails for the given values")]
    ConditionStarViolated,
    #[error("curves meet tangentially (root separation {separation:.3e})")]
    TangentialIntersection { separation: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("infinitely near or coincident points (separation {0:.3e})")]
    InfinitelyNearPoints(f64),

    #[error("Newton iteration diverged: {0}")]
    NewtonDivergence(String),
    #[error("expected {expected} nodes, found {found}")]
    NodeCountMismatch { expected: usize, found: usize },
    #[error("singular point is not an ordinary node (Hessian ratio {0:.3e})")]
    NonNodalSingularity(f64),
    #[error("discriminant does not factor as R^2 D: {0}")]
    DiscriminantFactorizationFailed(String),
    #[error("image of the map is degenerate")]
    DegenerateImage,
    #[error("section basis degree {0} unachievable")]
    DegreeUnachievable(usize),

    #[error("degenerate metric (rank {rank})")]
    DegenerateMetric { rank: usize },
    #[error("the plane has no common root")]
    NoCommonRoot,

    #[error("continuation step failed: {0}")]
    StepFailure(String),
    #[error("rank drop near a branch point: {0}")]
    RankDrop(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("chart projection failed at |x| = {0:.3e}")]
    ProjectionFailure(f64),
    #[error("ill-conditioned fit: {0}")]
    IllConditionedFit(String),
    #[error("rank-deficient fit (rank {rank} of {cols})")]
    RankDeficientFit { rank: usize, cols: usize },

    #[error("quadratic class is not in the real subspace (residual {0:.3e})")]
    NotInRealSubspace(f64),
    #[error("real metric is indefinite (min eigenvalue {0:.3e})")]
    IndefiniteRealMetric(f64),
    #[error("no real solution found after {0} seeds")]
    NoRealSolutionFound(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
