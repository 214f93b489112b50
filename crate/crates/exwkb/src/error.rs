//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("root polishing did not converge: {0}")]
    NonConvergence(String),
    #[error("point {0} lies within the exclusion radius of a turning point")]
    TurningPointProximity(String),
    #[error("local series cannot be inverted: {0}")]
    DegenerateExpansion(String),
    #[error("branch discontinuity detected: {0}")]
    BranchDiscontinuity(String),
    #[error("path passes through a turning point: {0}")]
    PathThroughTurningPoint(String),
    #[error("tail of the integral does not converge: {0}")]
    TailNotConvergent(String),
    #[error("Stokes line tracing stalled: {0}")]
    TraceStalled(String),
    #[error("no canonical path: {0}")]
    NoCanonicalPath(String),
    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),
    #[error("Laplace ray hits a singularity: {0}")]
    RayHitsSingularity(String),
    #[error("Laplace integrand does not decay along the ray: {0}")]
    NonDecayingIntegrand(String),
    #[error("evaluation at a branch point: {0}")]
    BranchPoint(String),
    #[error("evaluation at a pole: {0}")]
    PoleHit(String),
    #[error("series order too small: {0}")]
    InsufficientOrder(String),
    #[error("integration strip obstructed by a turning-point image: {0}")]
    StripObstructed(String),
    #[error("cost budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("point outside the certified convergence region: {0}")]
    OutsideRd2(String),
    #[error("unsupported level: {0}")]
    UnsupportedLevel(String),
    #[error("empty singularity catalog")]
    EmptyCatalog,
    #[error("lambda too small for a nonzero truncation order: {0}")]
    LambdaTooSmall(String),
    #[error("remainder kernel hit a singularity: {0}")]
    KernelSingularityHit(String),
    #[error("generation tree budget exceeded: {0}")]
    TreeBudgetExceeded(String),
    #[error("root bracketing failed: {0}")]
    RootBracketingFailed(String),
    #[error("no root in bracket: {0}")]
    NoRootInBracket(String),
    #[error("denominator near zero: {0}")]
    DenominatorNearZero(String),
    #[error("potential is not confining: {0}")]
    NotConfining(String),
    #[error("basis not converged: {0}")]
    BasisNotConverged(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::NonConvergence(_) => "NonConvergence",
            Error::TurningPointProximity(_) => "TurningPointProximity",
            Error::DegenerateExpansion(_) => "DegenerateExpansion",
            Error::BranchDiscontinuity(_) => "BranchDiscontinuity",
            Error::PathThroughTurningPoint(_) => "PathThroughTurningPoint",
            Error::TailNotConvergent(_) => "TailNotConvergent",
            Error::TraceStalled(_) => "TraceStalled",
            Error::NoCanonicalPath(_) => "NoCanonicalPath",
            Error::IllConditioned(_) => "IllConditioned",
            Error::RayHitsSingularity(_) => "RayHitsSingularity",
            Error::NonDecayingIntegrand(_) => "NonDecayingIntegrand",
            Error::BranchPoint(_) => "BranchPoint",
            Error::PoleHit(_) => "PoleHit",
            Error::InsufficientOrder(_) => "InsufficientOrder",
            Error::StripObstructed(_) => "StripObstructed",
            Error::BudgetExceeded(_) => "BudgetExceeded",
            Error::OutsideRd2(_) => "OutsideRd2",
            Error::UnsupportedLevel(_) => "UnsupportedLevel",
            Error::EmptyCatalog => "EmptyCatalog",
            Error::LambdaTooSmall(_) => "LambdaTooSmall",
            Error::KernelSingularityHit(_) => "KernelSingularityHit",
            Error::TreeBudgetExceeded(_) => "TreeBudgetExceeded",
            Error::RootBracketingFailed(_) => "RootBracketingFailed",
            Error::NoRootInBracket(_) => "NoRootInBracket",
            Error::DenominatorNearZero(_) => "DenominatorNearZero",
            Error::NotConfining(_) => "NotConfining",
            Error::BasisNotConverged(_) => "BasisNotConverged",
        }
    }
}
