use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector must be non-empty with finite entries")]
    InvalidVector,

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("empirical component needs at least one point")]
    EmptyEmpirical,

    #[error("measure has no components")]
    EmptyMeasure,

    #[error("invalid weight {0}")]
    InvalidWeight(f64),

    #[error("operation requires a probability measure (non-negative weights summing to 1)")]
    NonProbabilityMeasure,

    #[error("half-space normal must be non-zero")]
    ZeroNormal,

    #[error("quadrant needs at least one half-space")]
    NoHalfSpaces,

    #[error("half-spaces have empty intersection")]
    EmptyQuadrant,

    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("total probability {0} exceeds 1")]
    TotalProbabilityExceeded(f64),

    #[error("generalized requirement needs at least one term")]
    NoTerms,

    #[error("expected {expected} maps, one per scenario, found {found}")]
    MapCountMismatch { expected: usize, found: usize },

    #[error("map has no closed-form pushforward for {0} components")]
    NotClosedForm(&'static str),

    #[error("map is not affine")]
    NotAffine,

    #[error("quadrant {index} is two-sided constrained")]
    TwoSidedConstrainedQuadrant { index: usize },

    #[error("total requirement probability {0} is not below 1")]
    TotalProbabilityOne(f64),

    #[error("ball of radius {radius} does not fit into quadrant {index}")]
    BallPlacementFailed { index: usize, radius: f64 },

    #[error("invalid synthesis parameters: {0}")]
    InvalidParams(String),

    #[error("scenario probabilities sum to {0}; aggregation is not invertible")]
    NotInvertible(f64),

    #[error("measure lacks point mass {needed} at scenario {index}")]
    MissingPointMass { index: usize, needed: f64 },

    #[error("full scenario set does not satisfy the requirements")]
    NotSufficientInitially,

    #[error("grid of {0} cells is too large")]
    GridTooLarge(f64),

    #[error("invalid grid bounds")]
    InvalidGrid,

    #[error("alpha {0} outside (0, 1)")]
    AlphaOutOfRange(f64),

    #[error("valuation function has no pieces")]
    NoPieces,

    #[error("linear program failed: {0}")]
    Lp(String),
}
