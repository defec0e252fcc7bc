use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("invalid field literal `{0}`")]
    ParseLiteral(String),
    #[error("matrix has no real hyperbolic eigenbasis")]
    NotHyperbolic,
    #[error("eigenvalues are not in Q(sqrt 3): discriminant {0}")]
    UnsupportedDiscriminant(String),
    #[error("dimensions must be positive")]
    NonPositiveDimension,
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("segment touches cone point at {0}")]
    TouchesConePoint(String),
    #[error("direction must be nonzero")]
    ZeroDirection,
    #[error("point is outside the surface: {0}")]
    OutsideSurface(String),
    #[error("direction is not an outgoing prong at {0}")]
    NotAProng(String),
    #[error("invalid surface: {0}")]
    InvalidSurface(String),
    #[error("direction not recognized as periodic within budget: {0}")]
    NotPeriodic(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("word syntax error: {0}")]
    WordSyntax(String),
    #[error("continuity violation: {0}")]
    Continuity(String),
    #[error("refinement failure: {0}")]
    Refinement(String),
    #[error("lift failure: {0}")]
    Lift(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;
