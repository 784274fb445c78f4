use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point lies outside the domain (rho = {rho:e})")]
    PointOutsideDomain { rho: f64 },

    #[error("boundary projection did not converge after {iterations} iterations")]
    ProjectionDiverged { iterations: usize },

    #[error("curvature estimate failed at boundary sample {sample}: {reason}")]
    CurvatureEstimateFailed { sample: usize, reason: String },

    #[error("shell depth {t} exceeds collar depth {epsilon}")]
    OutsideShellRange { t: f64, epsilon: f64 },

    #[error("derivative evaluation failed: {0}")]
    DerivativeEvaluationFailed(String),

    #[error("dimension {0} is too small, need an even dimension of at least 4")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("contact form is degenerate: smallest singular value {sigma:e} below floor {floor:e}")]
    DegenerateContact { sigma: f64, floor: f64 },

    #[error("point is not on the boundary (rho = {rho:e})")]
    NotOnBoundary { rho: f64 },

    #[error("boundary graph is disconnected ({components} components at k = {k})")]
    GraphDisconnected { components: usize, k: usize },

    #[error("contact data unavailable at node {node}: {reason}")]
    ContactUnavailable { node: usize, reason: String },

    #[error("boundary sampling failed: {0}")]
    SamplingFailed(String),

    #[error("mapped point is off the target boundary (rho = {rho:e})")]
    ImageOffBoundary { rho: f64 },

    #[error("projections differ by {gap:e}")]
    ProjectionsDiffer { gap: f64 },

    #[error("heights differ: {h1} vs {h2}")]
    HeightsDiffer { h1: f64, h2: f64 },

    #[error("point lies outside the collar (depth {depth} > {epsilon})")]
    PointOutsideShellRegion { depth: f64, epsilon: f64 },

    #[error("refinement stalled at depth {depth}: last estimates [{lo}, {hi}]")]
    RefinementStalled { depth: usize, lo: f64, hi: f64 },

    #[error("zero tangent vector")]
    ZeroVector,

    #[error("sequence prefix too short: {len} < {min}")]
    PrefixTooShort { len: usize, min: usize },

    #[error("boundary product did not stabilize; trend {trend:?}")]
    NotStabilized { trend: Vec<f64> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("map escaped the domain at step {step} (rho = {rho:e})")]
    MapEscapedDomain { step: usize, rho: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
