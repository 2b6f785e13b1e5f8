use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex index {vertex} out of range for {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("edge ({u}, {v}) has nonpositive weight {weight}")]
    NonPositiveWeight { u: usize, v: usize, weight: f64 },
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph is disconnected; components: {0:?}")]
    Disconnected(Vec<Vec<usize>>),
    #[error("power k must be at least 1")]
    ZeroPower,
    #[error("product has {vertices} vertices, above the dense cap of {cap}")]
    DenseCapExceeded { vertices: u128, cap: usize },
    #[error("expected {expected} function values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("tuple {0:?} is not a vertex of the product")]
    MalformedTuple(Vec<usize>),
    #[error("coordinate {coord} out of range for power {k}")]
    CoordinateOutOfRange { coord: usize, k: usize },
    #[error("function is not {{-1,+1}}-valued")]
    NotBoolean,
    #[error("function is constant (zero variance)")]
    ConstantFunction,
    #[error("eigensolver did not converge (off-diagonal residual {0:e})")]
    EigenNoConvergence(f64),
    #[error("{vertices} exceeds the limit of {limit} for this exhaustive computation")]
    TooManyVertices { vertices: usize, limit: usize },
    #[error("parameter t = {0} outside (0, 1/e^2]")]
    TOutOfRange(f64),
    #[error("epsilon = {0} outside (0, 1)")]
    EpsilonOutOfRange(f64),
    #[error("every log-Sobolev restart degenerated to zero entropy")]
    DegenerateEntropy,
    #[error("necklace length R = {0} outside the supported range 3..=20")]
    NecklaceSize(usize),
    #[error("q-ary cube needs q >= 2, got {0}")]
    AlphabetSize(usize),
    #[error("infeasible SDP solution: {0}")]
    Infeasible(String),
    #[error("invalid solution data: {0}")]
    InvalidSolution(String),
    #[error("level mismatch: solution has level {have}, requested {want}")]
    LevelMismatch { have: usize, want: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
