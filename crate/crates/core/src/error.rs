use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("vertex {vertex} outside 1..={n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("hyperedge {index} repeats vertex {vertex}")]
    DuplicateVertex { index: usize, vertex: usize },
    #[error("hyperedge {index} is empty")]
    EmptyHyperedge { index: usize },
    #[error("hyperedge {index} duplicates an earlier hyperedge")]
    RepeatedHyperedge { index: usize },
    #[error("{edges} hyperedges but {weights} weights")]
    WeightCount { edges: usize, weights: usize },
    #[error("{edges} hyperedges exceeds the cap of {cap}")]
    TooManyHyperedges { edges: usize, cap: usize },
    #[error("hyperedge {index} has {size} vertices; a plain graph needs exactly 2")]
    NotAGraph { index: usize, size: usize },
    #[error("edge {index} carries weight {weight}; qudit graphs take unit weights only")]
    WeightedQuditEdge { index: usize, weight: f64 },
    #[error("graph needs at least one vertex")]
    EmptyGraph,
    #[error("local dimension {0} is below 2")]
    Dimension(u32),
    #[error("state has local dimension {got}, test expects {expected}")]
    DimensionMismatch { expected: u32, got: u32 },
    #[error("tableau simulation needs a prime local dimension, got {0}")]
    CompositeDimension(u32),
    #[error("state space d^n = {d}^{n} exceeds the dense limit of 2^20 amplitudes")]
    DenseTooLarge { d: u32, n: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("site {site} is outside a register of {n} sites")]
    SiteOutOfRange { site: usize, n: usize },
    #[error("site {0} was already measured or discarded")]
    SiteConsumed(usize),
    #[error("basis {0} is not valid for this register type")]
    WrongBasis(&'static str),
    #[error("unsupported measurement pattern: {0}")]
    UnsupportedPattern(&'static str),
    #[error("stabilizer generators do not commute or are dependent")]
    InvalidTableau,
    #[error("covariance violates the uncertainty relation (min eigenvalue {0})")]
    Uncertainty(f64),
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("{name} = {value} is out of range: {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("parameters outside the theorem regime: {0}")]
    Regime(String),
    #[error("need at least {needed} registers, have {have}")]
    InsufficientRegisters { needed: u64, have: u64 },
    #[error("protocol order violation: {0}")]
    ProtocolOrder(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }
}
