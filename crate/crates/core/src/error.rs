use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("edge {index} has non-positive weight {weight}")]
    NonPositiveWeight { index: usize, weight: f64 },

    #[error("edge {index} is a self-loop at vertex {vertex}")]
    SelfLoop { index: usize, vertex: usize },

    #[error("edge {index} references vertex {vertex} but n = {n}")]
    VertexOutOfRange { index: usize, vertex: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("underlying undirected graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("infeasible parameters: {0}")]
    InfeasibleParameters(String),

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("expander decomposition could not certify phi >= {phi_min}: {detail}")]
    QualityNotMet { phi_min: f64, detail: String },

    #[error("constraint vector has no component in the circulation space")]
    DegenerateConstraint,

    #[error("edge set is not a spanning tree: {0}")]
    NotATree(String),

    #[error("graph is not Eulerian (imbalance {imbalance:e})")]
    NotEulerian { imbalance: f64 },

    #[error("graph is not a bipartite lift")]
    NotBipartiteLift,

    #[error("transition structure is not irreducible")]
    NotIrreducible,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable tag used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveWeight { .. } => "NonPositiveWeight",
            Error::SelfLoop { .. } => "SelfLoop",
            Error::VertexOutOfRange { .. } => "VertexOutOfRange",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::Disconnected { .. } => "Disconnected",
            Error::InfeasibleParameters(_) => "InfeasibleParameters",
            Error::NotPsd { .. } => "NotPSD",
            Error::PreconditionViolated(_) => "PreconditionViolated",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::QualityNotMet { .. } => "QualityNotMet",
            Error::DegenerateConstraint => "DegenerateConstraint",
            Error::NotATree(_) => "NotATree",
            Error::NotEulerian { .. } => "NotEulerian",
            Error::NotBipartiteLift => "NotBipartiteLift",
            Error::NotIrreducible => "NotIrreducible",
            Error::Parse { .. } => "ParseError",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
