use thiserror::Error;

/// A violated graph or metric axiom, carrying a witness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AxiomViolation {
    #[error("no loops: vertex `{0}` carries a self edge")]
    SelfLoop(String),
    #[error("symmetry: omega({0},{1}) = {2} but omega({1},{0}) = {3}")]
    Asymmetry(String, String, f64, f64),
    #[error("nonnegative weight: omega({0},{1}) = {2} < 0")]
    NegativeWeight(String, String, f64),
    #[error("positive measure: mu({0}) = {1} <= 0")]
    NonpositiveMeasure(String, f64),
    #[error("connected: no path joins `{0}` and `{1}`")]
    Disconnected(String, String),
    #[error("finite values: {0} at vertex `{1}`")]
    NonfiniteValue(String, String),
    #[error("pseudo metric: d({0},{0}) = {1} != 0")]
    NonzeroDiagonal(String, f64),
    #[error("pseudo metric: d({0},{1}) = {2} but d({1},{0}) = {3}")]
    MetricAsymmetry(String, String, f64, f64),
    #[error("pseudo metric: d({0},{1}) = {2} < 0")]
    NegativeDistance(String, String, f64),
    #[error("triangle inequality: d({0},{2}) > d({0},{1}) + d({1},{2}) by {3:.3e}")]
    TriangleViolation(String, String, String, f64),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph axiom violated: {0}")]
    Axiom(AxiomViolation),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("vertices `{0}` and `{1}` are not adjacent")]
    NotAdjacent(String, String),
    #[error("parameter out of range: {name} = {value}, required {required}")]
    ParamRange {
        name: &'static str,
        value: f64,
        required: String,
    },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("support touches the truncation boundary layer: vertex `{0}`")]
    BoundarySupport(String),
    #[error("linear solver did not converge: residual {0:.3e} after {1} iterations")]
    SolverDiverged(f64, usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<AxiomViolation> for Error {
    fn from(v: AxiomViolation) -> Self {
        Error::Axiom(v)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl Error {
    pub(crate) fn range(name: &'static str, value: f64, required: impl Into<String>) -> Self {
        Error::ParamRange {
            name,
            value,
            required: required.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
