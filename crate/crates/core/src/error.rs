use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("interface loop is not closed or repeats vertices")]
    LoopNotClosed,
    #[error("interface segment ({0}, {1}) is not an edge of the bulk mesh")]
    NotFitted(usize, usize),
    #[error("interface loop does not separate the domain")]
    NonSeparatingLoop,
    #[error("degenerate interface segment {0}")]
    DegenerateSegment(usize),
    #[error("interface polygon self-intersects near segment {0}")]
    SelfIntersection(usize),
    #[error("interface touches or leaves the domain")]
    InterfaceOutsideDomain,
    #[error("mesh refinement exceeded the element budget of {0}")]
    ElementBudget(usize),
    #[error("mesh generation failed: {0}")]
    MeshGeneration(String),
    #[error("unsupported MSH version {0}")]
    UnsupportedMshVersion(String),
    #[error("malformed MSH file: {0}")]
    MalformedMsh(String),
    #[error("point ({0}, {1}) lies outside the mesh")]
    PointNotLocated(f64, f64),
    #[error("interpolation node {0} lies outside the source mesh")]
    NodeOutsideSource(usize),
    #[error("unsupported quadrature degree {0}")]
    UnsupportedQuadratureDegree(usize),
    #[error("free-slip boundary edge ({0}, {1}) is not axis-aligned")]
    SlipEdgeNotAxisAligned(usize, usize),
    #[error("non-positive time step")]
    NonPositiveTimeStep,
    #[error("GMRES did not converge: {iterations} iterations, residual {residual:.3e}")]
    GmresNoConvergence { iterations: usize, residual: f64 },
    #[error("interface condensed operator is singular")]
    SingularInterfaceOperator,
    #[error("preconditioner factorization failed")]
    PreconditionerFactorization,
    #[error("fixed point iteration did not converge: gap {gap:.3e} after {iterations} iterations")]
    FixedPointNoConvergence { gap: f64, iterations: usize },
    #[error("mesh motion inverted an element and remeshing failed")]
    MotionFailed,
    #[error("cusp vertex {0} on the interface (vanishing weighted normal)")]
    CuspVertex(usize),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
