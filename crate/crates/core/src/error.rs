use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse entity an error is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    Edge(usize),
    Cell(usize),
    Node(usize),
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Edge(id) => write!(f, "edge={id}"),
            Site::Cell(id) => write!(f, "cell={id}"),
            Site::Node(id) => write!(f, "node={id}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh ratio: Nf={nf} is not a multiple of Nc={nc}")]
    InvalidRatio { nc: usize, nf: usize },
    #[error("mesh too coarse: Nf/Nc={ratio} must be at least 2")]
    TooCoarse { ratio: usize },
    #[error("Nc must be at least 1")]
    EmptyMesh,
    #[error("unknown interior edge {0}")]
    UnknownEdge(usize),
    #[error("coarse node {0} lies on the domain boundary")]
    BoundaryNode(usize),
    #[error("unknown coarse node {0}")]
    UnknownNode(usize),
    #[error("coefficient value must be positive, got {0}")]
    NonpositiveValue(f64),
    #[error("coefficient has {got} triangle values, mesh has {expected}")]
    CoefficientMismatch { expected: usize, got: usize },
    #[error("field does not live on the requested region")]
    RegionMismatch,
    #[error("length mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("solver did not reach tolerance {tol:e} (backward error {residual:e})")]
    NonConvergence { tol: f64, residual: f64 },
    #[error("Cholesky factorization of the {0} Gram matrix failed")]
    GramNotSpd(&'static str),
    #[error("point-evaluation constraints are rank deficient")]
    RankDeficient,
    #[error("interpolation trace violates the endpoint constraint: {0}")]
    PsiConstraint(String),
    #[error("edge function must vanish at the edge endpoints")]
    NonzeroEndpoint,
    #[error("edge {0} is not covered by the field's region")]
    EdgeNotCovered(usize),
    #[error("local field fails the a-orthogonality check (relative {0:e})")]
    Inconsistency(f64),
    #[error("reference solution has zero norm")]
    ZeroNormReference,
    #[error("singular coarse system")]
    SingularSystem,
    #[error("forcing grid {grid}x{grid} exceeds the cap of {cap} forcings")]
    ForcingGridTooFine { grid: usize, cap: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("artifact: {0}")]
    Artifact(#[from] crate::artifact::ArtifactError),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("expression: {0}")]
    Expr(#[from] crate::expr::ExprError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{site}: {source}")]
    At {
        site: Site,
        #[source]
        source: Box<Error>,
    },
}

/// Broad failure category, used by the command-line driver to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
    Io,
}

impl Error {
    pub fn at(self, site: Site) -> Error {
        Error::At {
            site,
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::At { source, .. } => source.class(),
            Error::Io(_) | Error::Artifact(_) => ErrorClass::Io,
            Error::Config { .. }
            | Error::Expr(_)
            | Error::InvalidRatio { .. }
            | Error::TooCoarse { .. }
            | Error::EmptyMesh
            | Error::NonpositiveValue(_)
            | Error::InvalidArgument(_)
            | Error::ForcingGridTooFine { .. } => ErrorClass::Config,
            _ => ErrorClass::Numeric,
        }
    }

    /// Innermost site, if any.
    pub fn site(&self) -> Option<Site> {
        match self {
            Error::At { site, source } => source.site().or(Some(*site)),
            _ => None,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn at(self, site: Site) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn at(self, site: Site) -> Result<T> {
        self.map_err(|e| e.at(site))
    }
}
