use thiserror::Error;

/// Failure modes shared by every module of the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("incompatible operands: {0}")]
    IncompatibleOperands(String),

    #[error("not a *-homomorphism (residual {residual:.3e})")]
    NotAHomomorphism { residual: f64 },

    #[error("gram matrix not positive semidefinite (most negative eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("map is not completely positive (Choi eigenvalue {min_eigenvalue:.3e} in block {block})")]
    NotCompletelyPositive { block: usize, min_eigenvalue: f64 },

    #[error("map is not linear (residual {residual:.3e})")]
    NotLinear { residual: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("ideal not respected (residual {residual:.3e})")]
    IdealNotRespected { residual: f64 },

    #[error("not a correspondence morphism: axiom {axiom} fails (residual {residual:.3e})")]
    NotAMorphism { axiom: &'static str, residual: f64 },

    #[error("inconsistent subproduct system: {0}")]
    InconsistentSubproduct(String),

    #[error("not bi-Hilbertian: {axiom} fails (residual {residual:.3e})")]
    NotBihilbertian { axiom: &'static str, residual: f64 },

    #[error("Watatani index is not invertible")]
    IndexNotInvertible,

    #[error("not a cover: {0}")]
    NotACover(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("equality undecidable by expansion: vertex {source_vertex} is a source")]
    EqualityUndecidable { source_vertex: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("io error at {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
