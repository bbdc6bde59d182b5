use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vector norm {norm} deviates from 1 by more than {tol}")]
    NotUnit { norm: f64, tol: f64 },

    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("non-finite component in input")]
    NonFinite,

    #[error("matrix is not a proper rotation (orthogonality defect {defect:e}, det {det})")]
    NotRotation { defect: f64, det: f64 },

    #[error("invalid pentagram: {0}")]
    InvalidPentagram(String),

    #[error("chain closure is degenerate: |l4 x l1| = {norm:e}")]
    DegenerateClosure { norm: f64 },

    #[error("invalid context structure: {0}")]
    InvalidStructure(String),

    #[error("invalid marginal table: {0}")]
    InvalidModel(String),

    #[error("inconsistent model: <{monomial}> is {left} in context {context_a} but {right} in context {context_b}")]
    InconsistentModel {
        monomial: String,
        context_a: usize,
        context_b: usize,
        left: String,
        right: String,
    },

    #[error("ray and model belong to different context structures")]
    StructureMismatch,

    #[error("structure with {n} observables exceeds the 2^{max} assignment guard")]
    ScaleGuard { n: usize, max: usize },

    #[error("cannot plan trials when the true rate equals the threshold ({0})")]
    InfeasiblePlan(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear program solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
