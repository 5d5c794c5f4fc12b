//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("enumeration would produce {predicted} graphs, cap is {cap}")]
    EnumerationCap { predicted: u128, cap: u128 },

    #[error("polynomial degree {degree} exceeds cap {cap}")]
    DegreeCap { degree: u32, cap: u32 },

    #[error("antisymmetry violated for entry ({i},{j})")]
    Antisymmetry { i: usize, j: usize },

    #[error("Jacobi identity violated (triple {i},{j},{k})")]
    Jacobi { i: usize, j: usize, k: usize },

    #[error("missing weight for graph {0}")]
    MissingWeight(String),

    #[error("conflicting exact weights for graph {0}")]
    WeightConflict(String),

    #[error("not a Kontsevich tree of the required type: {0}")]
    NotATree(String),

    #[error("cochain is not closed (d K != 0)")]
    NotClosed,

    #[error("order-0 part is not the identity; formal map not invertible")]
    NotInvertible,

    #[error("Poisson structure is not linear")]
    NotLinear,

    #[error("arity mismatch: tree has {tree} vertices, {args} arguments given")]
    ArityMismatch { tree: usize, args: usize },

    #[error("momentum cap exceeded: n = {n} beyond supported {cap}")]
    WeightOrderCap { n: usize, cap: usize },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
