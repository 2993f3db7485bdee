use alloc::string::String;

/// Errors reported by the link models and solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An input lies outside the domain of a mathematical function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A finite-precision evaluation lost all significance.
    #[error("numerical instability: {0}")]
    Instability(String),
    /// A configuration violates one of its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Shapes or lengths of the arguments disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A normalization was asked to rescale an all-zero quantity.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// A Gram matrix was not positive definite.
    #[error("singular system: {0}")]
    Singular(String),
}
