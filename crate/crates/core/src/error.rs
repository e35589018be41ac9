use thiserror::Error;

/// Errors raised by the tensor, storage and kernel layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("index {index:?} out of range for extents {extents:?}")]
    Range {
        index: Vec<usize>,
        extents: Vec<usize>,
    },

    #[error("mode {mode} out of range for order {order}")]
    Mode { mode: usize, order: usize },

    #[error("block dimension {block} does not divide tensor dimension {dim}")]
    BlockDivisibility { dim: usize, block: usize },

    #[error(
        "tensor is not symmetric: entries {index:?} and {partner:?} differ by {rel_err:e} (relative), tolerance {tol:e}"
    )]
    Asymmetric {
        index: Vec<usize>,
        partner: Vec<usize>,
        rel_err: f64,
        tol: f64,
    },

    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("decode error: {0}")]
    Decode(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
