//! Symmetric tensors in blocked compact storage and the change-of-basis
//! kernel `C := [A; X, ..., X] = A x_0 X x_1 X ... x_{m-1} X`.
//!
//! * [`dense`]: dimensional-order tensors, permutation, mode products.
//! * [`sym_index`]: canonical indices and upper-hypertriangle enumeration.
//! * [`bcss`]: blocked compact symmetric storage and its partially symmetric
//!   generalization.
//! * [`sttsm`]: naive, scalar-temporary, dense and blocked kernels with
//!   operation counters.
//! * [`cost_model`]: exact storage, flop and memop formulas.
//! * [`io`]: binary tensor formats.

pub mod bcss;
pub mod cost_model;
pub mod counter;
pub mod dense;
pub mod error;
pub mod io;
pub mod random;
pub mod sttsm;
pub mod sym_index;

pub use bcss::{BcssTensor, PartialSymTensor, StorageCount};
pub use counter::OpCounter;
pub use dense::{DenseTensor, MatView, Permutation};
pub use error::{Error, Result};
