//! Dense/sparse tensors, a define-by-run reverse-mode tape and Adam.

mod adam;
pub mod gradcheck;
mod sparse;
mod tape;
mod tensor;

pub use adam::AdamState;
pub use sparse::SparseMatrix;
pub use tape::{softmax_rows, Elementwise, Tape, Var};
pub use tensor::Tensor;
