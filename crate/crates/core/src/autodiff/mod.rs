//! Dense tensors with reverse-mode differentiation.
//!
//! The backward pass is recorded onto the same graph as ordinary ops, which
//! gives second derivatives (needed for gradient penalties) without any
//! symbolic machinery.

mod backward;
pub mod kernels;
mod graph;
mod tensor;

pub use graph::{Graph, Var};
pub use tensor::Tensor;

pub(crate) use tensor::gemm;
