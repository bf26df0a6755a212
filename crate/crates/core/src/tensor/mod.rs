//! Tensors and reverse-mode automatic differentiation.

mod graph;
mod kernels;
mod param;
mod value;

pub use graph::{BinaryOp, Graph, UnaryOp, Var};
pub use param::{ParamId, ParamStore, Parameter};
pub use value::Tensor;
