//! Numeric substrate: tensors, the autodiff tape and the random source.

mod rng;
mod tape;
mod tensor;

pub use rng::{box_muller, mix64, RngStream};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{
    batch_matmul, elementwise, gelu, layer_norm, matmul, normal_cdf, normal_pdf, relu, softmax,
    ElementwiseOp, Tensor,
};
