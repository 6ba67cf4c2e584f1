//! Dense double-precision tensors with a reverse-mode tape.

mod adam;
mod checkpoint;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, MAGIC as CHECKPOINT_MAGIC};
pub use tape::{
    normalize_row, sigmoid_proxy_grad, softmax_row, Gradients, Tape, Var, LAYER_NORM_EPS, MASK_NEG,
};
pub use tensor::{dot, gelu, gelu_grad, matmul_acc, matmul_nt_acc, matmul_tn_acc, sigmoid, Tensor};

#[cfg(test)]
mod gradcheck;
