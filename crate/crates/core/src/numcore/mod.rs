//! Dense numeric kernel: tensors and the differentiable layers used by the
//! captioning model, each with a hand-derived backward pass.
//!
//! Backward functions accumulate parameter gradients into a caller-owned
//! gradient struct of the same shape as the parameters, so per-sample
//! gradients can be summed across a batch without extra allocation.

mod gradcheck;
mod gru;
mod layers;
mod real;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use gru::{GruCache, GruCell};
pub use layers::{
    cosine_dissim_backward, cosine_dissim_forward, mean_pool_backward, mean_pool_forward,
    softmax_ce_backward, softmax_ce_forward, Affine, CosineCache, Embedding, SoftmaxCeCache,
};
pub use real::{sigmoid, Real};
pub use tensor::{dot, norm, Tensor};

use rand::Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumError {
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    ShapeMismatch {
        op: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("mean pooling over an empty sequence")]
    EmptySequence,
    #[error("target id {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

pub(crate) fn check_len(op: &'static str, expected: usize, actual: usize) -> Result<(), NumError> {
    if expected == actual {
        Ok(())
    } else {
        Err(NumError::ShapeMismatch {
            op,
            expected,
            actual,
        })
    }
}

/// Fills `t` with draws from uniform(-bound, bound).
pub fn init_uniform<R: Real, G: Rng>(t: &mut Tensor<R>, bound: f64, rng: &mut G) {
    for x in t.as_mut_slice() {
        *x = R::lit(rng.gen_range(-bound..bound));
    }
}
