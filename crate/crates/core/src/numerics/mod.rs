//! Dense double-precision storage and the differentiable primitives the model
//! is built from. Every forward primitive has a matching `*_backward` that
//! returns the vector-Jacobian product, and [`gradcheck`] provides the central
//! difference oracle used to verify them.

mod gumbel;
mod matrix;
mod ops;
mod rng;

pub mod gradcheck;

pub use gradcheck::{finite_difference_gradient, max_relative_error, ParameterSet};
pub use gumbel::{
    gumbel_softmax_backward, gumbel_softmax_with_noise, sample_gumbel_noise,
    sample_gumbel_softmax,
};
pub use matrix::{Matrix, Parameter};
pub use ops::{
    cosine_backward, cosine_similarity, dot, layer_norm, layer_norm_backward,
    layer_norm_forward, log_sum_exp, sigmoid, softmax, softmax_backward, LayerNormCache,
    NORM_FLOOR,
};
pub use rng::{RngState, Stream};
