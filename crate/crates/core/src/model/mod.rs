//! The cascade model: a GRU over node embeddings, scaled dot-product
//! attention of every hidden state against the current one, soft assignment
//! of hidden states to `K` prototypes by cosine similarity, and one
//! layer-normalised summary per prototype. Candidates are scored by their
//! best-matching summary against the same embedding table used for input.
//!
//! Two routes compute the same quantities:
//! * [`layers`] exposes each stage as a standalone function on plain values,
//!   which is what prediction uses;
//! * [`cascade`] runs a whole cascade in one pass, keeps the intermediate
//!   values, and backpropagates the summed loss to every parameter.

pub mod cascade;
pub mod checkpoint;
mod gru;
pub mod layers;
mod params;

pub use cascade::{cascade_gradients, cascade_step_scores, forward_cascade, CascadeOutput, Mode};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use gru::gru_step;
pub use layers::{
    aggregate, disentangled_attention, encode_prefix, predict_top_n, prefix_scores,
    score_candidates, sequential_attention, step_loss,
};
pub use params::{ModelGrads, ModelParams, Weights, TENSOR_COUNT, TENSOR_NAMES};

use crate::error::{invalid, Result};
use crate::numerics::{Matrix, RngState};

/// Epsilon added to the variance inside layer normalisation. Kept tiny so a
/// normalised vector has unit variance to well within 1e-6.
pub const LAYER_NORM_EPSILON: f64 = 1e-10;

/// GRU outputs `h_1..h_t` for one cascade prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStates {
    pub states: Vec<Vec<f64>>,
}

impl HiddenStates {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }
}

/// Attention of the latest hidden state over all positions `1..=t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    /// Scaled dot-product scores before normalisation.
    pub scores: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Row `i` is the distribution of hidden state `i` over the `K` factors.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorAssignments {
    pub beta: Matrix,
}

/// The `K` per-factor summaries of a prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct DisentangledStates {
    pub ys: Vec<Vec<f64>>,
}

/// Gumbel-Softmax noise on the factor-assignment logits.
#[derive(Debug, Clone)]
pub struct GumbelConfig {
    pub tau: f64,
    pub enabled_in_training: bool,
    pub rng: RngState,
}

impl GumbelConfig {
    pub fn new(tau: f64, enabled_in_training: bool, rng: RngState) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(invalid(format!("Gumbel temperature must be > 0, got {tau}")));
        }
        Ok(Self {
            tau,
            enabled_in_training,
            rng,
        })
    }

    pub fn disabled() -> Self {
        Self {
            tau: 1.0,
            enabled_in_training: false,
            rng: RngState::new(0),
        }
    }
}

/// Inverted dropout on the input embedding of each GRU step.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    pub rng: RngState,
}

impl Dropout {
    pub fn new(rate: f64, rng: RngState) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(invalid(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        Ok(Self { rate, rng })
    }
}

pub(crate) fn inv_sqrt_dim(dim: usize) -> f64 {
    1.0 / (dim as f64).sqrt()
}
