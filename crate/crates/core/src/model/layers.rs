//! Each model stage as a standalone, evaluation-friendly function.

use super::gru::gru_step;
use super::params::ModelParams;
use super::{
    inv_sqrt_dim, AttentionWeights, DisentangledStates, FactorAssignments, GumbelConfig,
    HiddenStates, LAYER_NORM_EPSILON,
};
use crate::error::{invalid, Error, Result};
use crate::numerics::{
    cosine_similarity, dot, layer_norm, log_sum_exp, sample_gumbel_softmax, softmax, Matrix,
};

/// Runs the GRU from `h_0 = 0` over every node of `prefix`.
pub fn encode_prefix(params: &ModelParams, prefix: &[usize]) -> Result<HiddenStates> {
    let mut h = vec![0.0; params.dim()];
    let mut states = Vec::with_capacity(prefix.len());
    for &node in prefix {
        h = gru_step(params, &h, node)?;
        states.push(h.clone());
    }
    Ok(HiddenStates { states })
}

/// `αᵢ ∝ exp(hᵢ·h_t / √D)` over `i = 1..=t`, the current position included.
pub fn sequential_attention(hidden: &HiddenStates) -> Result<AttentionWeights> {
    let current = hidden
        .last()
        .ok_or_else(|| invalid("sequential attention over an empty prefix"))?;
    let scale = inv_sqrt_dim(current.len());
    let scores: Vec<f64> = hidden.states.iter().map(|h| dot(h, current) * scale).collect();
    let alpha = softmax(&scores, None)?;
    Ok(AttentionWeights { scores, alpha })
}

/// `βᵢₖ ∝ exp(cos(hᵢ, p_k) / √D)`. In training mode with Gumbel enabled the
/// softmax is replaced by a Gumbel-Softmax sample over the same logits.
pub fn disentangled_attention(
    hidden: &HiddenStates,
    params: &ModelParams,
    gumbel: &mut GumbelConfig,
    training: bool,
) -> Result<FactorAssignments> {
    if hidden.is_empty() {
        return Err(invalid("disentangled attention over an empty prefix"));
    }
    let k = params.factors();
    let scale = inv_sqrt_dim(params.dim());
    let mut beta = Matrix::zeros(hidden.len(), k);
    for (i, h) in hidden.states.iter().enumerate() {
        let logits: Vec<f64> = (0..k)
            .map(|f| cosine_similarity(h, params.prototype(f)) * scale)
            .collect();
        let row = if training && gumbel.enabled_in_training {
            sample_gumbel_softmax(&logits, gumbel.tau, &mut gumbel.rng)?
        } else {
            softmax(&logits, None)?
        };
        beta.row_mut(i).copy_from_slice(&row);
    }
    Ok(FactorAssignments { beta })
}

/// `y⁽ᵏ⁾ = LayerNorm(Σᵢ αᵢ βᵢₖ hᵢ)` with the model's shared gain and bias.
pub fn aggregate(
    hidden: &HiddenStates,
    alpha: &AttentionWeights,
    beta: &FactorAssignments,
    params: &ModelParams,
) -> Result<DisentangledStates> {
    let t = hidden.len();
    let d = params.dim();
    let k = params.factors();
    if alpha.alpha.len() != t || beta.beta.shape() != (t, k) || hidden.dim() != d {
        return Err(Error::ShapeMismatch(format!(
            "aggregate: {t} states of dim {}, {} attention weights, {:?} factor assignments, model D={d} K={k}",
            hidden.dim(),
            alpha.alpha.len(),
            beta.beta.shape()
        )));
    }
    let gain = params.weights.ln_gain.value.as_slice();
    let bias = params.weights.ln_bias.value.as_slice();
    let ys = (0..k)
        .map(|f| {
            let mut acc = vec![0.0; d];
            for (i, h) in hidden.states.iter().enumerate() {
                let w = alpha.alpha[i] * beta.beta.get(i, f);
                acc.iter_mut().zip(h).for_each(|(a, x)| *a += w * x);
            }
            layer_norm(&acc, gain, bias, LAYER_NORM_EPSILON)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DisentangledStates { ys })
}

/// `score_v = max_k x_v·y⁽ᵏ⁾ / √D` for every node.
pub fn score_candidates(ys: &DisentangledStates, params: &ModelParams) -> Vec<f64> {
    let scale = inv_sqrt_dim(params.dim());
    (0..params.num_nodes())
        .map(|v| {
            let x = params.embedding(v);
            ys.ys
                .iter()
                .map(|y| dot(x, y) * scale)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// `−score_target + log Σ_v exp(score_v)`.
pub fn step_loss(ys: &DisentangledStates, target: usize, params: &ModelParams) -> Result<f64> {
    params.check_node(target)?;
    let scores = score_candidates(ys, params);
    Ok(log_sum_exp(&scores) - scores[target])
}

/// Candidate scores after the last node of `prefix`, evaluation mode.
pub fn prefix_scores(params: &ModelParams, prefix: &[usize]) -> Result<Vec<f64>> {
    if prefix.is_empty() {
        return Err(invalid("cannot score an empty prefix"));
    }
    let hidden = encode_prefix(params, prefix)?;
    let alpha = sequential_attention(&hidden)?;
    let beta = disentangled_attention(&hidden, params, &mut GumbelConfig::disabled(), false)?;
    let ys = aggregate(&hidden, &alpha, &beta, params)?;
    Ok(score_candidates(&ys, params))
}

/// The `n` highest-scoring nodes, best first; ties go to the lower index.
/// Nodes already in the prefix stay in the candidate set.
pub fn predict_top_n(params: &ModelParams, prefix: &[usize], n: usize) -> Result<Vec<usize>> {
    if n > params.num_nodes() {
        return Err(invalid(format!(
            "requested top {n} of only {} nodes",
            params.num_nodes()
        )));
    }
    let scores = prefix_scores(params, prefix)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(n);
    Ok(order)
}
