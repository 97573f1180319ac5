//! Whole-cascade forward pass with manual backpropagation.
//!
//! For a cascade `v_1..v_L` the GRU consumes `v_1..v_{L−1}`; prefix `t`
//! predicts `v_{t+1}`. Factor assignments depend only on a hidden state and
//! the prototypes, so they are computed (and, in training, noised) once per
//! position and reused by every later prefix.

use rand::Rng;

use super::gru::{gru_backward, gru_forward, GruCache};
use super::params::{ModelGrads, ModelParams};
use super::{inv_sqrt_dim, DisentangledStates, Dropout, GumbelConfig, LAYER_NORM_EPSILON};
use crate::error::{Error, Result};
use crate::numerics::{
    cosine_backward, cosine_similarity, dot, gumbel_softmax_backward, gumbel_softmax_with_noise,
    layer_norm_backward, layer_norm_forward, log_sum_exp, sample_gumbel_noise, softmax,
    softmax_backward, LayerNormCache,
};

/// Evaluation runs without noise; training may add Gumbel noise to the
/// factor assignments and dropout to the GRU inputs.
pub enum Mode<'a> {
    Eval,
    Train {
        gumbel: &'a mut GumbelConfig,
        dropout: Option<&'a mut Dropout>,
    },
}

#[derive(Debug, Clone)]
pub struct CascadeOutput {
    /// Sum of the per-step losses.
    pub total_loss: f64,
    pub step_losses: Vec<f64>,
    /// Factor summaries after each prefix `1..L−1`.
    pub states: Vec<DisentangledStates>,
}

struct Position {
    node: usize,
    /// Inverted-dropout multipliers applied to the embedding, if any.
    keep: Option<Vec<f64>>,
    gru: GruCache,
    beta: Vec<f64>,
    /// Temperature when the row was drawn with Gumbel noise.
    gumbel_tau: Option<f64>,
}

struct Step {
    alpha: Vec<f64>,
    ln: Vec<LayerNormCache>,
    ys: Vec<Vec<f64>>,
    scores: Vec<f64>,
    best_factor: Vec<usize>,
}

fn check_cascade(params: &ModelParams, cascade: &[usize]) -> Result<()> {
    if cascade.len() < 2 {
        return Err(Error::DegenerateCascade { len: cascade.len() });
    }
    cascade.iter().try_for_each(|&v| params.check_node(v))
}

fn encode(params: &ModelParams, nodes: &[usize], mode: &mut Mode<'_>) -> Result<Vec<Position>> {
    let d = params.dim();
    let k = params.factors();
    let scale = inv_sqrt_dim(d);
    let mut positions: Vec<Position> = Vec::with_capacity(nodes.len());
    let mut h = vec![0.0; d];
    for &node in nodes {
        let mut x = params.embedding(node).to_vec();
        let mut keep = None;
        if let Mode::Train {
            dropout: Some(dropout),
            ..
        } = mode
        {
            if dropout.rate > 0.0 {
                let inv_keep = 1.0 / (1.0 - dropout.rate);
                let mask: Vec<f64> = (0..d)
                    .map(|_| {
                        if dropout.rng.gen::<f64>() < dropout.rate {
                            0.0
                        } else {
                            inv_keep
                        }
                    })
                    .collect();
                x.iter_mut().zip(&mask).for_each(|(a, m)| *a *= m);
                keep = Some(mask);
            }
        }
        let gru = gru_forward(params, &h, x);
        h.clone_from(&gru.h);

        let logits: Vec<f64> = (0..k)
            .map(|f| cosine_similarity(&gru.h, params.prototype(f)) * scale)
            .collect();
        let (beta, gumbel_tau) = match mode {
            Mode::Train { gumbel, .. } if gumbel.enabled_in_training => {
                let noise = sample_gumbel_noise(k, &mut gumbel.rng);
                (gumbel_softmax_with_noise(&logits, &noise, gumbel.tau)?, Some(gumbel.tau))
            }
            _ => (softmax(&logits, None)?, None),
        };
        positions.push(Position {
            node,
            keep,
            gru,
            beta,
            gumbel_tau,
        });
    }
    Ok(positions)
}

/// Forward computation for the prefix ending at position `t` (0-based).
fn step_forward(params: &ModelParams, positions: &[Position], t: usize) -> Result<Step> {
    let d = params.dim();
    let k = params.factors();
    let scale = inv_sqrt_dim(d);
    let current = &positions[t].gru.h;
    let att_scores: Vec<f64> = positions[..=t]
        .iter()
        .map(|p| dot(&p.gru.h, current) * scale)
        .collect();
    let alpha = softmax(&att_scores, None)?;

    let gain = params.weights.ln_gain.value.as_slice();
    let bias = params.weights.ln_bias.value.as_slice();
    let mut ln = Vec::with_capacity(k);
    let mut ys = Vec::with_capacity(k);
    for f in 0..k {
        let mut acc = vec![0.0; d];
        for (i, p) in positions[..=t].iter().enumerate() {
            let w = alpha[i] * p.beta[f];
            acc.iter_mut().zip(&p.gru.h).for_each(|(a, x)| *a += w * x);
        }
        let (y, cache) = layer_norm_forward(&acc, gain, bias, LAYER_NORM_EPSILON)?;
        ys.push(y);
        ln.push(cache);
    }

    let n = params.num_nodes();
    let mut scores = Vec::with_capacity(n);
    let mut best_factor = Vec::with_capacity(n);
    for v in 0..n {
        let x = params.embedding(v);
        // Ties resolve to the smallest factor index.
        let (best, score) = ys
            .iter()
            .map(|y| dot(x, y) * scale)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (f, s)| if s > acc.1 { (f, s) } else { acc });
        scores.push(score);
        best_factor.push(best);
    }
    Ok(Step {
        alpha,
        ln,
        ys,
        scores,
        best_factor,
    })
}

fn run(
    params: &ModelParams,
    cascade: &[usize],
    mode: &mut Mode<'_>,
    with_grads: bool,
) -> Result<(CascadeOutput, Option<ModelGrads>)> {
    check_cascade(params, cascade)?;
    let d = params.dim();
    let k = params.factors();
    let n = params.num_nodes();
    let scale = inv_sqrt_dim(d);
    let positions = encode(params, &cascade[..cascade.len() - 1], mode)?;
    let steps = positions.len();

    let mut grads = with_grads.then(|| params.zero_grads());
    let mut d_hidden = vec![vec![0.0; d]; steps];
    let mut d_beta = vec![vec![0.0; k]; steps];
    let gain = params.weights.ln_gain.value.as_slice();

    let mut step_losses = Vec::with_capacity(steps);
    let mut states = Vec::with_capacity(steps);
    for t in 0..steps {
        let step = step_forward(params, &positions, t)?;
        let target = cascade[t + 1];
        let lse = log_sum_exp(&step.scores);
        step_losses.push(lse - step.scores[target]);

        if let Some(grads) = grads.as_mut() {
            // d loss / d score_v = p_v − [v = target]
            let mut d_y = vec![vec![0.0; d]; k];
            for v in 0..n {
                let mut g = (step.scores[v] - lse).exp();
                if v == target {
                    g -= 1.0;
                }
                let g = g * scale;
                let f = step.best_factor[v];
                let x = params.embedding(v);
                d_y[f].iter_mut().zip(x).for_each(|(a, xv)| *a += g * xv);
                grads.embeddings.add_scaled_to_row(v, &step.ys[f], g);
            }

            let mut d_alpha = vec![0.0; t + 1];
            for f in 0..k {
                let (d_sum, d_gain, d_bias) = layer_norm_backward(&step.ln[f], gain, &d_y[f]);
                grads.ln_gain.add_to_row(0, &d_gain);
                grads.ln_bias.add_to_row(0, &d_bias);
                for (i, p) in positions[..=t].iter().enumerate() {
                    let proj = dot(&d_sum, &p.gru.h);
                    d_alpha[i] += p.beta[f] * proj;
                    d_beta[i][f] += step.alpha[i] * proj;
                    let w = step.alpha[i] * p.beta[f];
                    d_hidden[i].iter_mut().zip(&d_sum).for_each(|(a, s)| *a += w * s);
                }
            }

            let d_scores = softmax_backward(&step.alpha, &d_alpha);
            for (i, ds) in d_scores.iter().enumerate() {
                let g = ds * scale;
                let (hi, ht) = (&positions[i].gru.h, &positions[t].gru.h);
                let contrib_i: Vec<f64> = ht.iter().map(|v| g * v).collect();
                let contrib_t: Vec<f64> = hi.iter().map(|v| g * v).collect();
                d_hidden[i].iter_mut().zip(&contrib_i).for_each(|(a, c)| *a += c);
                d_hidden[t].iter_mut().zip(&contrib_t).for_each(|(a, c)| *a += c);
            }
        }
        states.push(DisentangledStates { ys: step.ys });
    }

    if let Some(grads) = grads.as_mut() {
        for (i, p) in positions.iter().enumerate() {
            let d_logits = match p.gumbel_tau {
                Some(tau) => gumbel_softmax_backward(&p.beta, &d_beta[i], tau),
                None => softmax_backward(&p.beta, &d_beta[i]),
            };
            for (f, dl) in d_logits.iter().enumerate() {
                if *dl == 0.0 {
                    continue;
                }
                let (d_h, d_p) = cosine_backward(&p.gru.h, params.prototype(f), dl * scale);
                d_hidden[i].iter_mut().zip(&d_h).for_each(|(a, c)| *a += c);
                grads.prototypes.add_to_row(f, &d_p);
            }
        }

        let mut carry = vec![0.0; d];
        for (i, p) in positions.iter().enumerate().rev() {
            let d_h: Vec<f64> = d_hidden[i].iter().zip(&carry).map(|(a, b)| a + b).collect();
            let (mut d_x, d_prev) = gru_backward(params, &p.gru, &d_h, grads);
            if let Some(keep) = &p.keep {
                d_x.iter_mut().zip(keep).for_each(|(a, m)| *a *= m);
            }
            grads.embeddings.add_to_row(p.node, &d_x);
            carry = d_prev;
        }
    }

    let total_loss = step_losses.iter().sum();
    Ok((
        CascadeOutput {
            total_loss,
            step_losses,
            states,
        },
        grads,
    ))
}

/// Summed next-node loss over every prefix of `cascade`.
///
/// Cascades shorter than two nodes yield [`Error::DegenerateCascade`].
pub fn forward_cascade(
    params: &ModelParams,
    cascade: &[usize],
    gumbel: &mut GumbelConfig,
    training: bool,
) -> Result<CascadeOutput> {
    let mut mode = if training {
        Mode::Train {
            gumbel,
            dropout: None,
        }
    } else {
        Mode::Eval
    };
    run(params, cascade, &mut mode, false).map(|(out, _)| out)
}

/// Forward pass plus the gradient of `total_loss` w.r.t. every parameter.
pub fn cascade_gradients(
    params: &ModelParams,
    cascade: &[usize],
    mode: &mut Mode<'_>,
) -> Result<(CascadeOutput, ModelGrads)> {
    let (out, grads) = run(params, cascade, mode, true)?;
    Ok((out, grads.expect("requested gradients")))
}

/// Evaluation-mode candidate scores for every prediction point of `cascade`,
/// in prefix order.
pub fn cascade_step_scores(params: &ModelParams, cascade: &[usize]) -> Result<Vec<Vec<f64>>> {
    check_cascade(params, cascade)?;
    let positions = encode(params, &cascade[..cascade.len() - 1], &mut Mode::Eval)?;
    (0..positions.len())
        .map(|t| step_forward(params, &positions, t).map(|s| s.scores))
        .collect()
}
