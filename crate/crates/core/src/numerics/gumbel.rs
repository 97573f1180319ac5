use rand::distributions::Open01;
use rand::Rng;

use super::ops::{softmax, softmax_backward};
use super::rng::RngState;
use crate::error::{invalid, Result};

/// Draws `n` standard Gumbel variates `−ln(−ln u)`, `u ~ U(0, 1)`.
pub fn sample_gumbel_noise(n: usize, rng: &mut RngState) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            -(-u.ln()).ln()
        })
        .collect()
}

/// `softmax((logits + noise) / tau)` for a fixed noise vector.
pub fn gumbel_softmax_with_noise(logits: &[f64], noise: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(invalid(format!("Gumbel-Softmax temperature must be > 0, got {tau}")));
    }
    if noise.len() != logits.len() {
        return Err(invalid(format!(
            "{} noise values for {} logits",
            noise.len(),
            logits.len()
        )));
    }
    let perturbed: Vec<f64> = logits
        .iter()
        .zip(noise)
        .map(|(l, g)| (l + g) / tau)
        .collect();
    softmax(&perturbed, None)
}

/// Soft (relaxed) Gumbel-Softmax sample; no straight-through rounding.
pub fn sample_gumbel_softmax(logits: &[f64], tau: f64, rng: &mut RngState) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(invalid(format!("Gumbel-Softmax temperature must be > 0, got {tau}")));
    }
    if logits.is_empty() {
        return Err(invalid("Gumbel-Softmax over an empty vector"));
    }
    let noise = sample_gumbel_noise(logits.len(), rng);
    gumbel_softmax_with_noise(logits, &noise, tau)
}

/// Gradient w.r.t. the logits with the noise held fixed.
pub fn gumbel_softmax_backward(probs: &[f64], grad_out: &[f64], tau: f64) -> Vec<f64> {
    let mut g = softmax_backward(probs, grad_out);
    g.iter_mut().for_each(|v| *v /= tau);
    g
}
