use crate::error::{invalid, Result};

/// Lower clamp on `‖a‖·‖b‖` in [`cosine_similarity`].
pub const NORM_FLOOR: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `log Σ exp(xᵢ)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Softmax with optional mask (`true` = position participates).
///
/// Masked positions are exactly zero in the output and their logits are never
/// read, so they may hold `-inf`.
pub fn softmax(logits: &[f64], mask: Option<&[bool]>) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(invalid("softmax of an empty vector"));
    }
    if let Some(mask) = mask {
        if mask.len() != logits.len() {
            return Err(invalid(format!(
                "softmax mask length {} does not match {} logits",
                mask.len(),
                logits.len()
            )));
        }
    }
    let active = |i: usize| mask.is_none_or(|m| m[i]);
    let mut max = f64::NEG_INFINITY;
    let mut any = false;
    for (i, &l) in logits.iter().enumerate() {
        if active(i) {
            if !l.is_finite() {
                return Err(invalid(format!("non-finite logit {l} at position {i}")));
            }
            any = true;
            max = max.max(l);
        }
    }
    if !any {
        return Err(invalid("softmax over a fully masked vector"));
    }
    let mut out: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(i, &l)| if active(i) { (l - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    Ok(out)
}

/// Vector-Jacobian product of softmax: `pᵢ (gᵢ − Σⱼ pⱼ gⱼ)`.
pub fn softmax_backward(probs: &[f64], grad_out: &[f64]) -> Vec<f64> {
    let inner = dot(probs, grad_out);
    probs
        .iter()
        .zip(grad_out)
        .map(|(p, g)| p * (g - inner))
        .collect()
}

/// Values kept from the forward pass of [`layer_norm_forward`].
#[derive(Debug, Clone)]
pub struct LayerNormCache {
    pub normalized: Vec<f64>,
    pub inv_std: f64,
}

pub fn layer_norm(v: &[f64], gain: &[f64], bias: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    layer_norm_forward(v, gain, bias, epsilon).map(|(out, _)| out)
}

/// `gain ∘ (v − mean) / sqrt(var + ε) + bias` with population variance.
pub fn layer_norm_forward(
    v: &[f64],
    gain: &[f64],
    bias: &[f64],
    epsilon: f64,
) -> Result<(Vec<f64>, LayerNormCache)> {
    let d = v.len();
    if gain.len() != d || bias.len() != d {
        return Err(invalid(format!(
            "layer_norm lengths differ: input {d}, gain {}, bias {}",
            gain.len(),
            bias.len()
        )));
    }
    if d < 2 {
        return Err(invalid("layer_norm needs at least 2 features"));
    }
    let n = d as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + epsilon).sqrt();
    let normalized: Vec<f64> = v.iter().map(|x| (x - mean) * inv_std).collect();
    let out = normalized
        .iter()
        .zip(gain.iter().zip(bias))
        .map(|(x, (g, b))| g * x + b)
        .collect();
    Ok((out, LayerNormCache { normalized, inv_std }))
}

/// Returns `(d_input, d_gain, d_bias)`.
pub fn layer_norm_backward(
    cache: &LayerNormCache,
    gain: &[f64],
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = cache.normalized.len() as f64;
    let d_gain: Vec<f64> = grad_out
        .iter()
        .zip(&cache.normalized)
        .map(|(g, x)| g * x)
        .collect();
    let d_bias = grad_out.to_vec();
    let d_norm: Vec<f64> = grad_out.iter().zip(gain).map(|(g, w)| g * w).collect();
    let sum_d = d_norm.iter().sum::<f64>();
    let sum_dx = dot(&d_norm, &cache.normalized);
    let d_input = d_norm
        .iter()
        .zip(&cache.normalized)
        .map(|(dn, x)| cache.inv_std / n * (n * dn - sum_d - x * sum_dx))
        .collect();
    (d_input, d_gain, d_bias)
}

/// `a·b / max(‖a‖‖b‖, NORM_FLOOR)`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let denom = (dot(a, a).sqrt() * dot(b, b).sqrt()).max(NORM_FLOOR);
    dot(a, b) / denom
}

/// Returns `(d_a, d_b)` for upstream gradient `grad_out`.
pub fn cosine_backward(a: &[f64], b: &[f64], grad_out: f64) -> (Vec<f64>, Vec<f64>) {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    let raw = na * nb;
    if raw <= NORM_FLOOR {
        // Denominator is a constant in the clamped region.
        let s = grad_out / NORM_FLOOR;
        return (
            b.iter().map(|x| s * x).collect(),
            a.iter().map(|x| s * x).collect(),
        );
    }
    let cos = dot(a, b) / raw;
    let da = a
        .iter()
        .zip(b)
        .map(|(ai, bi)| grad_out * (bi / raw - cos * ai / (na * na)))
        .collect();
    let db = a
        .iter()
        .zip(b)
        .map(|(ai, bi)| grad_out * (ai / raw - cos * bi / (nb * nb)))
        .collect();
    (da, db)
}
