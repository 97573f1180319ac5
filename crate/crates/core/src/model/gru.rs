use super::params::{ModelGrads, ModelParams};
use crate::error::Result;
use crate::numerics::{sigmoid, Matrix};

/// Intermediate values of one GRU step:
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// ĥ  = tanh(W_h x + U_h (r ∘ h) + b_h)
/// h' = (1 − z) ∘ h + z ∘ ĥ
/// ```
#[derive(Debug, Clone)]
pub(crate) struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub gated: Vec<f64>,
    pub candidate: Vec<f64>,
    pub h: Vec<f64>,
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

fn affine(w: &Matrix, u: &Matrix, b: &Matrix, x: &[f64], h: &[f64]) -> Vec<f64> {
    let wx = w.matvec(x);
    let uh = u.matvec(h);
    wx.iter().zip(&uh).zip(b.as_slice()).map(|((a, c), d)| a + c + d).collect()
}

pub(crate) fn gru_forward(params: &ModelParams, h_prev: &[f64], x: Vec<f64>) -> GruCache {
    let w = &params.weights;
    let z: Vec<f64> = affine(&w.w_z.value, &w.u_z.value, &w.b_z.value, &x, h_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let r: Vec<f64> = affine(&w.w_r.value, &w.u_r.value, &w.b_r.value, &x, h_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let gated: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let candidate: Vec<f64> =
        affine(&w.w_h.value, &w.u_h.value, &w.b_h.value, &x, &gated)
            .into_iter()
            .map(f64::tanh)
            .collect();
    let h = h_prev
        .iter()
        .zip(z.iter().zip(&candidate))
        .map(|(hp, (zi, ci))| (1.0 - zi) * hp + zi * ci)
        .collect();
    GruCache {
        x,
        h_prev: h_prev.to_vec(),
        z,
        r,
        gated,
        candidate,
        h,
    }
}

/// Backpropagates `d_h` through one step. Accumulates weight gradients into
/// `grads` and returns `(d_x, d_h_prev)`.
pub(crate) fn gru_backward(
    params: &ModelParams,
    cache: &GruCache,
    d_h: &[f64],
    grads: &mut ModelGrads,
) -> (Vec<f64>, Vec<f64>) {
    let w = &params.weights;
    let d = d_h.len();
    let mut d_h_prev: Vec<f64> = d_h.iter().zip(&cache.z).map(|(g, z)| g * (1.0 - z)).collect();

    let mut da_z = vec![0.0; d];
    let mut da_h = vec![0.0; d];
    for j in 0..d {
        let dz = d_h[j] * (cache.candidate[j] - cache.h_prev[j]);
        da_z[j] = dz * cache.z[j] * (1.0 - cache.z[j]);
        let dc = d_h[j] * cache.z[j];
        da_h[j] = dc * (1.0 - cache.candidate[j] * cache.candidate[j]);
    }

    grads.w_h.add_outer(&da_h, &cache.x);
    grads.u_h.add_outer(&da_h, &cache.gated);
    grads.b_h.add_to_row(0, &da_h);
    let d_gated = w.u_h.value.matvec_transposed(&da_h);
    let mut da_r = vec![0.0; d];
    for j in 0..d {
        let dr = d_gated[j] * cache.h_prev[j];
        d_h_prev[j] += d_gated[j] * cache.r[j];
        da_r[j] = dr * cache.r[j] * (1.0 - cache.r[j]);
    }

    grads.w_r.add_outer(&da_r, &cache.x);
    grads.u_r.add_outer(&da_r, &cache.h_prev);
    grads.b_r.add_to_row(0, &da_r);
    grads.w_z.add_outer(&da_z, &cache.x);
    grads.u_z.add_outer(&da_z, &cache.h_prev);
    grads.b_z.add_to_row(0, &da_z);

    let mut d_x = w.w_h.value.matvec_transposed(&da_h);
    add_into(&mut d_x, &w.w_r.value.matvec_transposed(&da_r));
    add_into(&mut d_x, &w.w_z.value.matvec_transposed(&da_z));
    add_into(&mut d_h_prev, &w.u_r.value.matvec_transposed(&da_r));
    add_into(&mut d_h_prev, &w.u_z.value.matvec_transposed(&da_z));
    (d_x, d_h_prev)
}

/// One evaluation-mode GRU step on the embedding of `node`.
pub fn gru_step(params: &ModelParams, h_prev: &[f64], node: usize) -> Result<Vec<f64>> {
    params.check_node(node)?;
    if h_prev.len() != params.dim() {
        return Err(crate::error::invalid(format!(
            "hidden state has length {}, expected {}",
            h_prev.len(),
            params.dim()
        )));
    }
    Ok(gru_forward(params, h_prev, params.embedding(node).to_vec()).h)
}
