//! Straight-line reference computations shared by the integration tests.
//! Nothing here calls the library's model or numerics code; it only reads
//! parameter values.

#![allow(dead_code)]

use rand::Rng;
use sidda::data::Cascade;
use sidda::model::ModelParams;
use sidda::numerics::Matrix;

pub struct RefWeights {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub x: Vec<Vec<f64>>,
    pub wz: Vec<Vec<f64>>,
    pub uz: Vec<Vec<f64>>,
    pub bz: Vec<f64>,
    pub wr: Vec<Vec<f64>>,
    pub ur: Vec<Vec<f64>>,
    pub br: Vec<f64>,
    pub wh: Vec<Vec<f64>>,
    pub uh: Vec<Vec<f64>>,
    pub bh: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| m.get(r, c)).collect()).collect()
}

fn flat(m: &Matrix) -> Vec<f64> {
    rows(m).concat()
}

impl RefWeights {
    pub fn from(params: &ModelParams) -> Self {
        let w = &params.weights;
        Self {
            n: params.num_nodes(),
            d: params.dim(),
            k: params.factors(),
            x: rows(&w.embeddings.value),
            wz: rows(&w.w_z.value),
            uz: rows(&w.u_z.value),
            bz: flat(&w.b_z.value),
            wr: rows(&w.w_r.value),
            ur: rows(&w.u_r.value),
            br: flat(&w.b_r.value),
            wh: rows(&w.w_h.value),
            uh: rows(&w.u_h.value),
            bh: flat(&w.b_h.value),
            p: rows(&w.prototypes.value),
            gain: flat(&w.ln_gain.value),
            bias: flat(&w.ln_bias.value),
        }
    }

    fn affine(&self, w: &[Vec<f64>], a: &[f64], u: &[Vec<f64>], b: &[f64], bias: &[f64], j: usize) -> f64 {
        let mut s = bias[j];
        for c in 0..self.d {
            s += w[j][c] * a[c] + u[j][c] * b[c];
        }
        s
    }

    pub fn gru(&self, h: &[f64], node: usize) -> Vec<f64> {
        let x = &self.x[node];
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let z: Vec<f64> = (0..self.d).map(|j| sig(self.affine(&self.wz, x, &self.uz, h, &self.bz, j))).collect();
        let r: Vec<f64> = (0..self.d).map(|j| sig(self.affine(&self.wr, x, &self.ur, h, &self.br, j))).collect();
        let rh: Vec<f64> = (0..self.d).map(|j| r[j] * h[j]).collect();
        (0..self.d)
            .map(|j| {
                let cand = self.affine(&self.wh, x, &self.uh, &rh, &self.bh, j).tanh();
                (1.0 - z[j]) * h[j] + z[j] * cand
            })
            .collect()
    }

    pub fn encode(&self, prefix: &[usize]) -> Vec<Vec<f64>> {
        let mut h = vec![0.0; self.d];
        prefix
            .iter()
            .map(|&v| {
                h = self.gru(&h, v);
                h.clone()
            })
            .collect()
    }

    fn scale(&self) -> f64 {
        1.0 / (self.d as f64).sqrt()
    }

    pub fn attention(&self, hs: &[Vec<f64>]) -> Vec<f64> {
        let last = hs.last().unwrap();
        let e: Vec<f64> = hs.iter().map(|h| dot(h, last) * self.scale()).collect();
        normalise_exp(&e)
    }

    pub fn beta_row(&self, h: &[f64]) -> Vec<f64> {
        let e: Vec<f64> = self
            .p
            .iter()
            .map(|p| dot(h, p) / (dot(h, h).sqrt() * dot(p, p).sqrt()).max(1e-12) * self.scale())
            .collect();
        normalise_exp(&e)
    }

    pub fn layer_norm(&self, v: &[f64]) -> Vec<f64> {
        let mean = v.iter().sum::<f64>() / self.d as f64;
        let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / self.d as f64;
        let sd = (var + 1e-10).sqrt();
        (0..self.d).map(|j| self.gain[j] * (v[j] - mean) / sd + self.bias[j]).collect()
    }

    /// Per-factor summaries for one prefix, evaluation mode.
    pub fn factor_states(&self, prefix: &[usize]) -> Vec<Vec<f64>> {
        let hs = self.encode(prefix);
        let alpha = self.attention(&hs);
        (0..self.k)
            .map(|f| {
                let mut s = vec![0.0; self.d];
                for (i, h) in hs.iter().enumerate() {
                    let w = alpha[i] * self.beta_row(h)[f];
                    for j in 0..self.d {
                        s[j] += w * h[j];
                    }
                }
                self.layer_norm(&s)
            })
            .collect()
    }

    /// Candidate scores for one prefix, double loop over nodes and factors.
    pub fn scores(&self, prefix: &[usize]) -> Vec<f64> {
        let ys = self.factor_states(prefix);
        (0..self.n)
            .map(|v| {
                let mut best = f64::NEG_INFINITY;
                for y in &ys {
                    best = best.max(dot(&self.x[v], y) * self.scale());
                }
                best
            })
            .collect()
    }

    /// Step losses of the plain GRU plus attention path, no prototypes.
    pub fn attention_only_losses(&self, cascade: &[usize]) -> Vec<f64> {
        (1..cascade.len())
            .map(|t| {
                let hs = self.encode(&cascade[..t]);
                let alpha = self.attention(&hs);
                let mut s = vec![0.0; self.d];
                for (i, h) in hs.iter().enumerate() {
                    for j in 0..self.d {
                        s[j] += alpha[i] * h[j];
                    }
                }
                let y = self.layer_norm(&s);
                let logits: Vec<f64> = self.x.iter().map(|x| dot(x, &y) * self.scale()).collect();
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
                lse - logits[cascade[t]]
            })
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalise_exp(e: &[f64]) -> Vec<f64> {
    let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = e.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = ex.iter().sum();
    ex.iter().map(|v| v / z).collect()
}

/// hits@N and map@N by sorting every candidate list.
pub struct BruteForce {
    pub hits: Vec<f64>,
    pub map: Vec<f64>,
    pub points: usize,
}

/// Ranks come from a full sort by (score descending, node index ascending).
pub fn brute_force_metrics(
    score_fn: impl Fn(&[usize]) -> Vec<f64>,
    cascades: &[Cascade],
    cutoffs: &[usize],
) -> BruteForce {
    let mut hit_counts = vec![0usize; cutoffs.len()];
    let mut rr_sums = vec![0.0; cutoffs.len()];
    let mut points = 0;
    for c in cascades {
        for t in 1..c.nodes.len() {
            let scores = score_fn(&c.nodes[..t]);
            let mut order: Vec<usize> = (0..scores.len()).collect();
            order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
            let rank = order.iter().position(|&v| v == c.nodes[t]).unwrap() + 1;
            for (i, &n) in cutoffs.iter().enumerate() {
                if rank <= n {
                    hit_counts[i] += 1;
                    rr_sums[i] += 1.0 / rank as f64;
                }
            }
            points += 1;
        }
    }
    BruteForce {
        hits: hit_counts.iter().map(|&h| h as f64 / points as f64).collect(),
        map: rr_sums.iter().map(|&s| s / points as f64).collect(),
        points,
    }
}

pub fn random_cascade<R: Rng>(rng: &mut R, num_nodes: usize, len: usize) -> Vec<usize> {
    (0..len).map(|_| rng.gen_range(0..num_nodes)).collect()
}
