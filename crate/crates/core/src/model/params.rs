use rand::Rng;

use crate::error::{invalid, Result};
use crate::numerics::{cosine_similarity, Matrix, Parameter, ParameterSet, RngState, Stream};

/// Pairwise `|cos|` above which a freshly drawn prototype is rejected.
const PROTOTYPE_MAX_ABS_COS: f64 = 0.99;
const PROTOTYPE_MAX_DRAWS: usize = 10_000;

/// Every trainable tensor of the model, generic over the element type so the
/// same layout serves for parameters (`Weights<Parameter>`) and for
/// detached gradients (`Weights<Matrix>`).
///
/// GRU matrices act on column vectors: `w_*` maps the node embedding, `u_*`
/// the previous hidden state, `b_*` is the gate bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    /// Node embeddings `N x D`, shared by the input lookup and output scoring.
    pub embeddings: T,
    pub w_z: T,
    pub u_z: T,
    pub b_z: T,
    pub w_r: T,
    pub u_r: T,
    pub b_r: T,
    pub w_h: T,
    pub u_h: T,
    pub b_h: T,
    /// Factor prototypes `K x D`.
    pub prototypes: T,
    pub ln_gain: T,
    pub ln_bias: T,
}

pub const TENSOR_COUNT: usize = 13;

pub const TENSOR_NAMES: [&str; TENSOR_COUNT] = [
    "embeddings",
    "gru.w_z",
    "gru.u_z",
    "gru.b_z",
    "gru.w_r",
    "gru.u_r",
    "gru.b_r",
    "gru.w_h",
    "gru.u_h",
    "gru.b_h",
    "prototypes",
    "layer_norm.gain",
    "layer_norm.bias",
];

impl<T> Weights<T> {
    pub fn as_array(&self) -> [&T; TENSOR_COUNT] {
        [
            &self.embeddings,
            &self.w_z,
            &self.u_z,
            &self.b_z,
            &self.w_r,
            &self.u_r,
            &self.b_r,
            &self.w_h,
            &self.u_h,
            &self.b_h,
            &self.prototypes,
            &self.ln_gain,
            &self.ln_bias,
        ]
    }

    pub fn as_array_mut(&mut self) -> [&mut T; TENSOR_COUNT] {
        [
            &mut self.embeddings,
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
            &mut self.prototypes,
            &mut self.ln_gain,
            &mut self.ln_bias,
        ]
    }

    fn from_fn(mut f: impl FnMut(&'static str) -> Result<T>) -> Result<Self> {
        Ok(Self {
            embeddings: f("embeddings")?,
            w_z: f("gru.w_z")?,
            u_z: f("gru.u_z")?,
            b_z: f("gru.b_z")?,
            w_r: f("gru.w_r")?,
            u_r: f("gru.u_r")?,
            b_r: f("gru.b_r")?,
            w_h: f("gru.w_h")?,
            u_h: f("gru.u_h")?,
            b_h: f("gru.b_h")?,
            prototypes: f("prototypes")?,
            ln_gain: f("layer_norm.gain")?,
            ln_bias: f("layer_norm.bias")?,
        })
    }
}

/// Gradients detached from the parameters, e.g. computed on a worker thread.
pub type ModelGrads = Weights<Matrix>;

impl ModelGrads {
    pub fn add_assign(&mut self, other: &ModelGrads) -> Result<()> {
        for (a, b) in self.as_array_mut().into_iter().zip(other.as_array()) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.as_array_mut().into_iter().for_each(|m| m.scale(factor));
    }
}

/// The full trainable state θ together with its hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    num_nodes: usize,
    dim: usize,
    factors: usize,
    seed: u64,
    pub weights: Weights<Parameter>,
}

fn shape_of(name: &str, num_nodes: usize, dim: usize, factors: usize) -> (usize, usize) {
    match name {
        "embeddings" => (num_nodes, dim),
        "prototypes" => (factors, dim),
        n if n.starts_with("gru.b_") || n.starts_with("layer_norm.") => (1, dim),
        _ => (dim, dim),
    }
}

fn check_hyper(num_nodes: usize, dim: usize, factors: usize) -> Result<()> {
    if num_nodes == 0 {
        return Err(invalid("model needs at least one node"));
    }
    if dim < 2 {
        return Err(invalid(format!("embedding dimension must be >= 2, got {dim}")));
    }
    if factors == 0 {
        return Err(invalid("number of factors K must be >= 1"));
    }
    Ok(())
}

impl ModelParams {
    /// All weights zero, layer-norm gain one.
    pub fn zeros(num_nodes: usize, dim: usize, factors: usize) -> Result<Self> {
        check_hyper(num_nodes, dim, factors)?;
        let weights = Weights::from_fn(|name| {
            let (r, c) = shape_of(name, num_nodes, dim, factors);
            let fill = if name == "layer_norm.gain" { 1.0 } else { 0.0 };
            Ok(Parameter::new(Matrix::filled(r, c, fill)))
        })?;
        Ok(Self {
            num_nodes,
            dim,
            factors,
            seed: 0,
            weights,
        })
    }

    /// Uniform(−1/√D, 1/√D) for embeddings, GRU weights and prototypes;
    /// layer norm starts as the identity affine map. Prototypes are redrawn
    /// until no two are within `|cos| > 0.99` of each other.
    pub fn init(num_nodes: usize, dim: usize, factors: usize, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(num_nodes, dim, factors)?;
        params.seed = seed;
        let mut rng = RngState::for_stream(seed, Stream::Init);
        let bound = 1.0 / (dim as f64).sqrt();
        for (name, p) in TENSOR_NAMES.iter().zip(params.weights.as_array_mut()) {
            if name.starts_with("layer_norm.") || *name == "prototypes" {
                continue;
            }
            for v in p.value.as_mut_slice() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        let prototypes = &mut params.weights.prototypes.value;
        for k in 0..factors {
            let mut draws = 0;
            loop {
                draws += 1;
                if draws > PROTOTYPE_MAX_DRAWS {
                    return Err(invalid(format!(
                        "could not draw {factors} non-parallel prototypes in dimension {dim}"
                    )));
                }
                for v in prototypes.row_mut(k) {
                    *v = rng.gen_range(-bound..bound);
                }
                let row = prototypes.row(k);
                let clash = (0..k)
                    .any(|j| cosine_similarity(prototypes.row(j), row).abs() > PROTOTYPE_MAX_ABS_COS);
                if !clash {
                    break;
                }
            }
        }
        Ok(params)
    }

    /// Rebuilds parameters from raw tensors, validating every shape.
    pub fn from_tensors(
        num_nodes: usize,
        dim: usize,
        factors: usize,
        seed: u64,
        tensors: Vec<Matrix>,
    ) -> Result<Self> {
        check_hyper(num_nodes, dim, factors)?;
        if tensors.len() != TENSOR_COUNT {
            return Err(invalid(format!(
                "expected {TENSOR_COUNT} tensors, got {}",
                tensors.len()
            )));
        }
        let mut it = tensors.into_iter();
        let weights = Weights::from_fn(|name| {
            let m = it.next().expect("length checked");
            let want = shape_of(name, num_nodes, dim, factors);
            if m.shape() != want {
                return Err(invalid(format!(
                    "tensor `{name}` has shape {:?}, expected {want:?}",
                    m.shape()
                )));
            }
            Ok(Parameter::new(m))
        })?;
        Ok(Self {
            num_nodes,
            dim,
            factors,
            seed,
            weights,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    /// Root seed the parameters were initialised from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn zero_grads(&self) -> ModelGrads {
        Weights::from_fn(|name| {
            let (r, c) = shape_of(name, self.num_nodes, self.dim, self.factors);
            Ok(Matrix::zeros(r, c))
        })
        .expect("shapes are valid")
    }

    /// Adds detached gradients into the parameters' accumulators.
    pub fn accumulate(&mut self, grads: &ModelGrads) -> Result<()> {
        for (p, g) in self.weights.as_array_mut().into_iter().zip(grads.as_array()) {
            p.accumulate(g)?;
        }
        Ok(())
    }

    pub fn embedding(&self, node: usize) -> &[f64] {
        self.weights.embeddings.value.row(node)
    }

    pub fn prototype(&self, k: usize) -> &[f64] {
        self.weights.prototypes.value.row(k)
    }

    pub(crate) fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.num_nodes {
            return Err(invalid(format!(
                "node index {node} out of range for {} nodes",
                self.num_nodes
            )));
        }
        Ok(())
    }
}

impl ParameterSet for ModelParams {
    fn parameters(&self) -> Vec<&Parameter> {
        self.weights.as_array().into_iter().collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.weights.as_array_mut().into_iter().collect()
    }

    fn parameter_name(&self, index: usize) -> String {
        TENSOR_NAMES[index].to_string()
    }
}
