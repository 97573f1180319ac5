use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParameterSet};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam with bias correction. Moment buffers mirror the parameter shapes.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    lr: f64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new<P: ParameterSet + ?Sized>(params: &P, lr: f64) -> Self {
        let zeros = || {
            params
                .parameters()
                .iter()
                .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect::<Vec<_>>()
        };
        Self {
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
            step: 0,
            lr,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Learning rate used by the most recent update.
    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Applies one update from the accumulated gradients, then resets them.
    ///
    /// A non-finite gradient aborts before any parameter is touched.
    pub fn step<P: ParameterSet + ?Sized>(&mut self, params: &mut P, lr: f64) -> Result<()> {
        if let Some(i) = params
            .parameters()
            .iter()
            .position(|p| !p.gradient.is_finite())
        {
            return Err(Error::NonFiniteGradient {
                parameter: params.parameter_name(i),
            });
        }
        self.step += 1;
        self.lr = lr;
        let t = self.step as i32;
        let correct1 = 1.0 - self.beta1.powi(t);
        let correct2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in params
            .parameters_mut()
            .into_iter()
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            let grads = p.gradient.as_slice();
            for (j, w) in p.value.as_mut_slice().iter_mut().enumerate() {
                let g = grads[j];
                let mj = &mut m.as_mut_slice()[j];
                *mj = self.beta1 * *mj + (1.0 - self.beta1) * g;
                let vj = &mut v.as_mut_slice()[j];
                *vj = self.beta2 * *vj + (1.0 - self.beta2) * g * g;
                let m_hat = *mj / correct1;
                let v_hat = *vj / correct2;
                *w -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
            p.zero_grad();
        }
        Ok(())
    }
}
