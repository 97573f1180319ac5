//! Central finite differences, the reference every analytic gradient in the
//! crate is checked against.

use super::matrix::{Matrix, Parameter};
use crate::error::{invalid, Result};

/// An ordered collection of trainable tensors.
pub trait ParameterSet {
    fn parameters(&self) -> Vec<&Parameter>;

    fn parameters_mut(&mut self) -> Vec<&mut Parameter>;

    fn parameter_name(&self, index: usize) -> String {
        format!("param[{index}]")
    }

    fn zero_grad(&mut self) {
        self.parameters_mut().into_iter().for_each(Parameter::zero_grad);
    }

    fn gradients(&self) -> Vec<Matrix> {
        self.parameters().into_iter().map(|p| p.gradient.clone()).collect()
    }

    fn scalar_count(&self) -> usize {
        self.parameters().iter().map(|p| p.value.len()).sum()
    }
}

impl ParameterSet for Vec<Parameter> {
    fn parameters(&self) -> Vec<&Parameter> {
        self.iter().collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.iter_mut().collect()
    }
}

/// Estimates `∂f/∂θ` for every scalar of every parameter with
/// `(f(θ + h·e) − f(θ − h·e)) / 2h`. Parameter values are restored exactly.
pub fn finite_difference_gradient<P, F>(mut f: F, params: &mut P, h: f64) -> Result<Vec<Matrix>>
where
    P: ParameterSet + ?Sized,
    F: FnMut(&P) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(invalid(format!("finite-difference step must be > 0, got {h}")));
    }
    let shapes: Vec<(usize, usize)> = params.parameters().iter().map(|p| p.shape()).collect();
    let mut estimates = Vec::with_capacity(shapes.len());
    for (pi, &(rows, cols)) in shapes.iter().enumerate() {
        let mut grad = Matrix::zeros(rows, cols);
        for j in 0..rows * cols {
            let original = params.parameters()[pi].value.as_slice()[j];
            params.parameters_mut()[pi].value.as_mut_slice()[j] = original + h;
            let plus = f(params);
            params.parameters_mut()[pi].value.as_mut_slice()[j] = original - h;
            let minus = f(params);
            params.parameters_mut()[pi].value.as_mut_slice()[j] = original;
            grad.as_mut_slice()[j] = (plus? - minus?) / (2.0 * h);
        }
        estimates.push(grad);
    }
    Ok(estimates)
}

/// Denominator floor for [`max_relative_error`]. Below it the comparison is
/// effectively absolute, which keeps central-difference round-off on
/// near-zero gradients from registering as a mismatch.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-4;

/// `max |a − n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)` over all entries.
pub fn max_relative_error(analytic: &[Matrix], numeric: &[Matrix]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient lists differ in length");
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| {
            assert_eq!(a.shape(), n.shape(), "gradient shapes differ");
            a.as_slice().iter().zip(n.as_slice())
        })
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(RELATIVE_ERROR_FLOOR))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::softmax;

    #[test]
    fn square_at_three() {
        let mut params = vec![Parameter::new(Matrix::row_vector(vec![3.0]))];
        let g = finite_difference_gradient(
            |p: &Vec<Parameter>| Ok(p[0].value.as_slice()[0].powi(2)),
            &mut params,
            1e-4,
        )
        .unwrap();
        assert!((g[0].as_slice()[0] - 6.0).abs() < 1e-6);
        assert_eq!(params[0].value.as_slice(), &[3.0]);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let mut params = vec![Parameter::new(Matrix::row_vector(vec![0.3, -1.2, 2.0]))];
        let g = finite_difference_gradient(
            |p: &Vec<Parameter>| Ok(softmax(p[0].value.as_slice(), None)?.iter().sum()),
            &mut params,
            1e-5,
        )
        .unwrap();
        assert!(g[0].as_slice().iter().all(|v| v.abs() < 1e-7));
    }

    #[test]
    fn rejects_bad_step() {
        let mut params = vec![Parameter::new(Matrix::zeros(1, 1))];
        assert!(finite_difference_gradient(|_: &Vec<Parameter>| Ok(0.0), &mut params, 0.0).is_err());
    }

    #[test]
    fn relative_error_uses_floor() {
        let a = vec![Matrix::row_vector(vec![1.0, 1e-9])];
        let n = vec![Matrix::row_vector(vec![1.0 + 1e-6, 2e-9])];
        // second entry: 1e-9 / RELATIVE_ERROR_FLOOR
        let err = max_relative_error(&a, &n);
        assert!((err - 1e-5).abs() < 1e-12);
    }
}
