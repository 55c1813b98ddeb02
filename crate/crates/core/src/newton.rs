//! Damped Newton ascent with Armijo backtracking, shared by the composite
//! likelihood and the full Plackett-Luce likelihood.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A smooth concave objective over the m-1 free parameter coordinates.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
}

/// Optimizer settings: gradient tolerance, iteration cap, and the parameter
/// magnitude beyond which the maximizer is declared unbounded.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iterations: 500, bound: 50.0 }
    }
}

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;

pub(crate) struct Maximized {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Run damped Newton from `init`. Falls back to a gradient step whenever the
/// Newton system is not usable (indefinite or non-finite Hessian).
pub(crate) fn maximize(obj: &dyn Objective, init: &[f64], opts: &FitOptions) -> Result<Maximized> {
    let dim = obj.dim();
    assert_eq!(init.len(), dim);
    let mut x = init.to_vec();
    let mut value = obj.value(&x);
    let mut iterations = 0;
    let mut gradient_norm;

    loop {
        let grad = obj.gradient(&x);
        gradient_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !gradient_norm.is_finite() {
            return Err(Error::NonFiniteParameter);
        }
        if gradient_norm <= opts.tol {
            return Ok(Maximized { x, value, gradient_norm, iterations, converged: true });
        }
        if iterations >= opts.max_iterations {
            return Ok(Maximized { x, value, gradient_norm, iterations, converged: false });
        }
        iterations += 1;

        let direction = newton_direction(obj, &x, &grad).unwrap_or_else(|| grad.clone());
        let slope: f64 = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();
        let (direction, slope) = if slope > 0.0 {
            (direction, slope)
        } else {
            // Not an ascent direction; use the gradient itself.
            (grad.clone(), gradient_norm * gradient_norm)
        };

        let mut step = 1.0;
        let accepted = loop {
            let trial: Vec<f64> =
                x.iter().zip(&direction).map(|(xi, di)| xi + step * di).collect();
            let trial_value = obj.value(&trial);
            if trial_value.is_finite() && trial_value >= value + ARMIJO_C * step * slope {
                break Some((trial, trial_value));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        match accepted {
            Some((trial, trial_value)) => {
                x = trial;
                value = trial_value;
            }
            None => {
                // Line search stalled: report the current point unconverged.
                return Ok(Maximized { x, value, gradient_norm, iterations, converged: false });
            }
        }

        let norm = x.iter().cloned().fold(0.0, |a: f64, v| a.max(v.abs()));
        if norm > opts.bound {
            return Err(Error::Diverged { norm, bound: opts.bound });
        }
    }
}

fn newton_direction(obj: &dyn Objective, x: &[f64], grad: &[f64]) -> Option<Vec<f64>> {
    let hess = obj.hessian(x);
    if hess.iter().any(|v| !v.is_finite()) {
        return None;
    }
    // Solve (-H) d = g; -H is positive definite on connected instances.
    let neg = -hess;
    let chol = neg.cholesky()?;
    let d = chol.solve(&DVector::from_column_slice(grad));
    Some(d.iter().cloned().collect())
}
