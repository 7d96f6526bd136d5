//! Levenberg-Marquardt for small dense least-squares problems.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative cost decrease below which an accepted step ends the search.
    pub cost_tolerance: f64,
    /// Central-difference step for the Jacobian.
    pub jacobian_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            cost_tolerance: 1e-10,
            jacobian_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Ratio of extreme eigenvalues of `J^T J` at the solution.
    pub condition_number: f64,
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian<F>(f: &F, x: &[f64], r_len: usize, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut jac = DMatrix::zeros(r_len, x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = step * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let plus = f(&probe)?;
        probe[j] = x[j] - h;
        let minus = f(&probe)?;
        probe[j] = x[j];
        for i in 0..r_len {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn condition_number(jtj: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(jtj.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Minimizes `sum r_i(x)^2` from `x0`.
///
/// A step is accepted only if it lowers the cost. The search stops once an
/// accepted step lowers the cost by less than `cost_tolerance` relative, or
/// when no damping level produces a decrease.
pub fn levenberg_marquardt<F>(f: F, x0: &[f64], options: LmOptions) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    let mut cost = cost_of(&r);
    if !cost.is_finite() {
        return Err(Error::Invalid("non-finite residuals at the starting point".into()));
    }
    let n = x.len();
    if n == 0 {
        return Ok(LmOutcome {
            x,
            cost,
            iterations: 0,
            converged: true,
            condition_number: 1.0,
        });
    }
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut jtj = DMatrix::zeros(n, n);
    while iterations < options.max_iterations {
        iterations += 1;
        let jac = jacobian(&f, &x, r.len(), options.jacobian_step)?;
        jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r);
        if cost == 0.0 || grad.amax() == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while mu < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&grad));
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let trial_r = match f(&trial) {
                Ok(v) => v,
                Err(_) => {
                    mu *= 10.0;
                    continue;
                }
            };
            let trial_cost = cost_of(&trial_r);
            if trial_cost.is_finite() && trial_cost < cost {
                let decrease = cost - trial_cost;
                x = trial;
                r = trial_r;
                let previous = cost;
                cost = trial_cost;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                if decrease <= options.cost_tolerance * previous {
                    converged = true;
                }
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            // no damping level improves the cost: a minimum to working precision
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Ok(LmOutcome {
        x,
        cost,
        iterations,
        converged,
        condition_number: condition_number(&jtj),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let f = |x: &[f64]| -> Result<Vec<f64>> { Ok(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]) };
        let out = levenberg_marquardt(f, &[-1.2, 1.0], LmOptions::default()).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn exponential_fit_recovers_parameters() {
        let ts: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
        let data: Vec<f64> = ts.iter().map(|t| 2.5 * (-0.7 * t).exp()).collect();
        let f = |x: &[f64]| -> Result<Vec<f64>> {
            Ok(ts
                .iter()
                .zip(&data)
                .map(|(t, y)| x[0] * (-x[1] * t).exp() - y)
                .collect())
        };
        let out = levenberg_marquardt(f, &[1.0, 0.2], LmOptions::default()).unwrap();
        assert!(out.cost < 1e-20);
        assert!((out.x[0] - 2.5).abs() < 1e-8 && (out.x[1] - 0.7).abs() < 1e-8);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let f = |x: &[f64]| -> Result<Vec<f64>> { Ok(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]) };
        let options = LmOptions {
            max_iterations: 2,
            ..LmOptions::default()
        };
        let out = levenberg_marquardt(f, &[-1.2, 1.0], options).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }
}
