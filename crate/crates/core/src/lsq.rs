//! Levenberg–Marquardt nonlinear least squares.
//!
//! Minimizes `½‖r(x)‖²` with Marquardt's diagonal scaling and Nielsen's damping update.
//! Problems supply residuals and, optionally, an analytic Jacobian; otherwise central
//! differences are used.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub trait LeastSquaresProblem {
    fn residuals(&self, params: &[f64]) -> DVector<f64>;

    /// Analytic Jacobian `∂r_i/∂x_j`, if available.
    fn jacobian(&self, _params: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    /// Converged when every component of an accepted step satisfies
    /// `|δ_j| ≤ step_tol · (|x_j| + step_tol)`.
    pub step_tol: f64,
    pub max_iterations: usize,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            step_tol: 1e-10,
            max_iterations: 200,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    pub residuals: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    /// `½‖r‖²` at `params`.
    pub cost: f64,
    pub iterations: usize,
}

impl LmReport {
    /// Root-mean-square residual.
    pub fn rms(&self) -> f64 {
        (self.residuals.norm_squared() / self.residuals.len().max(1) as f64).sqrt()
    }

    /// `s²(JᵀJ)⁻¹` with `s² = ‖r‖² / (m − n)`, or `None` if singular or no degrees of freedom.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let (m, n) = self.jacobian.shape();
        if m <= n {
            return None;
        }
        let s2 = self.residuals.norm_squared() / (m - n) as f64;
        let normal = self.jacobian.transpose() * &self.jacobian;
        normal.try_inverse().map(|inv| inv * s2)
    }
}

fn numeric_jacobian<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    r0: &DVector<f64>,
) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = 1e-6 * x[j].abs().max(1e-3);
        probe[j] = x[j] + h;
        let up = problem.residuals(&probe);
        probe[j] = x[j] - h;
        let down = problem.residuals(&probe);
        probe[j] = x[j];
        jac.set_column(j, &((up - down) / (2.0 * h)));
    }
    jac
}

fn jacobian_at<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    r: &DVector<f64>,
) -> DMatrix<f64> {
    problem
        .jacobian(x)
        .unwrap_or_else(|| numeric_jacobian(problem, x, r))
}

pub fn levenberg_marquardt<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    initial: &[f64],
    opts: &LmOptions,
) -> Result<LmReport> {
    let n = initial.len();
    let mut x = initial.to_vec();
    let mut r = problem.residuals(&x);
    if r.len() < n {
        return Err(Error::Fit {
            reason: format!("{} residuals cannot determine {} parameters", r.len(), n),
            best: None,
        });
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit {
            reason: "non-finite residuals at the initial point".into(),
            best: Some(x),
        });
    }
    let mut cost = 0.5 * r.norm_squared();
    let mut jac = jacobian_at(problem, &x, &r);
    let mut scale: DVector<f64> = DVector::zeros(n);
    let mut lambda = opts.initial_damping;
    let mut nu = 2.0;

    for iteration in 1..=opts.max_iterations {
        let normal = jac.transpose() * &jac;
        let gradient = jac.transpose() * &r;
        for j in 0..n {
            scale[j] = scale[j].max(normal[(j, j)]).max(f64::MIN_POSITIVE);
        }

        let mut accepted = false;
        while !accepted {
            if lambda > 1e30 {
                // No descent step is representable; x is stationary to machine precision.
                return Ok(LmReport {
                    params: x,
                    residuals: r,
                    jacobian: jac,
                    cost,
                    iterations: iteration,
                });
            }
            let mut damped = normal.clone();
            for j in 0..n {
                damped[(j, j)] += lambda * scale[j];
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&(-&gradient)),
                None => {
                    lambda *= nu;
                    nu *= 2.0;
                    continue;
                }
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let trial_r = problem.residuals(&trial);
            let trial_cost = 0.5 * trial_r.norm_squared();
            let predicted = -(gradient.dot(&step) + 0.5 * step.dot(&(&normal * &step)));
            let rho = if predicted > 0.0 {
                (cost - trial_cost) / predicted
            } else {
                -1.0
            };
            if trial_cost.is_finite() && rho > 1e-4 {
                let small = step
                    .iter()
                    .zip(&x)
                    .all(|(d, xi)| d.abs() <= opts.step_tol * (xi.abs() + opts.step_tol));
                x = trial;
                r = trial_r;
                cost = trial_cost;
                jac = jacobian_at(problem, &x, &r);
                lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                accepted = true;
                if small || cost == 0.0 {
                    return Ok(LmReport {
                        params: x,
                        residuals: r,
                        jacobian: jac,
                        cost,
                        iterations: iteration,
                    });
                }
            } else {
                lambda *= nu;
                nu *= 2.0;
            }
        }
    }
    Err(Error::Fit {
        reason: format!(
            "no convergence within {} iterations (cost {cost:e})",
            opts.max_iterations
        ),
        best: Some(x),
    })
}
