//! Bounded Levenberg-Marquardt least squares with a forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative cost decrease below which an accepted step counts as converged.
    pub cost_tolerance: f64,
    pub step_tolerance: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            cost_tolerance: 1e-10,
            step_tolerance: 1e-10,
            initial_lambda: 1e-3,
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
}

/// Minimizes `sum r_i(x)^2`.
///
/// `residuals` fills its output slice; `scale[j]` is a typical magnitude of
/// `x[j]` used for the difference step; `lower` bounds are enforced by
/// projection after every step.
pub fn levenberg_marquardt<F>(
    mut residuals: F,
    x0: Vec<f64>,
    n_residuals: usize,
    scale: &[f64],
    lower: &[f64],
    opts: &LmOptions,
) -> LmOutcome
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x0.len();
    let project = |x: &mut [f64]| {
        for (v, lo) in x.iter_mut().zip(lower) {
            if *v < *lo {
                *v = *lo;
            }
        }
    };

    let mut x = x0;
    project(&mut x);
    let mut r = vec![0.0; n_residuals];
    residuals(&x, &mut r);
    let mut cost = sum_sq(&r);
    let mut lambda = opts.initial_lambda;
    let mut trial_r = vec![0.0; n_residuals];

    for iter in 1..=opts.max_iterations {
        let jac = jacobian(&mut residuals, &x, &r, scale);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);

        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for j in 0..n {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            project(&mut trial);
            residuals(&trial, &mut trial_r);
            let trial_cost = sum_sq(&trial_r);
            if trial_cost.is_finite() && trial_cost <= cost {
                let rel_decrease = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                let rel_step = trial
                    .iter()
                    .zip(&x)
                    .zip(scale)
                    .map(|((t, o), s)| ((t - o) / s.abs().max(o.abs()).max(1e-300)).abs())
                    .fold(0.0, f64::max);
                x = trial;
                std::mem::swap(&mut r, &mut trial_r);
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel_decrease < opts.cost_tolerance || rel_step < opts.step_tolerance {
                    return LmOutcome {
                        x,
                        cost,
                        iterations: iter,
                        converged: true,
                    };
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No descent direction left: the current point is a local minimum
            // to working precision.
            return LmOutcome {
                x,
                cost,
                iterations: iter,
                converged: grad.amax() <= 1e-6 * (1.0 + cost) || lambda > 1e12,
            };
        }
    }
    LmOutcome {
        x,
        cost,
        iterations: opts.max_iterations,
        converged: false,
    }
}

/// Forward-difference Jacobian. Steps are positive, so points on a lower bound stay feasible.
pub fn jacobian<F>(residuals: &mut F, x: &[f64], r0: &[f64], scale: &[f64]) -> DMatrix<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let m = r0.len();
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    let mut rp = vec![0.0; m];
    for j in 0..n {
        let h = 1e-7 * x[j].abs().max(scale[j].abs()).max(1e-12);
        xp[j] = x[j] + h;
        residuals(&xp, &mut rp);
        for i in 0..m {
            jac[(i, j)] = (rp[i] - r0[i]) / h;
        }
        xp[j] = x[j];
    }
    jac
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}
