//! Box-constrained quasi-Newton minimization for the few GP hyperparameters.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub rel_tol: f64,
    /// Largest coordinate change allowed in one step.
    pub max_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iters: 200,
            grad_tol: 1e-6,
            rel_tol: 1e-10,
            max_step: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Projected BFGS with Armijo backtracking.
///
/// `f` returns the value and gradient, or `None` where the objective is
/// undefined (the line search then backs off). Returns `None` only if `f`
/// fails at the clamped starting point.
pub fn minimize_bounded<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: OptimOptions,
) -> Option<OptimResult>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let clamp = |x: &DVector<f64>| -> DVector<f64> {
        DVector::from_iterator(n, (0..n).map(|i| x[i].clamp(lower[i], upper[i])))
    };
    let mut x = clamp(&DVector::from_column_slice(x0));
    let (mut fx, g0) = f(x.as_slice())?;
    let mut g = DVector::from_vec(g0);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;

    for iter in 0..opts.max_iters {
        iterations = iter + 1;
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)))
            .collect();
        let pg_norm = (0..n).filter(|&i| free[i]).map(|i| g[i] * g[i]).sum::<f64>().sqrt();
        if pg_norm < opts.grad_tol {
            break;
        }

        let mut d = DVector::<f64>::zeros(n);
        for i in (0..n).filter(|&i| free[i]) {
            d[i] = -(0..n).filter(|&j| free[j]).map(|j| h[(i, j)] * g[j]).sum::<f64>();
        }
        if d.dot(&g) >= 0.0 {
            h = DMatrix::identity(n, n);
            d = DVector::from_iterator(n, (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }));
        }
        let longest = d.amax();
        if longest > opts.max_step {
            d *= opts.max_step / longest;
        }

        let mut t = 1.0;
        let accepted = loop {
            let candidate = clamp(&(&x + &d * t));
            let step = &candidate - &x;
            if step.amax() == 0.0 {
                break None;
            }
            if let Some((fc, gc)) = f(candidate.as_slice()) {
                if fc.is_finite() && fc <= fx + 1e-4 * g.dot(&step) {
                    break Some((candidate, step, fc, DVector::from_vec(gc)));
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                break None;
            }
        };
        let Some((x_new, s, f_new, g_new)) = accepted else {
            break;
        };

        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - (&s * y.transpose()) * rho;
            let right = &eye - (&y * s.transpose()) * rho;
            h = &left * &h * &right + (&s * s.transpose()) * rho;
        }
        let improvement = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if improvement.abs() <= opts.rel_tol * (1.0 + fx.abs()) {
            break;
        }
    }
    Some(OptimResult {
        x: x.as_slice().to_vec(),
        value: fx,
        iterations,
    })
}
