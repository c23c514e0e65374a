//! Small smooth optimizers: damped Newton for strongly convex losses and
//! projected gradient descent over a Euclidean ball.

use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, max_abs, norm2, project_ball, sub, SpdMatrix};

/// Loss, gradient and Hessian at one point.
pub(crate) struct SecondOrder {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub hessian: SpdMatrix,
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖∇f(x)‖∞` at the returned point.
    pub residual: f64,
}

/// Damped Newton iteration, halving the step until the loss stops
/// increasing. Stops once `‖∇f‖∞ ≤ tol`.
pub(crate) fn damped_newton<F>(x0: Vec<f64>, tol: f64, max_iter: usize, mut eval: F) -> Result<NewtonOutcome>
where
    F: FnMut(&[f64]) -> SecondOrder,
{
    let mut x = x0;
    let mut cur = eval(&x);
    for iterations in 0..=max_iter {
        let residual = max_abs(&cur.grad);
        if residual <= tol {
            return Ok(NewtonOutcome { x, iterations, residual });
        }
        if iterations == max_iter {
            break;
        }
        let step = cur.hessian.cholesky()?.solve(&cur.grad)?;
        let mut t = 1.0;
        loop {
            let mut trial = x.clone();
            axpy(-t, &step, &mut trial);
            let next = eval(&trial);
            // Near the root the loss stops resolving progress; a smaller
            // gradient within rounding of the old loss is accepted too.
            let flat = next.loss <= cur.loss + 1e-12 * (1.0 + cur.loss.abs())
                && max_abs(&next.grad) < max_abs(&cur.grad);
            if next.loss < cur.loss || flat || t < 1e-10 {
                x = trial;
                cur = next;
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::NoConvergence {
        solver: "newton",
        iterations: max_iter,
        residual: max_abs(&cur.grad),
    })
}

#[derive(Debug, Clone)]
pub(crate) struct PgdOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

/// Norm of the gradient with the component blocked by the ball boundary
/// removed.
pub(crate) fn ball_stationarity(x: &[f64], grad: &[f64], radius: f64) -> f64 {
    let n = norm2(x);
    if n < radius * (1.0 - 1e-12) || n == 0.0 {
        return norm2(grad);
    }
    let radial = dot(grad, x) / n;
    if radial >= 0.0 {
        return norm2(grad);
    }
    let mut g = grad.to_vec();
    axpy(-radial / n, x, &mut g);
    norm2(&g)
}

/// Projected gradient descent on `{‖x‖ ≤ radius}` with Barzilai-Borwein
/// trial steps and a backtracking sufficient-decrease test.
///
/// Convergence means the projected gradient fell below
/// `tol · (1 + ‖∇f(x0)‖)`. A run that hits `max_iter` returns its best point
/// with `converged = false`; the caller decides whether that is fatal.
pub(crate) fn projected_gradient<F>(
    x0: Vec<f64>,
    radius: f64,
    tol: f64,
    max_iter: usize,
    mut eval: F,
) -> Result<PgdOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = project_ball(&x0, radius);
    let (mut f, mut g) = eval(&x)?;
    let threshold = tol * (1.0 + norm2(&g));
    let mut alpha = 0.1 * radius.max(1e-3) / norm2(&g).max(1e-300);
    let mut residual = ball_stationarity(&x, &g, radius);
    let mut stalls = 0;
    for _ in 0..max_iter {
        if residual <= threshold {
            return Ok(PgdOutcome { x, value: f, converged: true });
        }
        let mut accepted = None;
        for _ in 0..80 {
            let mut trial = x.clone();
            axpy(-alpha, &g, &mut trial);
            let trial = project_ball(&trial, radius);
            let step = sub(&trial, &x);
            let (ft, gt) = eval(&trial)?;
            let model = f + dot(&g, &step) + dot(&step, &step) / (2.0 * alpha);
            if ft <= model || ft <= f && norm2(&step) <= 1e-15 * (1.0 + norm2(&x)) {
                accepted = Some((trial, ft, gt, step));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, ft, gt, step)) = accepted else {
            // No decrease at any step size: x is stationary up to rounding.
            return Ok(PgdOutcome { x, value: f, converged: true });
        };
        // Progress below the rounding level of f for several steps in a
        // row also means stationary up to rounding.
        if f - ft <= 4.0 * f64::EPSILON * f.abs() {
            stalls += 1;
            if stalls >= 3 {
                return Ok(PgdOutcome { x: trial, value: ft, converged: true });
            }
        } else {
            stalls = 0;
        }
        let dg = sub(&gt, &g);
        let sy = dot(&step, &dg);
        alpha = if sy > 0.0 { dot(&step, &step) / sy } else { alpha * 2.0 };
        x = trial;
        f = ft;
        g = gt;
        residual = ball_stationarity(&x, &g, radius);
    }
    Ok(PgdOutcome { converged: residual <= threshold, x, value: f })
}
