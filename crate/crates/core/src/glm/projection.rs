//! Maps the unconstrained estimate back into `Θ = {‖θ‖ ≤ S}` by minimizing
//! the score-space distance `‖g(θ̂) − g(θ)‖` in a design-dependent norm.

use super::score::ScoreModel;
use crate::error::Result;
use crate::numerics::{axpy, dot, norm2, scaled, sub, Cholesky};
use crate::solver::projected_gradient;

pub const PROJECTION_TOL: f64 = 1e-7;
pub const PROJECTION_MAX_ITER: usize = 500;
/// Outer iterations of the frozen-norm scheme for the local-norm projection.
pub const FROZEN_NORM_ROUNDS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub theta: Vec<f64>,
    /// Objective value at `theta`.
    pub objective: f64,
    /// False when the iteration budget ran out before stationarity.
    pub converged: bool,
}

impl Projection {
    fn feasible(theta: &[f64]) -> Self {
        Self { theta: theta.to_vec(), objective: 0.0, converged: true }
    }
}

fn boundary_start(theta_hat: &[f64], s: f64) -> Vec<f64> {
    scaled(theta_hat, s / norm2(theta_hat))
}

/// `‖g(θ̂) − g(θ)‖²_{V⁻¹}` and its gradient `−2H(θ)V⁻¹v`.
pub fn glb_objective(model: &ScoreModel<'_>, target: &[f64], v: &Cholesky, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let diff = sub(target, &model.score(theta));
    let u = v.solve(&diff)?;
    let grad = scaled(&model.hessian(theta).mul_vec(&u), -2.0);
    Ok((dot(&diff, &u), grad))
}

/// `‖g(θ̂) − g(θ)‖²_{H(θ)⁻¹}` and its exact gradient.
///
/// With `v = g(θ̂) − g(θ)` and `u = H(θ)⁻¹v` the gradient is
/// `−2v − Σ w μ″(xᵀθ)(xᵀu)² x`.
pub fn scb_objective(model: &ScoreModel<'_>, target: &[f64], theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let diff = sub(target, &model.score(theta));
    let u = model.hessian(theta).cholesky()?.solve(&diff)?;
    let mut grad = scaled(&diff, -2.0);
    for t in &model.terms {
        let xu = dot(&t.x, &u);
        axpy(-t.w * model.link.mu_second(dot(&t.x, theta)) * xu * xu, &t.x, &mut grad);
    }
    Ok((dot(&diff, &u), grad))
}

/// Projection in the fixed `V⁻¹` norm; `θ̂` is returned untouched when
/// already feasible.
pub fn project_glb(model: &ScoreModel<'_>, theta_hat: &[f64], v: &Cholesky, s: f64) -> Result<Projection> {
    if norm2(theta_hat) <= s {
        return Ok(Projection::feasible(theta_hat));
    }
    let target = model.score(theta_hat);
    let out = projected_gradient(
        boundary_start(theta_hat, s),
        s,
        PROJECTION_TOL,
        PROJECTION_MAX_ITER,
        |t| glb_objective(model, &target, v, t),
    )?;
    Ok(Projection { theta: out.x, objective: out.value, converged: out.converged })
}

/// Projection in the local norm `H(θ)⁻¹`.
///
/// A few rounds with the norm frozen at the current iterate give a good
/// starting point; a final pass on the exact objective polishes it.
pub fn project_scb(model: &ScoreModel<'_>, theta_hat: &[f64], s: f64) -> Result<Projection> {
    if norm2(theta_hat) <= s {
        return Ok(Projection::feasible(theta_hat));
    }
    let target = model.score(theta_hat);
    let mut theta = boundary_start(theta_hat, s);
    for _ in 0..FROZEN_NORM_ROUNDS {
        let frozen = model.hessian(&theta).cholesky()?;
        let out = projected_gradient(theta, s, PROJECTION_TOL, PROJECTION_MAX_ITER, |t| {
            glb_objective(model, &target, &frozen, t)
        })?;
        theta = out.x;
    }
    let out = projected_gradient(theta, s, PROJECTION_TOL, PROJECTION_MAX_ITER, |t| {
        scb_objective(model, &target, t)
    })?;
    Ok(Projection { theta: out.x, objective: out.value, converged: out.converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{stream_rng, Stream};
    use crate::glm::score::WeightedHistory;
    use crate::link::{LinkKind, LinkModel};
    use crate::numerics::{project_ball, SpdMatrix};
    use rand::Rng;
    use std::f64::consts::TAU;

    /// Biased Bernoulli data pushing `θ̂` far outside a small ball.
    fn skewed_history(seed: u64, n: usize) -> WeightedHistory {
        let mut rng = stream_rng(seed, Stream::Instance);
        let mut h = WeightedHistory::new(2, 0.98);
        for _ in 0..n {
            let x = [rng.random_range(0.2..1.0), rng.random_range(-0.5..0.5)];
            let x: Vec<f64> = scaled(&x, 1.0 / norm2(&x).max(1.0));
            let p = crate::link::sigmoid(4.0 * x[0] - 2.0 * x[1]);
            h.push(&x, f64::from(rng.random_bool(p)));
        }
        h
    }

    /// Minimizer of `f` over the disk of radius `s`: a polar grid, then
    /// repeated local Cartesian grids around the incumbent.
    fn grid_min(s: f64, f: impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
        let mut best = (vec![0.0, 0.0], f(&[0.0, 0.0]));
        for i in 1..=100 {
            let r = s * i as f64 / 100.0;
            for j in 0..400 {
                let phi = TAU * j as f64 / 400.0;
                let p = [r * phi.cos(), r * phi.sin()];
                let v = f(&p);
                if v < best.1 {
                    best = (p.to_vec(), v);
                }
            }
        }
        let mut h = TAU * s / 400.0;
        for _ in 0..12 {
            let c = best.0.clone();
            for a in -10..=10 {
                for b in -10..=10 {
                    let p = project_ball(&[c[0] + h * a as f64 / 5.0, c[1] + h * b as f64 / 5.0], s);
                    let v = f(&p);
                    if v < best.1 {
                        best = (p, v);
                    }
                }
            }
            h /= 4.0;
        }
        best
    }

    #[test]
    fn feasible_estimate_is_kept() {
        let link = LinkModel::new(LinkKind::Logistic, 1.0, 1.0).unwrap();
        let h = skewed_history(1, 10);
        let m = ScoreModel::new(&link, 1.0, &h);
        let v = SpdMatrix::identity(2).cholesky().unwrap();
        let p = project_glb(&m, &[0.3, 0.1], &v, 1.0).unwrap();
        assert_eq!(p.theta, vec![0.3, 0.1]);
        assert_eq!(project_scb(&m, &[0.3, 0.1], 1.0).unwrap().theta, vec![0.3, 0.1]);
        assert_eq!(project_glb(&m, &[30.0, 10.0], &v, 1e9).unwrap().theta, vec![30.0, 10.0]);
    }

    #[test]
    fn identity_link_projection_is_the_v_norm_projection() {
        let link = LinkModel::new(LinkKind::Identity, 1.0, 1.0).unwrap();
        let mut h = WeightedHistory::new(2, 0.9);
        let mut rng = stream_rng(2, Stream::Instance);
        let mut v = SpdMatrix::scaled_identity(2, 0.5);
        for _ in 0..30 {
            let x = [rng.random_range(0.5..1.0), rng.random_range(-0.2..0.2)];
            v.scale(0.9);
            v.add_diagonal(0.1 * 0.5);
            v.add_outer(&x, 1.0);
            h.push(&x, 3.0);
        }
        let m = ScoreModel::new(&link, 0.5, &h);
        let theta_hat = m.solve(&[0.0, 0.0]).unwrap().x;
        assert!(norm2(&theta_hat) > 1.0);
        let chol = v.cholesky().unwrap();
        let p = project_glb(&m, &theta_hat, &chol, 1.0).unwrap();
        let (grid, _) = grid_min(1.0, |t| {
            let d = sub(&theta_hat, t);
            dot(&d, &v.mul_vec(&d))
        });
        assert!(norm2(&sub(&p.theta, &grid)) < 1e-4, "{:?} vs {:?}", p.theta, grid);
        // With μ′ ≡ 1 the local norm is the same.
        let q = project_scb(&m, &theta_hat, 1.0).unwrap();
        assert!(norm2(&sub(&p.theta, &q.theta)) < 1e-5);
    }

    #[test]
    fn logistic_local_norm_projection_matches_grid_search() {
        let link = LinkModel::new(LinkKind::Logistic, 1.0, 1.0).unwrap();
        for seed in 0..4 {
            let h = skewed_history(10 + seed, 200);
            let m = ScoreModel::new(&link, 1.0, &h);
            let theta_hat = m.solve(&[0.0, 0.0]).unwrap().x;
            assert!(norm2(&theta_hat) > 1.0);
            let target = m.score(&theta_hat);
            let p = project_scb(&m, &theta_hat, 1.0).unwrap();
            assert!(norm2(&p.theta) <= 1.0 + 1e-9);
            let (grid, best) = grid_min(1.0, |t| scb_objective(&m, &target, t).unwrap().0);
            assert!(p.objective <= best + 1e-9 * (1.0 + best));
            assert!(norm2(&sub(&p.theta, &grid)) < 1e-3, "{:?} vs {:?}", p.theta, grid);
        }
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        let link = LinkModel::new(LinkKind::Logistic, 1.0, 1.0).unwrap();
        let h = skewed_history(3, 50);
        let m = ScoreModel::new(&link, 1.0, &h);
        let target = m.score(&[2.0, -1.0]);
        let theta = [0.4, 0.3];
        let (_, g) = scb_objective(&m, &target, &theta).unwrap();
        let eps = 1e-6;
        for j in 0..2 {
            let mut p = theta;
            let mut q = theta;
            p[j] += eps;
            q[j] -= eps;
            let fd = (scb_objective(&m, &target, &p).unwrap().0 - scb_objective(&m, &target, &q).unwrap().0)
                / (2.0 * eps);
            assert!((fd - g[j]).abs() < 1e-5 * (1.0 + g[j].abs()), "{fd} vs {}", g[j]);
        }
    }
}
