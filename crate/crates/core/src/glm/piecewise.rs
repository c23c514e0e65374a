//! Parameter-based optimism for piecewise-stationary self-concordant
//! bandits: maximize `μ(xᵀθ)` jointly over arms and the confidence set
//! `C = {θ ∈ Θ : ‖g(θ) − g(θ̂)‖_{H(θ)⁻¹} ≤ ρ}`.

use std::f64::consts::TAU;

use super::score::ScoreModel;
use crate::error::{Error, Result};
use crate::link::LinkModel;
use crate::numerics::{dot, norm2, scaled, sub};

/// Radial and angular resolution of the search grid over `Θ` (d = 2).
pub const GRID_RADII: usize = 64;
pub const GRID_ANGLES: usize = 256;

/// `D = log T / log(1/γ)`.
pub fn confidence_horizon(gamma: f64, horizon: usize) -> f64 {
    (horizon.max(2) as f64).ln() / (1.0 / gamma).ln()
}

/// Radius `ρ` of the piecewise confidence set for `γ < 1`.
pub fn scbpw_rho(link: &LinkModel, lambda: f64, gamma: f64, durability: f64, delta: f64, dim: usize) -> f64 {
    let lc = (lambda * link.c_mu).sqrt();
    let (l, m, k, s, d) = (link.l, link.m, link.k_mu, link.s, dim as f64);
    let tail = gamma.powf(durability) / (1.0 - gamma);
    let window = (1.0 - gamma.powf(2.0 * durability)) / (1.0 - gamma);
    let breve = d * m / lc * (1.0 + l * l * k * window / (lc * lc * d)).ln()
        + lc / (2.0 * m)
        + 2.0 * m / lc * (1.0 / delta).ln()
        + 2.0 * m / lc * d * 2.0_f64.ln()
        + lc * s;
    2.0 * l * l * s * k / lc * tail + l * m / lc * tail + breve
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseChoice {
    pub arm: usize,
    /// Maximizer of `xᵀθ` over the discretized confidence set for `arm`.
    pub witness: Vec<f64>,
}

/// Candidate parameters: a polar grid of the disk of radius `s`, the points
/// `s·x/‖x‖` for every arm, and `θ̂` when it is feasible.
pub fn candidates(theta_hat: &[f64], s: f64, arms: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(1 + GRID_RADII * GRID_ANGLES + arms.len() + 1);
    out.push(vec![0.0, 0.0]);
    for i in 1..=GRID_RADII {
        let r = s * i as f64 / GRID_RADII as f64;
        for j in 0..GRID_ANGLES {
            let phi = TAU * j as f64 / GRID_ANGLES as f64;
            out.push(vec![r * phi.cos(), r * phi.sin()]);
        }
    }
    for x in arms {
        let n = norm2(x);
        if n > 0.0 {
            out.push(scaled(x, s / n));
        }
    }
    if norm2(theta_hat) <= s {
        out.push(theta_hat.to_vec());
    }
    out
}

/// `‖g(θ) − g(θ̂)‖_{H(θ)⁻¹}`.
pub fn membership_distance(model: &ScoreModel<'_>, target: &[f64], theta: &[f64]) -> Result<f64> {
    let diff = sub(&model.score(theta), target);
    model.hessian(theta).cholesky()?.inv_norm(&diff)
}

/// Joint arm/parameter choice over the discretized confidence set.
///
/// Membership is evaluated lazily: for each arm the candidates are scanned
/// in decreasing `xᵀθ` and the first member is that arm's maximizer.
/// `μ` is increasing, so comparing `xᵀθ` across arms is enough.
pub fn select(
    model: &ScoreModel<'_>,
    theta_hat: &[f64],
    rho: f64,
    s: f64,
    arms: &[Vec<f64>],
) -> Result<PiecewiseChoice> {
    if arms.is_empty() {
        return Err(Error::EmptyArmSet);
    }
    let target = model.score(theta_hat);
    let cands = candidates(theta_hat, s, arms);
    let mut member: Vec<Option<bool>> = vec![None; cands.len()];
    let mut best: Option<(usize, usize, f64)> = None;
    for (a, x) in arms.iter().enumerate() {
        let mut order: Vec<(usize, f64)> = cands.iter().map(|c| dot(x, c)).enumerate().collect();
        order.sort_by(|p, q| q.1.total_cmp(&p.1).then(p.0.cmp(&q.0)));
        for (ci, value) in order {
            if let Some((_, _, b)) = best {
                if value <= b {
                    break;
                }
            }
            let inside = match member[ci] {
                Some(v) => v,
                None => {
                    let v = membership_distance(model, &target, &cands[ci])? <= rho;
                    member[ci] = Some(v);
                    v
                }
            };
            if inside {
                best = Some((a, ci, value));
                break;
            }
        }
    }
    match best {
        Some((arm, ci, _)) => Ok(PiecewiseChoice { arm, witness: cands[ci].clone() }),
        None => Err(Error::EmptyConfidenceSet),
    }
}
