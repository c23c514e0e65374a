//! Weighted GLM score `g(θ) = λc_μθ + Σ w_s μ(x_sᵀθ)x_s`, its Jacobian
//! `H(θ)`, and the regularized maximum-likelihood solve.

use std::collections::HashMap;

use crate::error::Result;
use crate::link::LinkModel;
use crate::numerics::{axpy, dot, SpdMatrix};
use crate::solver::{damped_newton, NewtonOutcome, SecondOrder};

/// Stored observations; the weight of record `i` out of `n` is `γ^{n−1−i}`,
/// so the newest record always has weight one.
#[derive(Debug, Clone)]
pub struct WeightedHistory {
    dim: usize,
    gamma: f64,
    xs: Vec<f64>,
    rs: Vec<f64>,
}

impl WeightedHistory {
    pub fn new(dim: usize, gamma: f64) -> Self {
        Self { dim, gamma, xs: Vec::new(), rs: Vec::new() }
    }

    pub fn push(&mut self, x: &[f64], r: f64) {
        debug_assert_eq!(x.len(), self.dim);
        self.xs.extend_from_slice(x);
        self.rs.push(r);
    }

    pub fn clear(&mut self) {
        self.xs.clear();
        self.rs.clear();
    }

    pub fn len(&self) -> usize {
        self.rs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn reward(&self, i: usize) -> f64 {
        self.rs[i]
    }

    /// Current weights, oldest first.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.len();
        let mut w = vec![0.0; n];
        let mut acc = 1.0;
        for wi in w.iter_mut().rev() {
            *wi = acc;
            acc *= self.gamma;
        }
        w
    }
}

/// Observations sharing one arm vector: `Σw` and `Σw·r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmTerm {
    pub x: Vec<f64>,
    pub w: f64,
    pub wr: f64,
}

/// Merges the weighted history by arm; every quantity below is linear in
/// `(w, w·r)` per arm, so the merged sums give the same score.
fn merge_by_arm(history: &WeightedHistory) -> Vec<ArmTerm> {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut terms: Vec<ArmTerm> = Vec::new();
    for (i, w) in history.weights().into_iter().enumerate() {
        let x = history.x(i);
        let r = history.reward(i);
        let key = x.iter().map(|v| v.to_bits()).collect();
        let k = *index.entry(key).or_insert_with(|| {
            terms.push(ArmTerm { x: x.to_vec(), w: 0.0, wr: 0.0 });
            terms.len() - 1
        });
        terms[k].w += w;
        terms[k].wr += w * r;
    }
    terms
}

/// The score equation of one round: the history merged by arm, the link
/// and the ridge weight `λc_μ`.
pub struct ScoreModel<'a> {
    pub link: &'a LinkModel,
    pub lambda_c: f64,
    pub history: &'a WeightedHistory,
    pub terms: Vec<ArmTerm>,
}

impl<'a> ScoreModel<'a> {
    pub fn new(link: &'a LinkModel, lambda: f64, history: &'a WeightedHistory) -> Self {
        Self {
            link,
            lambda_c: lambda * link.c_mu,
            terms: merge_by_arm(history),
            history,
        }
    }

    pub fn dim(&self) -> usize {
        self.history.dim()
    }

    pub fn weight_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.w).sum()
    }

    /// `g(θ)`.
    pub fn score(&self, theta: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = theta.iter().map(|v| self.lambda_c * v).collect();
        for t in &self.terms {
            axpy(t.w * self.link.mu(dot(&t.x, theta)), &t.x, &mut g);
        }
        g
    }

    /// `Σ w_s r_s x_s`, the value of `g` at the unconstrained estimate.
    pub fn target(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.dim()];
        for t in &self.terms {
            axpy(t.wr, &t.x, &mut b);
        }
        b
    }

    /// `H(θ) = λc_μI + Σ w_s μ′(x_sᵀθ) x_s x_sᵀ`, the Jacobian of `g`.
    pub fn hessian(&self, theta: &[f64]) -> SpdMatrix {
        let mut h = SpdMatrix::scaled_identity(self.dim(), self.lambda_c);
        for t in &self.terms {
            h.add_outer(&t.x, t.w * self.link.mu_prime(dot(&t.x, theta)));
        }
        h
    }

    /// `g(θ) − Σ w_s r_s x_s`.
    pub fn residual(&self, theta: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = theta.iter().map(|v| self.lambda_c * v).collect();
        for t in &self.terms {
            axpy(t.w * self.link.mu(dot(&t.x, theta)) - t.wr, &t.x, &mut g);
        }
        g
    }

    /// Loss whose gradient is the residual: `λc_μ‖θ‖²/2 + Σ w (Φ(xᵀθ) − r xᵀθ)`
    /// with `Φ′ = μ`.
    fn second_order(&self, theta: &[f64]) -> SecondOrder {
        let mut loss = 0.5 * self.lambda_c * dot(theta, theta);
        let mut grad: Vec<f64> = theta.iter().map(|v| self.lambda_c * v).collect();
        let mut hessian = SpdMatrix::scaled_identity(self.dim(), self.lambda_c);
        for t in &self.terms {
            let z = dot(&t.x, theta);
            loss += t.w * self.link.mu_primitive(z) - t.wr * z;
            axpy(t.w * self.link.mu(z) - t.wr, &t.x, &mut grad);
            hessian.add_outer(&t.x, t.w * self.link.mu_prime(z));
        }
        SecondOrder { loss, grad, hessian }
    }

    /// Residual tolerance `1e-10 · (1 + Σw)`, never looser than `1e-9`.
    pub fn tolerance(&self) -> f64 {
        (1e-10 * (1.0 + self.weight_sum())).min(1e-9)
    }

    /// Root of the score equation, warm-started at `init`.
    pub fn solve(&self, init: &[f64]) -> Result<NewtonOutcome> {
        if self.history.is_empty() {
            return Ok(NewtonOutcome { x: vec![0.0; self.dim()], iterations: 0, residual: 0.0 });
        }
        damped_newton(init.to_vec(), self.tolerance(), 100, |t| self.second_order(t))
    }
}
