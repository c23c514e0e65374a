//! Discounted optimistic planning for MNL-mixture MDPs: a weighted
//! multinomial MLE per stage, projected back into `‖w‖ ≤ S_w` when needed.

use std::collections::BTreeMap;

use super::{mnl_probs, EpisodicLearner, MdpFeatures, Plan, Trajectory, TransitionKind, UcrlConfig};
use crate::design::DiscountedDesign;
use crate::error::{Error, Result};
use crate::glm::projection::{PROJECTION_MAX_ITER, PROJECTION_TOL};
use crate::numerics::{axpy, dot, max_abs, norm2, scaled, sub, Cholesky, SpdMatrix};
use crate::solver::{damped_newton, projected_gradient, SecondOrder};

/// `√(½log(1/δ) + (d/4)log(1 + U·L_ψ²W/(λ_w d))) + √λ_w·κ·S_w`.
pub fn mnl_radius_w(weight_sum: f64, lambda_w: f64, reachable: usize, l_psi: f64, dim: usize, delta: f64, kappa: f64, s_w: f64) -> f64 {
    let d = dim as f64;
    let log = (1.0 + reachable as f64 * l_psi * l_psi * weight_sum / (lambda_w * d)).ln();
    (0.5 * (1.0 / delta).ln() + d / 4.0 * log).sqrt() + lambda_w.sqrt() * kappa * s_w
}

/// One observed transition: the `(s,a)` index and the position of the next
/// state inside `reachable[sa]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MnlRecord {
    pub sa: usize,
    pub outcome: usize,
}

/// Regularized weighted multinomial log-likelihood of one stage.
#[derive(Debug, Clone)]
pub struct MnlModel<'a> {
    features: &'a MdpFeatures,
    /// Records sharing `(sa, outcome)` merged into one term with their
    /// summed weight.
    groups: Vec<(MnlRecord, f64)>,
    weight_sum: f64,
    /// `λ_w·κ`.
    reg: f64,
}

impl<'a> MnlModel<'a> {
    /// Record `j` of `n` gets weight `γ^{n−1−j}`.
    pub fn new(features: &'a MdpFeatures, records: &'a [MnlRecord], gamma: f64, reg: f64) -> Self {
        let n = records.len();
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut weight_sum = 0.0;
        for (j, r) in records.iter().enumerate() {
            let a = gamma.powi((n - 1 - j) as i32);
            *merged.entry((r.sa, r.outcome)).or_insert(0.0) += a;
            weight_sum += a;
        }
        let groups = merged.into_iter().map(|((sa, outcome), a)| (MnlRecord { sa, outcome }, a)).collect();
        Self { features, groups, weight_sum, reg }
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    fn psi(&self, r: &MnlRecord) -> &'a [Vec<f64>] {
        &self.features.psi[r.sa]
    }

    /// `g(w) = λκw + Σ α Σ_{s′} p(ψᵀw)ψ`.
    pub fn g(&self, w: &[f64]) -> Vec<f64> {
        let mut out = scaled(w, self.reg);
        for (r, a) in self.groups.iter().map(|(r, a)| (r, *a)) {
            let psi = self.psi(r);
            for (p, x) in mnl_probs(psi, w).iter().zip(psi) {
                axpy(a * p, x, &mut out);
            }
        }
        out
    }

    /// `Σ α ψ(observed next state)`, the value of `g` at the MLE.
    pub fn target(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.features.dim];
        for (r, a) in self.groups.iter().map(|(r, a)| (r, *a)) {
            axpy(a, &self.psi(r)[r.outcome], &mut out);
        }
        out
    }

    /// Jacobian of `g`: `λκI + Σ α (Σ pψψᵀ − (Σ pψ)(Σ pψ)ᵀ)`.
    pub fn hessian(&self, w: &[f64]) -> SpdMatrix {
        let mut h = SpdMatrix::scaled_identity(self.features.dim, self.reg);
        for (r, a) in self.groups.iter().map(|(r, a)| (r, *a)) {
            let psi = self.psi(r);
            let p = mnl_probs(psi, w);
            let mut mean = vec![0.0; self.features.dim];
            for (pj, x) in p.iter().zip(psi) {
                h.add_outer(x, a * pj);
                axpy(*pj, x, &mut mean);
            }
            h.add_outer(&mean, -a);
        }
        h
    }

    /// Score residual `g(w) − target`, the gradient of the loss.
    pub fn residual(&self, w: &[f64]) -> Vec<f64> {
        sub(&self.g(w), &self.target())
    }

    fn second_order(&self, w: &[f64]) -> SecondOrder {
        let mut loss = 0.5 * self.reg * dot(w, w);
        for (r, a) in self.groups.iter().map(|(r, a)| (r, *a)) {
            let z: Vec<f64> = self.psi(r).iter().map(|x| dot(x, w)).collect();
            let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = top + z.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
            loss += a * (lse - z[r.outcome]);
        }
        SecondOrder { loss, grad: self.residual(w), hessian: self.hessian(w) }
    }

    pub fn tolerance(&self) -> f64 {
        (1e-10 * (1.0 + self.weight_sum())).min(1e-9)
    }

    /// Weighted MLE `ŵ`: the root of the score residual.
    pub fn solve(&self, init: &[f64]) -> Result<Vec<f64>> {
        if self.groups.is_empty() {
            return Ok(vec![0.0; self.features.dim]);
        }
        Ok(damped_newton(init.to_vec(), self.tolerance(), 100, |w| self.second_order(w))?.x)
    }

    /// `argmin_{‖w‖ ≤ S_w} ‖g(ŵ) − g(w)‖_{Σ̄⁻¹}`; `ŵ` itself when feasible.
    /// The flag reports whether the projection converged.
    pub fn project(&self, w_hat: &[f64], sigma: &Cholesky, s_w: f64) -> Result<(Vec<f64>, bool)> {
        if norm2(w_hat) <= s_w {
            return Ok((w_hat.to_vec(), true));
        }
        let target = self.g(w_hat);
        let start = scaled(w_hat, s_w / norm2(w_hat));
        let out = projected_gradient(start, s_w, PROJECTION_TOL, PROJECTION_MAX_ITER, |w| {
            let diff = sub(&target, &self.g(w));
            let u = sigma.solve(&diff)?;
            Ok((dot(&diff, &u), scaled(&self.hessian(w).mul_vec(&u), -2.0)))
        })?;
        Ok((out.x, out.converged))
    }
}

/// Optimistic backup of one stage given parameter estimates and bonuses.
pub(crate) fn backup_stage(
    f: &MdpFeatures,
    plan: &mut Plan,
    h: usize,
    theta: &[f64],
    w: &[f64],
    mut bonus: impl FnMut(usize) -> Result<f64>,
) -> Result<()> {
    let horizon = f.horizon as f64;
    for sa in 0..f.n_states * f.n_actions {
        let p = mnl_probs(&f.psi[sa], w);
        let ev: f64 = p.iter().zip(&f.reachable[sa]).map(|(pj, &n)| pj * plan.v[h][n]).sum();
        let q = dot(&f.phi[sa], theta) + ev + bonus(sa)?;
        plan.q[h - 1][sa] = q.clamp(0.0, horizon);
    }
    plan.finish_stage(h, f.n_actions);
    Ok(())
}

#[derive(Debug, Clone)]
pub struct MnlWeightUcrl {
    features: MdpFeatures,
    config: UcrlConfig,
    reward_designs: Vec<DiscountedDesign>,
    /// `Σ̄_h`: every reachable-state feature of each visited `(s,a)`.
    transition_designs: Vec<DiscountedDesign>,
    records: Vec<Vec<MnlRecord>>,
    w_hat: Vec<Vec<f64>>,
    w_tilde: Vec<Vec<f64>>,
    projection_failures: usize,
    max_residual: f64,
}

impl MnlWeightUcrl {
    pub fn new(features: MdpFeatures, config: UcrlConfig) -> Result<Self> {
        config.validate()?;
        if features.kind != TransitionKind::Mnl {
            return Err(Error::Config("MNL-WeightUCRL needs MNL transitions".into()));
        }
        let (h, d) = (features.horizon, features.dim);
        Ok(Self {
            reward_designs: (0..h).map(|_| DiscountedDesign::new(d, config.gamma, config.lambda_theta)).collect::<Result<_>>()?,
            transition_designs: (0..h).map(|_| DiscountedDesign::new(d, config.gamma, config.lambda_w)).collect::<Result<_>>()?,
            records: vec![Vec::new(); h],
            w_hat: vec![vec![0.0; d]; h],
            w_tilde: vec![vec![0.0; d]; h],
            projection_failures: 0,
            max_residual: 0.0,
            features,
            config,
        })
    }

    pub fn model(&self, h: usize) -> MnlModel<'_> {
        MnlModel::new(&self.features, &self.records[h - 1], self.config.gamma, self.config.lambda_w * self.config.kappa)
    }

    pub fn transition_design(&self, h: usize) -> &DiscountedDesign {
        &self.transition_designs[h - 1]
    }

    pub fn w_hat(&self, h: usize) -> &[f64] {
        &self.w_hat[h - 1]
    }

    pub fn w_tilde(&self, h: usize) -> &[f64] {
        &self.w_tilde[h - 1]
    }

    pub fn projection_failures(&self) -> usize {
        self.projection_failures
    }

    /// Largest `‖g(ŵ) − target‖∞` seen at any solve.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    pub fn beta_w(&self, h: usize) -> f64 {
        let c = &self.config;
        let f = &self.features;
        mnl_radius_w(
            self.transition_designs[h - 1].weight_sum(),
            c.lambda_w,
            f.max_reachable(),
            c.l_psi,
            f.dim,
            c.delta,
            c.kappa,
            c.s_w,
        )
    }
}

impl EpisodicLearner for MnlWeightUcrl {
    fn plan(&mut self) -> Result<Plan> {
        let horizon = self.features.horizon;
        let beta_theta = self.config.beta_theta();
        let mut plan = Plan::empty(&self.features);
        for h in (1..=horizon).rev() {
            let lam = &self.reward_designs[h - 1];
            let theta_hat = lam.ridge_estimate()?;
            let lam_chol = lam.matrix().cholesky()?;
            let sig_chol = self.transition_designs[h - 1].matrix().cholesky()?;
            let (w_hat, w_tilde, converged, residual) = {
                let model = self.model(h);
                let w_hat = model.solve(&self.w_hat[h - 1])?;
                let residual = max_abs(&model.residual(&w_hat));
                let (w_tilde, converged) = model.project(&w_hat, &sig_chol, self.config.s_w)?;
                (w_hat, w_tilde, converged, residual)
            };
            self.max_residual = self.max_residual.max(residual);
            self.projection_failures += usize::from(!converged);
            let scale = horizon as f64 / self.config.kappa * self.beta_w(h);
            let f = &self.features;
            backup_stage(f, &mut plan, h, &theta_hat, &w_tilde, |sa| {
                let mut widest: f64 = 0.0;
                for x in &f.psi[sa] {
                    widest = widest.max(sig_chol.inv_norm(x)?);
                }
                Ok(beta_theta * lam_chol.inv_norm(&f.phi[sa])? + scale * widest)
            })?;
            self.w_hat[h - 1] = w_hat;
            self.w_tilde[h - 1] = w_tilde;
        }
        Ok(plan)
    }

    fn absorb(&mut self, _plan: &Plan, traj: &Trajectory) -> Result<()> {
        let f = &self.features;
        if f.horizon == 0 || traj.actions.len() != f.horizon {
            return Err(Error::DimensionMismatch { expected: f.horizon, got: traj.actions.len() });
        }
        for h in 1..=f.horizon {
            let (s, a, next) = (traj.states[h - 1], traj.actions[h - 1], traj.states[h]);
            let sa = f.sa(s, a);
            let outcome = f.reachable[sa]
                .iter()
                .position(|&n| n == next)
                .ok_or_else(|| Error::Config(format!("state {next} is not reachable from (s={s}, a={a})")))?;
            self.reward_designs[h - 1].update(&f.phi[sa], traj.rewards[h - 1])?;
            self.transition_designs[h - 1].update_outer_products(&f.psi[sa])?;
            self.records[h - 1].push(MnlRecord { sa, outcome });
        }
        Ok(())
    }
}
