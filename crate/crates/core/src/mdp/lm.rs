//! Discounted optimistic planning for linear-mixture MDPs.

use super::{EpisodicLearner, MdpFeatures, Plan, Trajectory, TransitionKind, UcrlConfig};
use crate::design::DiscountedDesign;
use crate::error::{Error, Result};
use crate::numerics::dot;

/// Transition confidence radius
/// `H√(½log(1/δ) + (d/4)log(1 + H²L_ψ²W/(λ_w d))) + √λ_w·S_w`
/// for weight sum `W`.
pub fn lm_radius_w(weight_sum: f64, lambda_w: f64, horizon: usize, l_psi: f64, dim: usize, delta: f64, s_w: f64) -> f64 {
    let (h, d) = (horizon as f64, dim as f64);
    let log = (1.0 + h * h * l_psi * l_psi * weight_sum / (lambda_w * d)).ln();
    h * (0.5 * (1.0 / delta).ln() + d / 4.0 * log).sqrt() + lambda_w.sqrt() * s_w
}

#[derive(Debug, Clone)]
pub struct WeightUcrl {
    features: MdpFeatures,
    config: UcrlConfig,
    /// `Λ_h` over reward features, one per stage.
    reward_designs: Vec<DiscountedDesign>,
    /// `Σ_h` over value-aggregated transition features, one per stage.
    transition_designs: Vec<DiscountedDesign>,
}

impl WeightUcrl {
    pub fn new(features: MdpFeatures, config: UcrlConfig) -> Result<Self> {
        config.validate()?;
        if features.kind != TransitionKind::LinearMixture {
            return Err(Error::Config("WeightUCRL needs linear-mixture transitions".into()));
        }
        let h = features.horizon;
        let d = features.dim;
        Ok(Self {
            reward_designs: (0..h).map(|_| DiscountedDesign::new(d, config.gamma, config.lambda_theta)).collect::<Result<_>>()?,
            transition_designs: (0..h).map(|_| DiscountedDesign::new(d, config.gamma, config.lambda_w)).collect::<Result<_>>()?,
            features,
            config,
        })
    }

    pub fn reward_design(&self, h: usize) -> &DiscountedDesign {
        &self.reward_designs[h - 1]
    }

    pub fn transition_design(&self, h: usize) -> &DiscountedDesign {
        &self.transition_designs[h - 1]
    }

    pub fn beta_w(&self, h: usize) -> f64 {
        let c = &self.config;
        let design = &self.transition_designs[h - 1];
        lm_radius_w(design.weight_sum(), c.lambda_w, self.features.horizon, c.l_psi, self.features.dim, c.delta, c.s_w)
    }
}

impl EpisodicLearner for WeightUcrl {
    fn plan(&mut self) -> Result<Plan> {
        let f = &self.features;
        let horizon = f.horizon as f64;
        let beta_theta = self.config.beta_theta();
        let mut plan = Plan::empty(f);
        for h in (1..=f.horizon).rev() {
            let lam = &self.reward_designs[h - 1];
            let sig = &self.transition_designs[h - 1];
            let theta_hat = lam.ridge_estimate()?;
            let w_hat = sig.ridge_estimate()?;
            let lam_chol = lam.matrix().cholesky()?;
            let sig_chol = sig.matrix().cholesky()?;
            let beta_w = self.beta_w(h);
            for s in 0..f.n_states {
                for a in 0..f.n_actions {
                    let sa = f.sa(s, a);
                    let phi = &f.phi[sa];
                    let psi_v = f.aggregate_psi(sa, &plan.v[h]);
                    let q = dot(phi, &theta_hat)
                        + beta_theta * lam_chol.inv_norm(phi)?
                        + dot(&psi_v, &w_hat)
                        + beta_w * sig_chol.inv_norm(&psi_v)?;
                    plan.q[h - 1][sa] = q.clamp(0.0, horizon);
                }
            }
            plan.finish_stage(h, f.n_actions);
        }
        Ok(plan)
    }

    fn absorb(&mut self, plan: &Plan, traj: &Trajectory) -> Result<()> {
        let f = &self.features;
        if f.horizon == 0 || traj.actions.len() != f.horizon {
            return Err(Error::DimensionMismatch { expected: f.horizon, got: traj.actions.len() });
        }
        for h in 1..=f.horizon {
            let (s, a, next) = (traj.states[h - 1], traj.actions[h - 1], traj.states[h]);
            let sa = f.sa(s, a);
            self.reward_designs[h - 1].update(&f.phi[sa], traj.rewards[h - 1])?;
            let v_next = &plan.v[h];
            let psi_v = f.aggregate_psi(sa, v_next);
            self.transition_designs[h - 1].update(&psi_v, v_next[next])?;
        }
        Ok(())
    }
}
