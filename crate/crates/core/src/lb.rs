//! Linear bandits: the discounted UCB learner and its static/restart baselines.

use crate::design::{lb_radius, DiscountedDesign, RadiusParams};
use crate::env::ArmSet;
use crate::error::{Error, Result};
use crate::numerics::dot;
use crate::{argmax_lowest, BanditLearner};

/// How past observations are forgotten.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forgetting {
    /// Discounted design with factor `γ`.
    Weighted { gamma: f64 },
    /// Undiscounted design (OFUL), i.e. `γ = 1`.
    Static,
    /// Undiscounted design wiped every `period` rounds.
    Restart { period: usize },
}

impl Forgetting {
    pub fn gamma(&self) -> f64 {
        match *self {
            Forgetting::Weighted { gamma } => gamma,
            Forgetting::Static | Forgetting::Restart { .. } => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbLearner {
    design: DiscountedDesign,
    params: RadiusParams,
    theta_hat: Vec<f64>,
    beta: f64,
    variant: Forgetting,
}

impl LbLearner {
    pub fn new(variant: Forgetting, lambda: f64, params: RadiusParams) -> Result<Self> {
        if let Forgetting::Restart { period: 0 } = variant {
            return Err(Error::Config("restart period must be positive".into()));
        }
        let design = DiscountedDesign::new(params.dim, variant.gamma(), lambda)?;
        let mut learner = Self {
            theta_hat: vec![0.0; params.dim],
            beta: 0.0,
            design,
            params,
            variant,
        };
        learner.refresh()?;
        Ok(learner)
    }

    fn refresh(&mut self) -> Result<()> {
        self.theta_hat = self.design.ridge_estimate()?;
        self.beta = lb_radius(&self.params, self.design.lambda(), self.design.weight_sum());
        Ok(())
    }

    pub fn design(&self) -> &DiscountedDesign {
        &self.design
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn variant(&self) -> Forgetting {
        self.variant
    }

    /// `⟨x, θ̂⟩ + β‖x‖_{V⁻¹}` for every arm.
    pub fn ucb_indices(&self, arms: &[Vec<f64>]) -> Result<Vec<f64>> {
        let chol = self.design.matrix().cholesky()?;
        arms.iter()
            .map(|x| Ok(dot(x, &self.theta_hat) + self.beta * chol.inv_norm(x)?))
            .collect()
    }

    /// Optimistic arm choice; ties go to the lowest index.
    pub fn select(&self, arms: &[Vec<f64>]) -> Result<usize> {
        if arms.is_empty() {
            return Err(Error::EmptyArmSet);
        }
        let idx = self.ucb_indices(arms)?;
        argmax_lowest(idx.into_iter()).ok_or(Error::EmptyArmSet)
    }

    /// Absorbs the reward of the chosen arm and refreshes `θ̂` and `β`.
    pub fn step(&mut self, chosen: &[f64], reward: f64) -> Result<()> {
        self.design.update(chosen, reward)?;
        if let Forgetting::Restart { period } = self.variant {
            if self.design.rounds() >= period {
                self.design.reset();
            }
        }
        self.refresh()
    }
}

impl BanditLearner for LbLearner {
    fn select(&mut self, arms: &ArmSet) -> Result<usize> {
        LbLearner::select(self, arms.arms())
    }

    fn observe(&mut self, x: &[f64], reward: f64) -> Result<()> {
        self.step(x, reward)
    }
}

/// Keeps `γ` inside `[1/T, 1 − 1/T]` so `log(1/γ)` stays finite.
pub fn clamp_gamma(gamma: f64, horizon: usize) -> f64 {
    let t = horizon.max(2) as f64;
    gamma.clamp(1.0 / t, 1.0 - 1.0 / t)
}

/// `γ = 1 − max{1/T, √(P_T/(dT))}`.
pub fn optimal_gamma_lb(dim: usize, horizon: usize, path_length: f64) -> f64 {
    let t = horizon as f64;
    let rate = (path_length.max(0.0) / (dim as f64 * t)).sqrt();
    clamp_gamma(1.0 - rate.max(1.0 / t), horizon)
}

/// Restart period `⌈d^{1/4}√(T/(1+P_T))⌉`.
pub fn restart_period(dim: usize, horizon: usize, path_length: f64) -> usize {
    let h = (dim as f64).powf(0.25) * (horizon as f64 / (1.0 + path_length.max(0.0))).sqrt();
    (h.ceil() as usize).max(1)
}
