//! Generalized-linear bandits: GLB, self-concordant (SCB) and piecewise
//! SCB learners with discounted estimates.

pub mod piecewise;
pub mod projection;
pub mod score;

use crate::design::{scaled_radius, DiscountedDesign, RadiusParams};
use crate::env::ArmSet;
use crate::error::{Error, Result};
use crate::lb::{clamp_gamma, Forgetting};
use crate::link::LinkModel;
use crate::numerics::{dot, norm2, SpdMatrix};
use crate::{argmax_lowest, BanditLearner};

pub use piecewise::{confidence_horizon, scbpw_rho, PiecewiseChoice};
pub use projection::{project_glb, project_scb, Projection};
pub use score::{ScoreModel, WeightedHistory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GlmVariant {
    /// Projection in the `V⁻¹` norm, bonus scale `2k_μ/c_μ`.
    Glb,
    /// Projection in the local `H(θ)⁻¹` norm, bonus scale `2√(1+2S)k_μ/√c_μ`.
    Scb,
    /// Parameter-based optimism over a confidence set, for piecewise
    /// stationary parameters; `horizon` fixes the durability `D`.
    ScbPw { horizon: usize },
}

/// `√λ c_μ S + R√(2log(1/δ) + d log(1 + L²W/(λd)))`.
pub fn glb_radius(link: &LinkModel, p: &RadiusParams, lambda: f64, weight_sum: f64) -> f64 {
    scaled_radius(p, lambda, weight_sum, link.c_mu)
}

/// Confidence radius of the self-concordant estimator.
pub fn scb_radius(link: &LinkModel, lambda: f64, weight_sum: f64, delta: f64, dim: usize) -> f64 {
    let lc = (lambda * link.c_mu).sqrt();
    let (m, d) = (link.m, dim as f64);
    lc / (2.0 * m)
        + 2.0 * m / lc * ((1.0 / delta).ln() + d * 2.0_f64.ln())
        + d * m / lc * (1.0 + link.l * link.l * link.k_mu * weight_sum / (lc * lc * d)).ln()
        + lc * link.s
}

/// `γ = 1 − max{1/T, √(k_μc_μP_T/(dT))}`.
pub fn optimal_gamma_glb(dim: usize, horizon: usize, path_length: f64, link: &LinkModel) -> f64 {
    let t = horizon as f64;
    let rate = (link.k_mu * link.c_mu * path_length.max(0.0) / (dim as f64 * t)).sqrt();
    clamp_gamma(1.0 - rate.max(1.0 / t), horizon)
}

/// `γ = 1 − max{1/T, √(k_μP_T/(dT))}`.
pub fn optimal_gamma_scb(dim: usize, horizon: usize, path_length: f64, link: &LinkModel) -> f64 {
    let t = horizon as f64;
    let rate = (link.k_mu * path_length.max(0.0) / (dim as f64 * t)).sqrt();
    clamp_gamma(1.0 - rate.max(1.0 / t), horizon)
}

/// `γ = 1 − max{1/T, (Γ_T/(dT))^{2/3}}`.
pub fn optimal_gamma_scbpw(dim: usize, horizon: usize, changes: usize) -> f64 {
    let t = horizon as f64;
    let rate = (changes as f64 / (dim as f64 * t)).powf(2.0 / 3.0);
    clamp_gamma(1.0 - rate.max(1.0 / t), horizon)
}

/// Default regularizers: `d/c_μ²` for GLB, `d·log T/c_μ` for SCB variants.
pub fn default_lambda(variant: GlmVariant, dim: usize, horizon: usize, link: &LinkModel) -> f64 {
    let d = dim as f64;
    match variant {
        GlmVariant::Glb => d / (link.c_mu * link.c_mu),
        GlmVariant::Scb | GlmVariant::ScbPw { .. } => d * (horizon.max(2) as f64).ln() / link.c_mu,
    }
}

#[derive(Debug, Clone)]
pub struct GlmLearner {
    variant: GlmVariant,
    forgetting: Forgetting,
    link: LinkModel,
    params: RadiusParams,
    lambda: f64,
    design: DiscountedDesign,
    history: WeightedHistory,
    theta_hat: Vec<f64>,
    theta_tilde: Vec<f64>,
    beta: f64,
    last_residual: f64,
    projection_failures: usize,
}

impl GlmLearner {
    pub fn new(
        variant: GlmVariant,
        forgetting: Forgetting,
        lambda: f64,
        link: LinkModel,
        params: RadiusParams,
    ) -> Result<Self> {
        if let Forgetting::Restart { period: 0 } = forgetting {
            return Err(Error::Config("restart period must be positive".into()));
        }
        if link.s != params.s || link.l != params.l {
            return Err(Error::Config(format!(
                "link bounds (S={}, L={}) disagree with radius bounds (S={}, L={})",
                link.s, link.l, params.s, params.l
            )));
        }
        if let GlmVariant::ScbPw { .. } = variant {
            if forgetting.gamma() >= 1.0 || matches!(forgetting, Forgetting::Restart { .. }) {
                return Err(Error::Config("scb_pw needs a discount factor below one".into()));
            }
            if params.dim != 2 {
                return Err(Error::Config("scb_pw supports d = 2 only".into()));
            }
        }
        let dim = params.dim;
        let mut learner = Self {
            design: DiscountedDesign::new(dim, forgetting.gamma(), lambda)?,
            history: WeightedHistory::new(dim, forgetting.gamma()),
            theta_hat: vec![0.0; dim],
            theta_tilde: vec![0.0; dim],
            beta: 0.0,
            last_residual: 0.0,
            projection_failures: 0,
            variant,
            forgetting,
            link,
            params,
            lambda,
        };
        learner.refresh_radius();
        Ok(learner)
    }

    fn refresh_radius(&mut self) {
        let w = self.design.weight_sum();
        self.beta = match self.variant {
            GlmVariant::Glb => glb_radius(&self.link, &self.params, self.lambda, w),
            GlmVariant::Scb => scb_radius(&self.link, self.lambda, w, self.params.delta, self.params.dim),
            GlmVariant::ScbPw { horizon } => scbpw_rho(
                &self.link,
                self.lambda,
                self.forgetting.gamma(),
                confidence_horizon(self.forgetting.gamma(), horizon),
                self.params.delta,
                self.params.dim,
            ),
        };
    }

    pub fn variant(&self) -> GlmVariant {
        self.variant
    }

    pub fn link(&self) -> &LinkModel {
        &self.link
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn design(&self) -> &DiscountedDesign {
        &self.design
    }

    pub fn history(&self) -> &WeightedHistory {
        &self.history
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    /// Projected estimate (or, for the piecewise variant, the last witness).
    pub fn theta_tilde(&self) -> &[f64] {
        &self.theta_tilde
    }

    /// Current radius: `β̄`, `β̃` or `ρ` depending on the variant.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `‖∇‖∞` of the score equation at the last estimate.
    pub fn last_residual(&self) -> f64 {
        self.last_residual
    }

    /// Projections that exhausted their iteration budget; the best feasible
    /// iterate was kept in each case.
    pub fn projection_failures(&self) -> usize {
        self.projection_failures
    }

    pub fn score_model(&self) -> ScoreModel<'_> {
        ScoreModel::new(&self.link, self.lambda, &self.history)
    }

    /// `g(θ)` on the stored history.
    pub fn score(&self, theta: &[f64]) -> Vec<f64> {
        self.score_model().score(theta)
    }

    /// `H(θ)` on the stored history.
    pub fn hessian(&self, theta: &[f64]) -> SpdMatrix {
        self.score_model().hessian(theta)
    }

    /// Multiplier of `‖x‖_{V⁻¹}` in the optimistic index.
    pub fn bonus_scale(&self) -> f64 {
        let (k, c) = (self.link.k_mu, self.link.c_mu);
        match self.variant {
            GlmVariant::Glb => 2.0 * k / c * self.beta,
            GlmVariant::Scb | GlmVariant::ScbPw { .. } => {
                2.0 * (1.0 + 2.0 * self.link.s).sqrt() * k / c.sqrt() * self.beta
            }
        }
    }

    /// `μ(xᵀθ̃) + scale·‖x‖_{V⁻¹}` for every arm.
    pub fn ucb_indices(&self, arms: &[Vec<f64>]) -> Result<Vec<f64>> {
        let chol = self.design.matrix().cholesky()?;
        let scale = self.bonus_scale();
        arms.iter()
            .map(|x| Ok(self.link.mu(dot(x, &self.theta_tilde)) + scale * chol.inv_norm(x)?))
            .collect()
    }

    /// Arm choice; ties go to the lowest index.
    pub fn select(&mut self, arms: &[Vec<f64>]) -> Result<usize> {
        if arms.is_empty() {
            return Err(Error::EmptyArmSet);
        }
        match self.variant {
            GlmVariant::Glb | GlmVariant::Scb => {
                let idx = self.ucb_indices(arms)?;
                argmax_lowest(idx.into_iter()).ok_or(Error::EmptyArmSet)
            }
            GlmVariant::ScbPw { .. } => {
                let choice = self.select_piecewise(arms)?;
                self.theta_tilde = choice.witness;
                Ok(choice.arm)
            }
        }
    }

    /// Joint maximization of `μ(xᵀθ)` over arms and the confidence set.
    pub fn select_piecewise(&self, arms: &[Vec<f64>]) -> Result<PiecewiseChoice> {
        piecewise::select(&self.score_model(), &self.theta_hat, self.beta, self.link.s, arms)
    }

    /// Absorbs one observation, re-solves the score equation and projects.
    pub fn step(&mut self, chosen: &[f64], reward: f64) -> Result<()> {
        self.design.update(chosen, reward)?;
        self.history.push(chosen, reward);
        if let Forgetting::Restart { period } = self.forgetting {
            if self.design.rounds() >= period {
                self.design.reset();
                self.history.clear();
            }
        }
        let model = ScoreModel::new(&self.link, self.lambda, &self.history);
        let solved = model.solve(&self.theta_hat)?;
        self.last_residual = solved.residual;
        let theta_hat = solved.x;
        let projection = match self.variant {
            GlmVariant::Glb => {
                let chol = self.design.matrix().cholesky()?;
                Some(project_glb(&model, &theta_hat, &chol, self.link.s)?)
            }
            GlmVariant::Scb => Some(project_scb(&model, &theta_hat, self.link.s)?),
            GlmVariant::ScbPw { .. } => None,
        };
        if let Some(p) = projection {
            if !p.converged {
                self.projection_failures += 1;
            }
            self.theta_tilde = p.theta;
        }
        self.theta_hat = theta_hat;
        self.refresh_radius();
        Ok(())
    }

    /// `‖θ̃‖ ≤ S` up to rounding.
    pub fn is_feasible(&self) -> bool {
        norm2(&self.theta_tilde) <= self.link.s + 1e-9
    }
}

impl BanditLearner for GlmLearner {
    fn select(&mut self, arms: &ArmSet) -> Result<usize> {
        GlmLearner::select(self, arms.arms())
    }

    fn observe(&mut self, x: &[f64], reward: f64) -> Result<()> {
        self.step(x, reward)
    }
}

/// Ground-truth checks that need the hidden parameter path.
#[cfg(any(test, feature = "oracles"))]
pub mod oracles {
    use super::*;
    use crate::numerics::sub;

    /// Right-hand side of the self-concordant estimation-error bound at the
    /// current round for arm `x`.
    ///
    /// `path` holds `θ_1, …, θ_{n+1}` where `n` is the number of absorbed
    /// rounds; the bound compares `θ̃` with `θ_{n+1}`.
    pub fn scb_error_bound(path: &[Vec<f64>], learner: &GlmLearner, x: &[f64]) -> Result<f64> {
        let n = learner.history().len();
        if path.len() != n + 1 {
            return Err(Error::DimensionMismatch { expected: n + 1, got: path.len() });
        }
        let link = learner.link();
        let (k, c, l) = (link.k_mu, link.c_mu, link.l);
        let d = learner.design().dim() as f64;
        let weights = learner.history().weights();
        let mut prefix = 0.0;
        let mut bias = 0.0;
        for p in 0..n {
            prefix += weights[p];
            let c_p = k * l * l * (d / learner.lambda()).sqrt() * prefix.sqrt();
            bias += c_p / c.sqrt() * norm2(&sub(&path[p], &path[p + 1]));
        }
        let radius = scb_radius(link, learner.lambda(), learner.design().weight_sum(), learner.params.delta, learner.params.dim);
        let width = learner.design().matrix().cholesky()?.inv_norm(x)?;
        Ok((4.0 + 8.0 * link.s).sqrt() * k / c.sqrt() * (bias + radius * width))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{gen_arms, stream_rng, BanditEnv, ParameterPath, RewardModel, Stream};
    use crate::lb::{Forgetting, LbLearner};
    use crate::link::LinkKind;
    use crate::simulate_bandit;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn params(s: f64, dim: usize) -> RadiusParams {
        RadiusParams::new(s, 1.0, 1.0, 0.05, dim).unwrap()
    }

    fn logistic(s: f64) -> LinkModel {
        LinkModel::new(LinkKind::Logistic, s, 1.0).unwrap()
    }

    #[test]
    fn glb_radius_reduces_to_lb_radius() {
        let id = LinkModel::new(LinkKind::Identity, 1.0, 1.0).unwrap();
        let p = params(1.0, 3);
        for w in [0.0, 1.0, 50.0] {
            assert_relative_eq!(glb_radius(&id, &p, 2.0, w), crate::design::lb_radius(&p, 2.0, w));
        }
        let lg = logistic(1.0);
        let expected = 2.0_f64.sqrt() * lg.c_mu + (2.0 * 20.0_f64.ln()).sqrt();
        assert_relative_eq!(glb_radius(&lg, &p, 2.0, 0.0), expected, epsilon = 1e-12);
        assert!(glb_radius(&lg, &p, 2.0, 5.0) < glb_radius(&lg, &p, 2.0, 6.0));
    }

    #[test]
    fn scb_radius_hand_values() {
        // m = 1, λc_μ = 4, d = 1, δ = 1, W = 0, S = 1: 1 + log 2 + 2
        let id = LinkModel::new(LinkKind::Identity, 1.0, 1.0).unwrap();
        assert_relative_eq!(scb_radius(&id, 4.0, 0.0, 1.0, 1), 3.0 + 2.0_f64.ln(), epsilon = 1e-12);
        let lg = logistic(2.0);
        let lc = (3.0 * lg.c_mu).sqrt();
        let expected = lc / 2.0 + 2.0 / lc * 2.0 * 2.0_f64.ln() + lc * 2.0;
        assert_relative_eq!(scb_radius(&lg, 3.0, 0.0, 1.0, 2), expected, epsilon = 1e-12);
        assert!(scb_radius(&lg, 3.0, 10.0, 0.1, 2) > scb_radius(&lg, 3.0, 9.0, 0.1, 2));
    }

    #[test]
    fn optimal_gamma_examples() {
        let lg = logistic(1.0);
        for g in [
            optimal_gamma_glb(2, 500, 0.0, &lg),
            optimal_gamma_scb(2, 500, 0.0, &lg),
            optimal_gamma_scbpw(2, 500, 0),
        ] {
            assert_relative_eq!(g, 1.0 - 1.0 / 500.0);
        }
        let p = 2.0 * std::f64::consts::PI;
        let expected = 1.0 - (0.25 * lg.c_mu * p / 12000.0).sqrt();
        assert_relative_eq!(optimal_gamma_glb(2, 6000, p, &lg), expected, epsilon = 1e-12);
        assert!((optimal_gamma_glb(2, 6000, p, &lg) - 0.99488).abs() < 1e-4);
        assert_relative_eq!(optimal_gamma_scb(2, 6000, p, &lg), 1.0 - (0.25 * p / 12000.0).sqrt());
        assert_relative_eq!(optimal_gamma_scbpw(2, 100, 200), 0.01);
    }

    #[test]
    fn default_lambdas() {
        let lg = logistic(1.0);
        assert_relative_eq!(default_lambda(GlmVariant::Glb, 2, 100, &lg), 2.0 / (lg.c_mu * lg.c_mu));
        assert_relative_eq!(default_lambda(GlmVariant::Scb, 2, 100, &lg), 2.0 * 100f64.ln() / lg.c_mu);
    }

    #[test]
    fn identity_glb_matches_lb_with_half_radius_scale() {
        // With k_μ = c_μ = 1 the GLB index is the LB index with a doubled bonus.
        let id = LinkModel::new(LinkKind::Identity, 10.0, 1.0).unwrap();
        let env = BanditEnv {
            arms: gen_arms(15, 2, 1.0, &mut stream_rng(8, Stream::Instance)).unwrap(),
            path: ParameterPath::rotating(200, 1.0),
            model: RewardModel::GaussianLinear { r: 1.0 },
        };
        let mut glb = GlmLearner::new(GlmVariant::Glb, Forgetting::Weighted { gamma: 0.95 }, 1.0, id, params(10.0, 2)).unwrap();
        let mut lb = LbLearner::new(Forgetting::Weighted { gamma: 0.95 }, 1.0, params(10.0, 2)).unwrap();
        let mut rng = stream_rng(9, Stream::Environment);
        for t in 1..=200 {
            let gi = glb.ucb_indices(env.arms.arms()).unwrap();
            let li = lb.ucb_indices(env.arms.arms()).unwrap();
            let chol = lb.design().matrix().cholesky().unwrap();
            for (i, x) in env.arms.arms().iter().enumerate() {
                let expected = li[i] + lb.beta() * chol.inv_norm(x).unwrap();
                assert_relative_eq!(gi[i], expected, epsilon = 1e-8, max_relative = 1e-8);
            }
            let a = GlmLearner::select(&mut glb, env.arms.arms()).unwrap();
            let r = env.pull(t, a, &mut rng);
            glb.step(&env.arms.arms()[a], r).unwrap();
            lb.step(&env.arms.arms()[a], r).unwrap();
            for (x, y) in glb.theta_hat().iter().zip(lb.theta_hat()) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn cold_start_and_singleton() {
        let mut l = GlmLearner::new(GlmVariant::Glb, Forgetting::Static, 1.0, logistic(1.0), params(1.0, 2)).unwrap();
        let unit = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.6, 0.8]];
        assert_eq!(GlmLearner::select(&mut l, &unit).unwrap(), 0);
        assert_eq!(GlmLearner::select(&mut l, &[vec![0.3, 0.1]]).unwrap(), 0);
        assert_eq!(GlmLearner::select(&mut l, &[]), Err(Error::EmptyArmSet));
        let mut s = GlmLearner::new(GlmVariant::Scb, Forgetting::Static, 1.0, logistic(1.0), params(1.0, 2)).unwrap();
        assert_eq!(GlmLearner::select(&mut s, &unit).unwrap(), 0);
    }

    #[test]
    fn mismatched_bounds_are_rejected() {
        let err = GlmLearner::new(GlmVariant::Glb, Forgetting::Static, 1.0, logistic(2.0), params(1.0, 2));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn piecewise_variant_rejects_unit_discount() {
        let err = GlmLearner::new(
            GlmVariant::ScbPw { horizon: 100 },
            Forgetting::Static,
            1.0,
            logistic(1.0),
            params(1.0, 2),
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn logistic_runs_stay_feasible_and_solved() {
        let lg = logistic(2.0);
        let env = BanditEnv {
            arms: gen_arms(20, 2, 1.0, &mut stream_rng(4, Stream::Instance)).unwrap(),
            path: ParameterPath::rotating(300, 2.0),
            model: RewardModel::BernoulliLogistic,
        };
        for variant in [GlmVariant::Glb, GlmVariant::Scb] {
            let mut l = GlmLearner::new(variant, Forgetting::Weighted { gamma: 0.97 }, 0.5, lg, params(2.0, 2)).unwrap();
            let mut rng = stream_rng(5, Stream::Environment);
            for t in 1..=300 {
                let a = GlmLearner::select(&mut l, env.arms.arms()).unwrap();
                let r = env.pull(t, a, &mut rng);
                l.step(&env.arms.arms()[a], r).unwrap();
                assert!(l.is_feasible());
                assert!(l.last_residual() <= 1e-9);
                assert_eq!(l.history().len(), l.design().rounds());
            }
            assert_eq!(l.projection_failures(), 0);
        }
    }

    #[test]
    fn restart_clears_history() {
        let mut l = GlmLearner::new(GlmVariant::Scb, Forgetting::Restart { period: 4 }, 1.0, logistic(1.0), params(1.0, 2)).unwrap();
        let mut rng = stream_rng(1, Stream::Learner);
        for i in 1..=9 {
            let x = [rng.random_range(-0.7..0.7), 0.5];
            l.step(&x, 1.0).unwrap();
            assert_eq!(l.history().len(), i % 4);
        }
    }

    #[test]
    fn scb_bound_oracle_requires_matching_path() {
        let l = GlmLearner::new(GlmVariant::Scb, Forgetting::Static, 1.0, logistic(1.0), params(1.0, 2)).unwrap();
        assert!(oracles::scb_error_bound(&[vec![1.0, 0.0], vec![1.0, 0.0]], &l, &[1.0, 0.0]).is_err());
        let b = oracles::scb_error_bound(&[vec![1.0, 0.0]], &l, &[1.0, 0.0]).unwrap();
        assert!(b > 0.0);
    }

    #[test]
    fn stationary_logistic_learners_learn() {
        let lg = logistic(2.0);
        let env = BanditEnv {
            arms: gen_arms(10, 2, 1.0, &mut stream_rng(21, Stream::Instance)).unwrap(),
            path: ParameterPath::constant(vec![2.0, 0.0], 600),
            model: RewardModel::BernoulliLogistic,
        };
        for variant in [GlmVariant::Glb, GlmVariant::Scb] {
            let mut l = GlmLearner::new(variant, Forgetting::Static, 1.0, lg, params(2.0, 2)).unwrap();
            let out = simulate_bandit(&env, &mut l, &mut stream_rng(3, Stream::Environment)).unwrap();
            let first: f64 = out.regret[..150].iter().sum();
            let last: f64 = out.regret[450..].iter().sum();
            assert!(last < first, "{variant:?}: {first} -> {last}");
        }
    }
}
