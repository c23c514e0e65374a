//! Synthetic drifting environments and the dynamic-regret oracle.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::link::sigmoid;
use crate::numerics::{dot, norm2, scaled, sub};

/// Deterministic generator used for every random draw in the crate.
///
/// ChaCha8 is a counter-based stream cipher; `seed_from_u64` fixes the key
/// and `set_stream` selects one of 2⁶⁴ independent streams, so results are
/// reproducible across platforms.
pub type SimRng = ChaCha8Rng;

/// Named sub-streams of a trial seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Reward noise and state transitions.
    Environment = 0,
    /// Learner-side randomness (meta-algorithm sampling).
    Learner = 1,
    /// Arm sets and instance construction, keyed by the experiment seed.
    Instance = 2,
}

pub fn stream_rng(seed: u64, stream: Stream) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Per-trial seed: `base_seed + trial_index`.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    base_seed.wrapping_add(trial as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathKind {
    Rotating,
    Piecewise { change_points: Vec<usize> },
    Constant,
}

/// Ground-truth parameter sequence `θ_1..θ_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPath {
    kind: PathKind,
    dim: usize,
    thetas: Vec<Vec<f64>>,
}

impl ParameterPath {
    /// `θ_t = S(cos 2π(t−1)/T, sin 2π(t−1)/T)`, one full revolution over `T` rounds.
    pub fn rotating(horizon: usize, s: f64) -> Self {
        let thetas = (1..=horizon).map(|t| rotating_theta(t, horizon, s)).collect();
        Self { kind: PathKind::Rotating, dim: 2, thetas }
    }

    pub fn constant(theta: Vec<f64>, horizon: usize) -> Self {
        Self {
            kind: PathKind::Constant,
            dim: theta.len(),
            thetas: vec![theta; horizon],
        }
    }

    /// `changes` abrupt switches at uniformly spaced rounds; each segment's
    /// value is drawn uniformly from the sphere of radius `s`.
    pub fn piecewise(horizon: usize, dim: usize, changes: usize, s: f64, rng: &mut SimRng) -> Self {
        let segments = changes + 1;
        let change_points: Vec<usize> = (1..segments)
            .map(|i| 1 + (i * horizon) / segments)
            .collect();
        let values: Vec<Vec<f64>> = (0..segments).map(|_| sphere_point(dim, s, rng)).collect();
        let mut thetas = Vec::with_capacity(horizon);
        let mut seg = 0;
        for t in 1..=horizon {
            while seg < change_points.len() && t >= change_points[seg] {
                seg += 1;
            }
            thetas.push(values[seg].clone());
        }
        Self {
            kind: PathKind::Piecewise { change_points },
            dim,
            thetas,
        }
    }

    pub fn kind(&self) -> &PathKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.thetas.len()
    }

    /// `θ_t` for `1 ≤ t ≤ T`.
    pub fn theta(&self, t: usize) -> &[f64] {
        &self.thetas[t - 1]
    }

    pub fn thetas(&self) -> &[Vec<f64>] {
        &self.thetas
    }

    /// Restriction to rounds `start..start + len` (1-based start).
    pub fn window(&self, start: usize, len: usize) -> Self {
        Self {
            kind: self.kind.clone(),
            dim: self.dim,
            thetas: self.thetas[start - 1..start - 1 + len].to_vec(),
        }
    }

    /// Number of rounds `t ≥ 2` with `θ_t ≠ θ_{t−1}`.
    pub fn change_count(&self) -> usize {
        self.thetas.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

fn sphere_point(dim: usize, radius: f64, rng: &mut SimRng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm2(&g);
        if n > 1e-12 {
            return scaled(&g, radius / n);
        }
    }
}

pub fn rotating_theta(t: usize, horizon: usize, s: f64) -> Vec<f64> {
    let angle = 2.0 * PI * (t as f64 - 1.0) / horizon as f64;
    vec![s * angle.cos(), s * angle.sin()]
}

/// `P_T = Σ_{t=2}^{T} ‖θ_{t−1} − θ_t‖₂`.
pub fn path_length(path: &ParameterPath) -> f64 {
    path.thetas
        .windows(2)
        .map(|w| norm2(&sub(&w[0], &w[1])))
        .sum()
}

/// Fixed, finite arm set with `‖x‖₂ ≤ L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSet {
    arms: Vec<Vec<f64>>,
    l: f64,
}

impl ArmSet {
    pub fn new(arms: Vec<Vec<f64>>, l: f64) -> Result<Self> {
        let dim = arms.first().ok_or(Error::EmptyArmSet)?.len();
        for arm in &arms {
            check_dim(dim, arm.len())?;
            if norm2(arm) > l + 1e-9 {
                return Err(Error::Config(format!(
                    "arm norm {} exceeds bound {l}",
                    norm2(arm)
                )));
            }
        }
        Ok(Self { arms, l })
    }

    pub fn arms(&self) -> &[Vec<f64>] {
        &self.arms
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.arms[0].len()
    }

    pub fn l(&self) -> f64 {
        self.l
    }
}

/// `n` standard-normal vectors rescaled to norm exactly `L`.
pub fn gen_arms(n: usize, dim: usize, l: f64, rng: &mut SimRng) -> Result<ArmSet> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidSizes(format!("n={n}, d={dim}")));
    }
    let arms = (0..n).map(|_| sphere_point(dim, l, rng)).collect();
    ArmSet::new(arms, l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardModel {
    /// `r = xᵀθ + R·ε`, `ε ~ N(0, 1)`.
    GaussianLinear { r: f64 },
    /// `r ~ Bernoulli(σ(xᵀθ))`.
    BernoulliLogistic,
}

impl RewardModel {
    /// Expected reward of an arm.
    pub fn mean(&self, x: &[f64], theta: &[f64]) -> f64 {
        let z = dot(x, theta);
        match self {
            RewardModel::GaussianLinear { .. } => z,
            RewardModel::BernoulliLogistic => sigmoid(z),
        }
    }
}

pub fn sample_reward(model: &RewardModel, x: &[f64], theta: &[f64], rng: &mut SimRng) -> f64 {
    match model {
        RewardModel::GaussianLinear { r } => {
            let noise: f64 = StandardNormal.sample(rng);
            dot(x, theta) + r * noise
        }
        RewardModel::BernoulliLogistic => {
            let p = sigmoid(dot(x, theta));
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// `max_x E[r|x,θ] − E[r|x_chosen,θ]` over the same arm set.
pub fn instant_regret(arms: &ArmSet, theta: &[f64], chosen: usize, model: &RewardModel) -> f64 {
    let best = arms
        .arms()
        .iter()
        .map(|x| model.mean(x, theta))
        .fold(f64::NEG_INFINITY, f64::max);
    (best - model.mean(&arms.arms()[chosen], theta)).max(0.0)
}

/// A complete bandit environment: fixed arms, hidden path, reward model.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    pub arms: ArmSet,
    pub path: ParameterPath,
    pub model: RewardModel,
}

impl BanditEnv {
    pub fn horizon(&self) -> usize {
        self.path.horizon()
    }

    pub fn pull(&self, t: usize, arm: usize, rng: &mut SimRng) -> f64 {
        sample_reward(&self.model, &self.arms.arms()[arm], self.path.theta(t), rng)
    }

    pub fn regret(&self, t: usize, arm: usize) -> f64 {
        instant_regret(&self.arms, self.path.theta(t), arm, &self.model)
    }
}
