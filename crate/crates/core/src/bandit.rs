//! Learner interface and the round loop shared by every bandit experiment.

use crate::env::{ArmSet, BanditEnv, SimRng};
use crate::error::Result;

/// A sequential decision maker over a fixed arm set.
pub trait BanditLearner {
    /// Index of the arm to play this round.
    fn select(&mut self, arms: &ArmSet) -> Result<usize>;
    /// Feedback for the arm just played.
    fn observe(&mut self, x: &[f64], reward: f64) -> Result<()>;
}

impl<T: BanditLearner + ?Sized> BanditLearner for Box<T> {
    fn select(&mut self, arms: &ArmSet) -> Result<usize> {
        (**self).select(arms)
    }

    fn observe(&mut self, x: &[f64], reward: f64) -> Result<()> {
        (**self).observe(x, reward)
    }
}

/// Smallest index attaining the maximum; NaN never wins.
pub fn argmax_lowest(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Per-round record of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BanditOutcome {
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Noiseless instantaneous dynamic regret.
    pub regret: Vec<f64>,
}

impl BanditOutcome {
    pub fn cumulative_regret(&self) -> f64 {
        self.regret.iter().sum()
    }
}

/// Plays rounds `start..start + len` of `env` with `learner`.
pub fn simulate_window<L: BanditLearner + ?Sized>(
    env: &BanditEnv,
    learner: &mut L,
    start: usize,
    len: usize,
    rng: &mut SimRng,
    out: &mut BanditOutcome,
) -> Result<()> {
    for t in start..start + len {
        let arm = learner.select(&env.arms)?;
        let reward = env.pull(t, arm, rng);
        out.actions.push(arm);
        out.rewards.push(reward);
        out.regret.push(env.regret(t, arm));
        learner.observe(&env.arms.arms()[arm], reward)?;
    }
    Ok(())
}

/// Plays the full horizon of `env`.
pub fn simulate_bandit<L: BanditLearner + ?Sized>(
    env: &BanditEnv,
    learner: &mut L,
    rng: &mut SimRng,
) -> Result<BanditOutcome> {
    let mut out = BanditOutcome::default();
    simulate_window(env, learner, 1, env.horizon(), rng, &mut out)?;
    Ok(out)
}
