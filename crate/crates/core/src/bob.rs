//! Bandits-over-bandits: an Exp3-IX meta learner picks the discount factor
//! of a fresh base learner for every episode of `Δ` rounds.

use rand::Rng;

use crate::bandit::{simulate_window, BanditLearner, BanditOutcome};
use crate::env::{BanditEnv, SimRng};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BobConfig {
    pub horizon: usize,
    pub dim: usize,
    /// Episode length `Δ = ⌈d√T⌉`.
    pub episode_len: usize,
    /// `γ_i = 1 − d^{−1/2}·2^{1−i}`, floored at `1/T`.
    pub candidates: Vec<f64>,
}

impl BobConfig {
    pub fn new(dim: usize, horizon: usize) -> Result<Self> {
        if dim == 0 || horizon < dim {
            return Err(Error::Config(format!("need T ≥ d ≥ 1 (T={horizon}, d={dim})")));
        }
        let (d, t) = (dim as f64, horizon as f64);
        let n = (t / d.sqrt()).log2().ceil().max(0.0) as usize + 1;
        let candidates = (1..=n)
            .map(|i| (1.0 - 2.0_f64.powi(1 - i as i32) / d.sqrt()).max(1.0 / t))
            .collect();
        Ok(Self {
            horizon,
            dim,
            episode_len: ((d * t.sqrt()).ceil() as usize).max(1),
            candidates,
        })
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn n_episodes(&self) -> usize {
        self.horizon.div_ceil(self.episode_len)
    }

    /// `(start, len)` of every episode, 1-based rounds.
    pub fn episodes(&self) -> Vec<(usize, usize)> {
        (0..self.n_episodes())
            .map(|e| {
                let start = e * self.episode_len + 1;
                (start, self.episode_len.min(self.horizon + 1 - start))
            })
            .collect()
    }

    /// Bound on the absolute cumulative reward of one episode,
    /// `L·S·Δ + 2R√(Δ·ln(T/√Δ))`.
    pub fn reward_scale(&self, s: f64, l: f64, r: f64) -> f64 {
        let delta = self.episode_len as f64;
        let log = (self.horizon as f64 / delta.sqrt()).ln().max(0.0);
        l * s * delta + 2.0 * r * (delta * log).sqrt()
    }
}

/// Exp3 with implicit exploration over a fixed set of experts.
#[derive(Debug, Clone, PartialEq)]
pub struct Exp3Ix {
    log_weights: Vec<f64>,
    eta: f64,
    gamma_ix: f64,
}

impl Exp3Ix {
    pub fn new(n: usize, eta: f64, gamma_ix: f64) -> Result<Self> {
        if n == 0 || !(eta > 0.0) || !(gamma_ix > 0.0) {
            return Err(Error::Config(format!("invalid Exp3-IX setup (n={n}, eta={eta}, gamma={gamma_ix})")));
        }
        Ok(Self { log_weights: vec![0.0; n], eta, gamma_ix })
    }

    /// `η = √(2 log N / (N·E))` for `E` episodes, `γ_ix = η/2`.
    pub fn tuned(n: usize, episodes: usize) -> Result<Self> {
        let nf = n as f64;
        let eta = if n > 1 {
            (2.0 * nf.ln() / (nf * episodes.max(1) as f64)).sqrt()
        } else {
            1.0
        };
        Self::new(n, eta, eta / 2.0)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma_ix(&self) -> f64 {
        self.gamma_ix
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let top = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_weights.iter().map(|v| (v - top).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }

    pub fn sample(&self, rng: &mut SimRng) -> usize {
        let p = self.probabilities();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                return i;
            }
        }
        p.len() - 1
    }

    /// Importance-weighted loss update for the played expert; `loss ∈ [0, 1]`.
    pub fn update(&mut self, index: usize, loss: f64) {
        let p = self.probabilities()[index];
        self.log_weights[index] -= self.eta * loss / (p + self.gamma_ix);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BobOutcome {
    pub rounds: BanditOutcome,
    /// Candidate index played in each episode.
    pub choices: Vec<usize>,
    /// Episodes whose normalized reward fell outside `[0, 1]` and was clipped.
    pub clipped: usize,
}

/// Maps an episode reward in `[−scale, scale]` to `[0, 1]`; reports whether
/// clipping was needed.
pub fn normalize_episode_reward(reward: f64, scale: f64) -> (f64, bool) {
    let v = (reward + scale) / (2.0 * scale);
    let c = v.clamp(0.0, 1.0);
    (c, c != v)
}

/// Runs the meta learner. `make` builds a fresh base learner for a given `γ`;
/// `scale` bounds the absolute episode reward.
pub fn bob_run<L, F>(
    env: &BanditEnv,
    config: &BobConfig,
    scale: f64,
    mut make: F,
    env_rng: &mut SimRng,
    meta_rng: &mut SimRng,
) -> Result<BobOutcome>
where
    L: BanditLearner,
    F: FnMut(f64) -> Result<L>,
{
    let mut meta = Exp3Ix::tuned(config.n_candidates(), config.n_episodes())?;
    let mut out = BobOutcome::default();
    for (start, len) in config.episodes() {
        let pick = meta.sample(meta_rng);
        let mut learner = make(config.candidates[pick])?;
        let before = out.rounds.rewards.len();
        simulate_window(env, &mut learner, start, len, env_rng, &mut out.rounds)?;
        let reward: f64 = out.rounds.rewards[before..].iter().sum();
        let (normalized, clipped) = normalize_episode_reward(reward, scale);
        out.clipped += usize::from(clipped);
        meta.update(pick, 1.0 - normalized);
        out.choices.push(pick);
    }
    Ok(out)
}

/// Same episode schedule with one fixed `γ`: the comparator for the meta
/// learner.
pub fn fixed_episodes<L, F>(
    env: &BanditEnv,
    config: &BobConfig,
    gamma: f64,
    mut make: F,
    env_rng: &mut SimRng,
) -> Result<BanditOutcome>
where
    L: BanditLearner,
    F: FnMut(f64) -> Result<L>,
{
    let mut out = BanditOutcome::default();
    for (start, len) in config.episodes() {
        let mut learner = make(gamma)?;
        simulate_window(env, &mut learner, start, len, env_rng, &mut out)?;
    }
    Ok(out)
}
