//! Episodic MDPs whose reward and transition parameters drift between
//! episodes, and the discounted optimistic planners that learn them.
//!
//! Rewards are linear, `r_h^k(s,a) = φ(s,a)ᵀθ_h^k`. Transitions are either a
//! linear mixture `P(s′|s,a) = ψ(s′|s,a)ᵀw_h^k` or a multinomial logit over
//! the reachable states of `(s,a)`.

pub mod dp;
pub mod instance;
pub mod lm;
pub mod mnl;

use rand::Rng;

use crate::env::SimRng;
use crate::error::{check_dim, Error, Result};
use crate::lb::clamp_gamma;
use crate::numerics::{dot, norm2, sub};

pub use dp::{dp_oracle, policy_eval};
pub use instance::{build_desk_instance, DeskSizes};
pub use lm::WeightUcrl;
pub use mnl::MnlWeightUcrl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    LinearMixture,
    Mnl,
}

/// The part of an MDP a learner may see: sizes and feature maps.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpFeatures {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub dim: usize,
    pub kind: TransitionKind,
    /// `φ(s,a)`, indexed by `s·A + a`.
    pub phi: Vec<Vec<f64>>,
    /// States reachable from `(s,a)`; every state for linear mixtures.
    pub reachable: Vec<Vec<usize>>,
    /// `ψ(s′|s,a)` for `s′ = reachable[sa][j]`, indexed `[sa][j]`.
    pub psi: Vec<Vec<Vec<f64>>>,
}

impl MdpFeatures {
    pub fn sa(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    /// Largest reachable set.
    pub fn max_reachable(&self) -> usize {
        self.reachable.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn l_phi(&self) -> f64 {
        self.phi.iter().map(|p| norm2(p)).fold(0.0, f64::max)
    }

    pub fn l_psi(&self) -> f64 {
        self.psi.iter().flatten().map(|p| norm2(p)).fold(0.0, f64::max)
    }

    /// `Σ_{s′} ψ(s′|s,a)V(s′)`.
    pub fn aggregate_psi(&self, sa: usize, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, &next) in self.reachable[sa].iter().enumerate() {
            for (o, p) in out.iter_mut().zip(&self.psi[sa][j]) {
                *o += p * v[next];
            }
        }
        out
    }

    /// Transition distribution over `reachable[sa]` under parameter `w`.
    pub fn transition(&self, sa: usize, w: &[f64]) -> Vec<f64> {
        match self.kind {
            TransitionKind::LinearMixture => self.psi[sa].iter().map(|p| dot(p, w)).collect(),
            TransitionKind::Mnl => mnl_probs(&self.psi[sa], w),
        }
    }

    fn validate(&self) -> Result<()> {
        let n_sa = self.n_states * self.n_actions;
        if self.phi.len() != n_sa || self.reachable.len() != n_sa || self.psi.len() != n_sa {
            return Err(Error::InvalidSizes("feature tables do not cover every (s, a)".into()));
        }
        for sa in 0..n_sa {
            check_dim(self.dim, self.phi[sa].len())?;
            if self.reachable[sa].is_empty() || self.reachable[sa].len() != self.psi[sa].len() {
                return Err(Error::InvalidSizes(format!("bad reachable set at (s,a) index {sa}")));
            }
            if self.reachable[sa].iter().any(|&s| s >= self.n_states) {
                return Err(Error::InvalidSizes(format!("reachable state out of range at index {sa}")));
            }
            for p in &self.psi[sa] {
                check_dim(self.dim, p.len())?;
            }
        }
        Ok(())
    }
}

/// Softmax of `ψ_jᵀw` over the given features.
pub fn mnl_probs(psi: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let logits: Vec<f64> = psi.iter().map(|p| dot(p, w)).collect();
    let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - top).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// A drifting episodic MDP with known features and hidden parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureMdp {
    pub features: MdpFeatures,
    pub episodes: usize,
    /// `θ_h^k` at `[k−1][h−1]`.
    pub theta: Vec<Vec<Vec<f64>>>,
    /// `w_h^k` at `[k−1][h−1]`.
    pub w: Vec<Vec<Vec<f64>>>,
    pub s_theta: f64,
    pub s_w: f64,
    /// Lower bound on pairwise reachable-state probability products over
    /// the ball `‖w‖ ≤ S_w` (MNL only; 1 for linear mixtures).
    pub kappa: f64,
    /// Every episode starts here.
    pub initial_state: usize,
}

impl MixtureMdp {
    pub fn new(
        features: MdpFeatures,
        theta: Vec<Vec<Vec<f64>>>,
        w: Vec<Vec<Vec<f64>>>,
        s_theta: f64,
        s_w: f64,
        kappa: f64,
    ) -> Result<Self> {
        features.validate()?;
        let episodes = theta.len();
        let h = features.horizon;
        if episodes == 0 || h == 0 || w.len() != episodes {
            return Err(Error::InvalidSizes("need at least one episode and one stage".into()));
        }
        for k in 0..episodes {
            if theta[k].len() != h || w[k].len() != h {
                return Err(Error::InvalidSizes(format!("episode {} lacks per-stage parameters", k + 1)));
            }
            for stage in 0..h {
                check_dim(features.dim, theta[k][stage].len())?;
                check_dim(features.dim, w[k][stage].len())?;
            }
        }
        Ok(Self { features, episodes, theta, w, s_theta, s_w, kappa, initial_state: 0 })
    }

    pub fn horizon(&self) -> usize {
        self.features.horizon
    }

    /// Total number of steps `T = KH`.
    pub fn total_steps(&self) -> usize {
        self.episodes * self.features.horizon
    }

    /// `φ(s,a)ᵀθ_h^k`, 1-based `k` and `h`.
    pub fn reward(&self, k: usize, h: usize, s: usize, a: usize) -> f64 {
        dot(&self.features.phi[self.features.sa(s, a)], &self.theta[k - 1][h - 1])
    }

    /// True transition distribution over `reachable[sa]`.
    pub fn transition(&self, k: usize, h: usize, s: usize, a: usize) -> Vec<f64> {
        self.features.transition(self.features.sa(s, a), &self.w[k - 1][h - 1])
    }

    pub fn sample_next(&self, k: usize, h: usize, s: usize, a: usize, rng: &mut SimRng) -> usize {
        let sa = self.features.sa(s, a);
        let p = self.transition(k, h, s, a);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, pj) in p.iter().enumerate() {
            acc += pj;
            if u < acc {
                return self.features.reachable[sa][j];
            }
        }
        *self.features.reachable[sa].last().expect("reachable sets are nonempty")
    }

    /// `Δ = Σ_{k≥2} Σ_h (‖θ_h^{k−1} − θ_h^k‖ + ‖w_h^{k−1} − w_h^k‖)`.
    pub fn path_length(&self) -> f64 {
        let mut total = 0.0;
        for k in 1..self.episodes {
            for h in 0..self.horizon() {
                total += norm2(&sub(&self.theta[k - 1][h], &self.theta[k][h]));
                total += norm2(&sub(&self.w[k - 1][h], &self.w[k][h]));
            }
        }
        total
    }
}

/// `γ = 1 − max{1/K, √(Δ/T)}`, kept inside `[1/K, 1 − 1/K]`.
pub fn optimal_gamma_mdp(episodes: usize, horizon: usize, path_length: f64) -> f64 {
    let k = episodes.max(2) as f64;
    let rate = (path_length.max(0.0) / (k * horizon as f64)).sqrt();
    clamp_gamma(1.0 - rate.max(1.0 / k), episodes)
}

/// Optimistic value tables for one episode; stage `h` lives at index `h−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    /// `Q_h(s,a)` indexed `[h−1][s·A + a]`.
    pub q: Vec<Vec<f64>>,
    /// `V_h(s)` indexed `[h−1][s]`, with the terminal `V_{H+1} ≡ 0` last.
    pub v: Vec<Vec<f64>>,
    /// Greedy action, lowest index on ties, indexed `[h−1][s]`.
    pub policy: Vec<Vec<usize>>,
}

impl Plan {
    /// Fills `V` and the policy from `Q`, stage `h` (1-based).
    pub(crate) fn finish_stage(&mut self, h: usize, n_actions: usize) {
        let q = &self.q[h - 1];
        for (s, (v, pi)) in self.v[h - 1].iter_mut().zip(self.policy[h - 1].iter_mut()).enumerate() {
            let row = &q[s * n_actions..(s + 1) * n_actions];
            let a = crate::argmax_lowest(row.iter().copied()).expect("at least one action");
            *pi = a;
            *v = row[a];
        }
    }

    pub(crate) fn empty(f: &MdpFeatures) -> Self {
        let (h, s, a) = (f.horizon, f.n_states, f.n_actions);
        Self {
            q: vec![vec![0.0; s * a]; h],
            v: vec![vec![0.0; s]; h + 1],
            policy: vec![vec![0; s]; h],
        }
    }

    /// Smallest and largest `Q` entry.
    pub fn q_range(&self) -> (f64, f64) {
        self.q.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &q| (lo.min(q), hi.max(q)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `s_1 … s_{H+1}`.
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

pub trait EpisodicLearner {
    /// Plans episode `k` from the data of episodes `1..k−1`.
    fn plan(&mut self) -> Result<Plan>;
    /// Absorbs the trajectory of the episode just played under `plan`.
    fn absorb(&mut self, plan: &Plan, trajectory: &Trajectory) -> Result<()>;
}

/// Plays one episode of `mdp` under the plan's greedy policy.
pub fn rollout(mdp: &MixtureMdp, k: usize, plan: &Plan, rng: &mut SimRng) -> Trajectory {
    let mut s = mdp.initial_state;
    let mut out = Trajectory { states: vec![s], actions: Vec::new(), rewards: Vec::new() };
    for h in 1..=mdp.horizon() {
        let a = plan.policy[h - 1][s];
        out.actions.push(a);
        out.rewards.push(mdp.reward(k, h, s, a));
        s = mdp.sample_next(k, h, s, a, rng);
        out.states.push(s);
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MdpOutcome {
    /// `V*_1(s_1) − V^π_1(s_1)` per episode.
    pub regret: Vec<f64>,
    pub q_min: f64,
    pub q_max: f64,
}

impl MdpOutcome {
    pub fn cumulative_regret(&self) -> f64 {
        self.regret.iter().sum()
    }
}

/// Runs every episode of `mdp`: plan, evaluate the plan exactly against
/// the optimum, roll out, absorb.
pub fn run_episodes<L: EpisodicLearner + ?Sized>(mdp: &MixtureMdp, learner: &mut L, rng: &mut SimRng) -> Result<MdpOutcome> {
    let mut out = MdpOutcome { regret: Vec::with_capacity(mdp.episodes), q_min: f64::INFINITY, q_max: f64::NEG_INFINITY };
    for k in 1..=mdp.episodes {
        let plan = learner.plan()?;
        let (lo, hi) = plan.q_range();
        out.q_min = out.q_min.min(lo);
        out.q_max = out.q_max.max(hi);
        let (best, _) = dp_oracle(mdp, k);
        out.regret.push(best - policy_eval(mdp, k, &plan.policy));
        let traj = rollout(mdp, k, &plan, rng);
        learner.absorb(&plan, &traj)?;
    }
    Ok(out)
}

/// Settings shared by both planners.
#[derive(Debug, Clone, PartialEq)]
pub struct UcrlConfig {
    pub gamma: f64,
    pub lambda_theta: f64,
    pub lambda_w: f64,
    pub delta: f64,
    pub s_theta: f64,
    pub s_w: f64,
    pub l_psi: f64,
    /// Curvature lower bound; only the MNL planner uses it.
    pub kappa: f64,
}

impl UcrlConfig {
    /// `λ_θ = d`; `λ_w = H²d` for linear mixtures and `d` for MNL; `δ = 1/(4T)`.
    pub fn for_instance(mdp: &MixtureMdp, gamma: f64) -> Self {
        let f = &mdp.features;
        let d = f.dim as f64;
        let h = f.horizon as f64;
        let lambda_w = match f.kind {
            TransitionKind::LinearMixture => h * h * d,
            TransitionKind::Mnl => d,
        };
        Self {
            gamma,
            lambda_theta: d,
            lambda_w,
            delta: 1.0 / (4.0 * mdp.total_steps() as f64),
            s_theta: mdp.s_theta,
            s_w: mdp.s_w,
            l_psi: f.l_psi(),
            kappa: mdp.kappa,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let ok = self.gamma > 0.0
            && self.gamma <= 1.0
            && self.lambda_theta > 0.0
            && self.lambda_w > 0.0
            && self.delta > 0.0
            && self.delta < 1.0
            && self.kappa > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid planner settings {self:?}")))
        }
    }

    /// `β_θ = √λ_θ·S_θ`.
    pub fn beta_theta(&self) -> f64 {
        self.lambda_theta.sqrt() * self.s_theta
    }
}
