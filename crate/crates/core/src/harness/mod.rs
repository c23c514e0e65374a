//! Experiment configuration, the parallel trial runner and its CSV/JSON
//! output, and the regret scaling sweep.

mod run;
mod sweep;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use run::{
    checkpoint_step, git_describe, run_experiment, write_csv, write_outputs, AlgorithmSummary, ExperimentResult,
    RegretTrace, Summary, CSV_HEADER,
};
pub use sweep::{fit_loglog, scaling_sweep, LogLogFit, SweepPoint, SweepResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Lb,
    Glb,
    Scb,
    ScbPw,
    Bob,
    MdpLm,
    MdpMnl,
}

impl Task {
    pub const ALL: [Task; 7] = [Task::Lb, Task::Glb, Task::Scb, Task::ScbPw, Task::Bob, Task::MdpLm, Task::MdpMnl];

    pub fn label(self) -> &'static str {
        match self {
            Task::Lb => "lb",
            Task::Glb => "glb",
            Task::Scb => "scb",
            Task::ScbPw => "scb_pw",
            Task::Bob => "bob",
            Task::MdpLm => "mdp_lm",
            Task::MdpMnl => "mdp_mnl",
        }
    }

    pub fn is_mdp(self) -> bool {
        matches!(self, Task::MdpLm | Task::MdpMnl)
    }

    /// Algorithms run when the configuration lists none.
    pub fn default_algorithms(self) -> Vec<String> {
        let names: &[&str] = match self {
            Task::ScbPw => &["weighted"],
            Task::Bob => &["bob", "fixed-all"],
            _ => &["weighted", "static"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown task '{s}' (expected one of lb, glb, scb, scb_pw, bob, mdp_lm, mdp_mnl)")))
    }
}

/// Discount factor of the weighted learner: a fixed value or the
/// rate-optimal value computed from the known drift budget.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GammaSetting {
    #[default]
    Auto,
    Value(f64),
}

impl FromStr for GammaSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(GammaSetting::Auto);
        }
        s.parse::<f64>()
            .map(GammaSetting::Value)
            .map_err(|_| Error::Config(format!("gamma must be 'auto' or a number, got '{s}'")))
    }
}

impl Serialize for GammaSetting {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GammaSetting::Auto => ser.serialize_str("auto"),
            GammaSetting::Value(v) => ser.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for GammaSetting {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(de)? {
            Repr::Number(v) => Ok(GammaSetting::Value(v)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathChoice {
    /// One counter-clockwise revolution of radius `S` (needs `d = 2`).
    #[default]
    Rotating,
    /// `changes` abrupt jumps between random points of the `S`-sphere.
    Piecewise,
}

/// One experiment. Field names follow the JSON config file; absent fields
/// take task-dependent defaults (see the accessors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    /// Bandit rounds.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    /// MDP episodes.
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
    /// MDP stages per episode.
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    #[serde(rename = "d", default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default = "defaults::n_arms")]
    pub n_arms: usize,
    #[serde(rename = "S", default = "defaults::one")]
    pub s: f64,
    #[serde(rename = "L", default = "defaults::one")]
    pub l: f64,
    /// Sub-Gaussian noise scale; defaults to 1 for linear rewards and 1/2
    /// for Bernoulli rewards.
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Confidence level of the bandit radii; defaults to `1/T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub gamma: GammaSetting,
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub algorithms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathChoice>,
    /// Number of abrupt changes of piecewise paths.
    #[serde(default = "defaults::changes")]
    pub changes: usize,
    /// Base learner family of the `bob` task.
    #[serde(default = "defaults::bob_base")]
    pub bob_base: Task,
    /// MDP drift: full back-and-forth parameter sweeps over the run.
    #[serde(default = "defaults::drift")]
    pub drift: f64,
    #[serde(default = "defaults::states")]
    pub states: usize,
    #[serde(default = "defaults::actions")]
    pub actions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

mod defaults {
    use super::Task;

    pub fn n_arms() -> usize {
        50
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn trials() -> usize {
        20
    }
    pub fn changes() -> usize {
        4
    }
    pub fn bob_base() -> Task {
        Task::Lb
    }
    pub fn drift() -> f64 {
        1.0
    }
    pub fn states() -> usize {
        5
    }
    pub fn actions() -> usize {
        3
    }
}

impl ExperimentConfig {
    /// Defaults for `task`: the d = 2, T = 6000, n = 50 bandit setup and
    /// the 5-state, 3-action, H = 5, d = 4, K = 400 MDP.
    pub fn new(task: Task) -> Self {
        serde_json::from_value(serde_json::json!({ "task": task })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn horizon(&self) -> usize {
        self.rounds.unwrap_or(6000)
    }

    pub fn n_episodes(&self) -> usize {
        self.episodes.unwrap_or(400)
    }

    pub fn n_stages(&self) -> usize {
        self.stages.unwrap_or(5)
    }

    pub fn dimension(&self) -> usize {
        self.dim.unwrap_or(if self.task.is_mdp() { 4 } else { 2 })
    }

    /// Family of the bandit learner actually run (the base family for `bob`).
    pub fn bandit_family(&self) -> Task {
        if self.task == Task::Bob {
            self.bob_base
        } else {
            self.task
        }
    }

    pub fn noise(&self) -> f64 {
        self.r.unwrap_or(if self.bandit_family() == Task::Lb { 1.0 } else { 0.5 })
    }

    pub fn confidence(&self) -> f64 {
        self.delta.unwrap_or(1.0 / self.horizon() as f64)
    }

    pub fn path_choice(&self) -> PathChoice {
        self.path.unwrap_or(if self.task == Task::ScbPw { PathChoice::Piecewise } else { PathChoice::Rotating })
    }

    pub fn algorithm_names(&self) -> Vec<String> {
        if self.algorithms.is_empty() {
            self.task.default_algorithms()
        } else {
            self.algorithms.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if let GammaSetting::Value(g) = self.gamma {
            if !(g > 0.0 && g <= 1.0) {
                return fail(format!("gamma {g} must lie in (0, 1]"));
            }
        }
        if self.task.is_mdp() {
            if self.n_episodes() == 0 || self.n_stages() == 0 || self.states == 0 || self.actions == 0 || self.dimension() == 0 {
                return fail("MDP sizes must be positive".into());
            }
            if !(self.drift >= 0.0 && self.drift.is_finite()) {
                return fail(format!("drift {} must be a nonnegative number", self.drift));
            }
        } else {
            if self.horizon() == 0 || self.dimension() == 0 || self.n_arms == 0 {
                return fail("T, d and n_arms must be positive".into());
            }
            if !(self.s > 0.0 && self.l > 0.0 && self.noise() >= 0.0) {
                return fail(format!("need S > 0, L > 0, R ≥ 0 (got {}, {}, {})", self.s, self.l, self.noise()));
            }
            let delta = self.confidence();
            if !(delta > 0.0 && delta < 1.0) {
                return fail(format!("delta {delta} must lie in (0, 1)"));
            }
            if self.path_choice() == PathChoice::Rotating && self.dimension() != 2 {
                return fail(format!("the rotating path needs d = 2, got d = {}", self.dimension()));
            }
            if self.task == Task::Bob && !matches!(self.bob_base, Task::Lb | Task::Glb | Task::Scb) {
                return fail(format!("bob_base must be lb, glb or scb, got {}", self.bob_base));
            }
            if self.task == Task::Bob && self.horizon() < self.dimension() {
                return fail("bob needs T ≥ d".into());
            }
        }
        for name in self.algorithm_names() {
            Algorithm::parse(&name, self.task)?;
        }
        Ok(())
    }
}

/// A learner slot in a comparison run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Discounted learner with the configured `γ`.
    Weighted,
    /// Undiscounted learner (`γ = 1`).
    Static,
    /// Undiscounted learner wiped every `⌈d^{1/4}√(T/(1+P_T))⌉` rounds.
    Restart,
    /// Meta learner over the candidate discounts.
    Bob,
    /// Candidate `i` (1-based) held fixed on the meta learner's schedule.
    Fixed(usize),
    /// Every fixed candidate; expanded before running.
    FixedAll,
}

impl Algorithm {
    pub fn parse(name: &str, task: Task) -> Result<Self> {
        let alg = match name {
            "weighted" => Algorithm::Weighted,
            "static" => Algorithm::Static,
            "restart" => Algorithm::Restart,
            "bob" => Algorithm::Bob,
            "fixed-all" => Algorithm::FixedAll,
            _ => match name.strip_prefix("fixed-").and_then(|i| i.parse::<usize>().ok()) {
                Some(i) if i >= 1 => Algorithm::Fixed(i),
                _ => return Err(Error::Config(format!("unknown algorithm '{name}'"))),
            },
        };
        let ok = match task {
            Task::Lb | Task::Glb | Task::Scb => matches!(alg, Algorithm::Weighted | Algorithm::Static | Algorithm::Restart),
            Task::ScbPw => alg == Algorithm::Weighted,
            Task::Bob => matches!(alg, Algorithm::Bob | Algorithm::Fixed(_) | Algorithm::FixedAll),
            Task::MdpLm | Task::MdpMnl => matches!(alg, Algorithm::Weighted | Algorithm::Static),
        };
        if ok {
            Ok(alg)
        } else {
            Err(Error::Config(format!("algorithm '{name}' is not available for task {task}")))
        }
    }

    pub fn label(self) -> String {
        match self {
            Algorithm::Weighted => "weighted".into(),
            Algorithm::Static => "static".into(),
            Algorithm::Restart => "restart".into(),
            Algorithm::Bob => "bob".into(),
            Algorithm::Fixed(i) => format!("fixed-{i}"),
            Algorithm::FixedAll => "fixed-all".into(),
        }
    }
}
