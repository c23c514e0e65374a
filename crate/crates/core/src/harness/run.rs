use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{Algorithm, ExperimentConfig, GammaSetting, PathChoice, Task};
use crate::bandit::{simulate_bandit, BanditLearner};
use crate::bob::{bob_run, fixed_episodes, BobConfig};
use crate::design::RadiusParams;
use crate::env::{gen_arms, path_length, stream_rng, trial_seed, ArmSet, BanditEnv, ParameterPath, RewardModel, Stream};
use crate::error::{Error, Result};
use crate::glm::{default_lambda, optimal_gamma_glb, optimal_gamma_scb, optimal_gamma_scbpw, GlmLearner, GlmVariant};
use crate::lb::{optimal_gamma_lb, restart_period, Forgetting, LbLearner};
use crate::link::{LinkKind, LinkModel};
use crate::mdp::{
    build_desk_instance, optimal_gamma_mdp, run_episodes, DeskSizes, MixtureMdp, MnlWeightUcrl, MdpOutcome,
    TransitionKind, UcrlConfig, WeightUcrl,
};

pub const CSV_HEADER: [&str; 6] = ["task", "algorithm", "trial", "t", "inst_regret", "cum_regret"];

/// Regret of one (algorithm, trial) pair, per round or per episode.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub algorithm: String,
    pub trial: usize,
    pub seed: u64,
    pub inst_regret: Vec<f64>,
    pub wall_clock_s: f64,
    pub config_hash: String,
    /// Set when a solver failed and the trial was abandoned.
    pub failure: Option<String>,
    pub projection_failures: usize,
    /// Meta-learner rewards clipped into `[0, 1]`.
    pub clipped: usize,
    /// Smallest and largest optimistic `Q` seen (MDP tasks).
    pub q_range: Option<(f64, f64)>,
}

impl RegretTrace {
    pub fn cumulative(&self) -> Vec<f64> {
        self.inst_regret
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }

    pub fn final_regret(&self) -> f64 {
        self.inst_regret.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restart_period: Option<usize>,
    pub trials_completed: usize,
    pub mean_final_regret: f64,
    pub sd_final_regret: f64,
    pub solver_failures: usize,
    pub projection_failures: usize,
    pub clipped_meta_rewards: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_max: Option<f64>,
    pub mean_wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub git_describe: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    /// Path length of the hidden parameters (`P_T`, or `Δ` for MDPs).
    pub path_length: f64,
    pub algorithms: Vec<AlgorithmSummary>,
}

impl Summary {
    pub fn algorithm(&self, name: &str) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.algorithm == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Ordered by algorithm, then trial.
    pub traces: Vec<RegretTrace>,
    pub summary: Summary,
}

/// `git describe --always --dirty` of the working directory, or `"unknown"`.
pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

/// Hash of the configuration, ignoring where outputs go.
fn config_hash(config: &ExperimentConfig) -> String {
    let mut h = DefaultHasher::new();
    let keyed = ExperimentConfig { out: None, ..config.clone() };
    serde_json::to_string(&keyed).expect("config serializes").hash(&mut h);
    format!("{:016x}", h.finish())
}

enum Instance {
    Bandit { env: BanditEnv, link: LinkModel, params: RadiusParams },
    Mdp(MixtureMdp),
}

impl Instance {
    fn path_length(&self) -> f64 {
        match self {
            Instance::Bandit { env, .. } => path_length(&env.path),
            Instance::Mdp(m) => m.path_length(),
        }
    }
}

fn build_instance(c: &ExperimentConfig) -> Result<Instance> {
    if c.task.is_mdp() {
        let kind = if c.task == Task::MdpLm { TransitionKind::LinearMixture } else { TransitionKind::Mnl };
        let sizes = DeskSizes {
            states: c.states,
            actions: c.actions,
            horizon: c.n_stages(),
            dim: c.dimension(),
            episodes: c.n_episodes(),
        };
        return Ok(Instance::Mdp(build_desk_instance(kind, sizes, c.drift, c.base_seed)?));
    }
    let (t, d) = (c.horizon(), c.dimension());
    let mut rng = stream_rng(c.base_seed, Stream::Instance);
    let arms: ArmSet = gen_arms(c.n_arms, d, c.l, &mut rng)?;
    let path = match c.path_choice() {
        PathChoice::Rotating => ParameterPath::rotating(t, c.s),
        PathChoice::Piecewise => ParameterPath::piecewise(t, d, c.changes, c.s, &mut rng),
    };
    let (model, link_kind) = match c.bandit_family() {
        Task::Lb => (RewardModel::GaussianLinear { r: c.noise() }, LinkKind::Identity),
        _ => (RewardModel::BernoulliLogistic, LinkKind::Logistic),
    };
    let link = LinkModel::new(link_kind, c.s, c.l)?;
    let params = RadiusParams::new(c.s, c.l, c.noise(), c.confidence(), d)?;
    Ok(Instance::Bandit { env: BanditEnv { arms, path, model }, link, params })
}

/// The discount of the weighted learner: the configured value, or the
/// rate-optimal value from the known drift budget.
fn weighted_gamma(c: &ExperimentConfig, inst: &Instance) -> f64 {
    if let GammaSetting::Value(g) = c.gamma {
        return g;
    }
    let p = inst.path_length();
    let (t, d) = (c.horizon(), c.dimension());
    match (c.task, inst) {
        (Task::Lb, _) => optimal_gamma_lb(d, t, p),
        (Task::Glb, Instance::Bandit { link, .. }) => optimal_gamma_glb(d, t, p, link),
        (Task::Scb, Instance::Bandit { link, .. }) => optimal_gamma_scb(d, t, p, link),
        (Task::ScbPw, Instance::Bandit { env, .. }) => optimal_gamma_scbpw(d, t, env.path.change_count()),
        (Task::MdpLm | Task::MdpMnl, _) => optimal_gamma_mdp(c.n_episodes(), c.n_stages(), p),
        _ => 1.0,
    }
}

/// Bandit learner of any family, so one runner drives them all.
enum AnyBandit {
    Lb(LbLearner),
    Glm(GlmLearner),
}

impl AnyBandit {
    fn projection_failures(&self) -> usize {
        match self {
            AnyBandit::Lb(_) => 0,
            AnyBandit::Glm(g) => g.projection_failures(),
        }
    }
}

impl BanditLearner for AnyBandit {
    fn select(&mut self, arms: &ArmSet) -> Result<usize> {
        match self {
            AnyBandit::Lb(l) => BanditLearner::select(l, arms),
            AnyBandit::Glm(g) => BanditLearner::select(g, arms),
        }
    }

    fn observe(&mut self, x: &[f64], reward: f64) -> Result<()> {
        match self {
            AnyBandit::Lb(l) => l.observe(x, reward),
            AnyBandit::Glm(g) => g.observe(x, reward),
        }
    }
}

fn make_bandit(family: Task, forgetting: Forgetting, c: &ExperimentConfig, link: &LinkModel, params: &RadiusParams) -> Result<AnyBandit> {
    let (d, t) = (c.dimension(), c.horizon());
    let variant = match family {
        Task::Lb => return Ok(AnyBandit::Lb(LbLearner::new(forgetting, d as f64, *params)?)),
        Task::Glb => GlmVariant::Glb,
        Task::Scb => GlmVariant::Scb,
        Task::ScbPw => GlmVariant::ScbPw { horizon: t },
        other => return Err(Error::Config(format!("{other} is not a bandit family"))),
    };
    let lambda = default_lambda(variant, d, t, link);
    Ok(AnyBandit::Glm(GlmLearner::new(variant, forgetting, lambda, *link, *params)?))
}

struct Job {
    algorithm: Algorithm,
    trial: usize,
}

struct Plan<'a> {
    config: &'a ExperimentConfig,
    instance: &'a Instance,
    gamma: f64,
    restart: usize,
    bob: Option<BobConfig>,
    hash: String,
}

fn run_job(plan: &Plan<'_>, job: &Job) -> Result<RegretTrace> {
    let c = plan.config;
    let seed = trial_seed(c.base_seed, job.trial);
    let mut env_rng = stream_rng(seed, Stream::Environment);
    let mut meta_rng = stream_rng(seed, Stream::Learner);
    let mut trace = RegretTrace {
        algorithm: job.algorithm.label(),
        trial: job.trial,
        seed,
        inst_regret: Vec::new(),
        wall_clock_s: 0.0,
        config_hash: plan.hash.clone(),
        failure: None,
        projection_failures: 0,
        clipped: 0,
        q_range: None,
    };
    let start = Instant::now();
    let outcome: Result<()> = (|| {
        match plan.instance {
            Instance::Bandit { env, link, params } => {
                let family = c.bandit_family();
                let make = |gamma: f64| make_bandit(family, Forgetting::Weighted { gamma }, c, link, params);
                match job.algorithm {
                    Algorithm::Bob => {
                        let bob = plan.bob.as_ref().expect("bob schedule");
                        let scale = bob.reward_scale(c.s, c.l, c.noise());
                        let out = bob_run(env, bob, scale, make, &mut env_rng, &mut meta_rng)?;
                        trace.clipped = out.clipped;
                        trace.inst_regret = out.rounds.regret;
                    }
                    Algorithm::Fixed(i) => {
                        let bob = plan.bob.as_ref().expect("bob schedule");
                        let gamma = bob.candidates[i - 1];
                        trace.inst_regret = fixed_episodes(env, bob, gamma, make, &mut env_rng)?.regret;
                    }
                    alg => {
                        let forgetting = match alg {
                            Algorithm::Weighted => Forgetting::Weighted { gamma: plan.gamma },
                            Algorithm::Static => Forgetting::Static,
                            _ => Forgetting::Restart { period: plan.restart },
                        };
                        let mut learner = make_bandit(family, forgetting, c, link, params)?;
                        let out = simulate_bandit(env, &mut learner, &mut env_rng);
                        trace.projection_failures = learner.projection_failures();
                        trace.inst_regret = out?.regret;
                    }
                }
            }
            Instance::Mdp(mdp) => {
                let gamma = if job.algorithm == Algorithm::Weighted { plan.gamma } else { 1.0 };
                let ucrl = UcrlConfig::for_instance(mdp, gamma);
                let out: MdpOutcome = match mdp.features.kind {
                    TransitionKind::LinearMixture => run_episodes(mdp, &mut WeightUcrl::new(mdp.features.clone(), ucrl)?, &mut env_rng)?,
                    TransitionKind::Mnl => {
                        let mut learner = MnlWeightUcrl::new(mdp.features.clone(), ucrl)?;
                        let out = run_episodes(mdp, &mut learner, &mut env_rng);
                        trace.projection_failures = learner.projection_failures();
                        out?
                    }
                };
                trace.q_range = Some((out.q_min, out.q_max));
                trace.inst_regret = out.regret;
            }
        }
        Ok(())
    })();
    trace.wall_clock_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok(()) => Ok(trace),
        Err(e @ Error::NoConvergence { .. }) => {
            trace.inst_regret.clear();
            trace.failure = Some(e.to_string());
            Ok(trace)
        }
        Err(e) => Err(e),
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn expand_algorithms(c: &ExperimentConfig, bob: Option<&BobConfig>) -> Result<Vec<Algorithm>> {
    let mut out = Vec::new();
    for name in c.algorithm_names() {
        match Algorithm::parse(&name, c.task)? {
            Algorithm::FixedAll => {
                let n = bob.map_or(0, |b| b.n_candidates());
                out.extend((1..=n).map(Algorithm::Fixed));
            }
            Algorithm::Fixed(i) if bob.is_some_and(|b| i > b.n_candidates()) => {
                return Err(Error::Config(format!(
                    "fixed-{i} exceeds the {} candidate discounts",
                    bob.map_or(0, |b| b.n_candidates())
                )));
            }
            alg => out.push(alg),
        }
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|a| seen.insert(*a));
    Ok(out)
}

/// Runs every (algorithm, trial) pair in parallel. Trial `i` uses seed
/// `base_seed + i`; the arm set, parameter path and MDP instance depend on
/// `base_seed` only. Solver non-convergence abandons that trial and is
/// counted in the summary; every other error aborts the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let instance = build_instance(config)?;
    let bob = if config.task == Task::Bob { Some(BobConfig::new(config.dimension(), config.horizon())?) } else { None };
    let algorithms = expand_algorithms(config, bob.as_ref())?;
    let p = instance.path_length();
    let plan = Plan {
        config,
        gamma: weighted_gamma(config, &instance),
        restart: restart_period(config.dimension(), config.horizon(), p),
        instance: &instance,
        bob,
        hash: config_hash(config),
    };
    let jobs: Vec<Job> = algorithms
        .iter()
        .flat_map(|&algorithm| (0..config.trials).map(move |trial| Job { algorithm, trial }))
        .collect();
    let traces = jobs.par_iter().map(|job| run_job(&plan, job)).collect::<Result<Vec<_>>>()?;

    let summaries = algorithms
        .iter()
        .map(|alg| {
            let label = alg.label();
            let mine: Vec<&RegretTrace> = traces.iter().filter(|t| t.algorithm == label).collect();
            let done: Vec<&RegretTrace> = mine.iter().copied().filter(|t| t.failure.is_none()).collect();
            let finals: Vec<f64> = done.iter().map(|t| t.final_regret()).collect();
            let (mean, sd) = mean_sd(&finals);
            let q_min = done.iter().filter_map(|t| t.q_range.map(|q| q.0)).reduce(f64::min);
            let q_max = done.iter().filter_map(|t| t.q_range.map(|q| q.1)).reduce(f64::max);
            let gamma = match alg {
                Algorithm::Weighted => Some(plan.gamma),
                Algorithm::Static => Some(1.0),
                Algorithm::Fixed(i) => plan.bob.as_ref().map(|b| b.candidates[i - 1]),
                _ => None,
            };
            AlgorithmSummary {
                algorithm: label,
                gamma,
                restart_period: (*alg == Algorithm::Restart).then_some(plan.restart),
                trials_completed: done.len(),
                mean_final_regret: mean,
                sd_final_regret: sd,
                solver_failures: mine.len() - done.len(),
                projection_failures: mine.iter().map(|t| t.projection_failures).sum(),
                clipped_meta_rewards: mine.iter().map(|t| t.clipped).sum(),
                q_min,
                q_max,
                mean_wall_clock_s: mine.iter().map(|t| t.wall_clock_s).sum::<f64>() / mine.len().max(1) as f64,
            }
        })
        .collect();
    let summary = Summary {
        config: config.clone(),
        git_describe: git_describe(),
        config_hash: plan.hash.clone(),
        seeds: (0..config.trials).map(|i| trial_seed(config.base_seed, i)).collect(),
        path_length: p,
        algorithms: summaries,
    };
    Ok(ExperimentResult { traces, summary })
}

/// Rows kept in the CSV: every round up to 10⁴ rounds, otherwise every
/// `⌈T/1000⌉`-th round plus the last one.
pub fn checkpoint_step(len: usize) -> usize {
    if len <= 10_000 {
        1
    } else {
        len.div_ceil(1000)
    }
}

/// Long-format CSV of all completed traces, LF line endings.
pub fn write_csv<W: Write>(out: W, task: Task, traces: &[RegretTrace]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for trace in traces.iter().filter(|t| t.failure.is_none()) {
        let n = trace.inst_regret.len();
        let step = checkpoint_step(n);
        let (trial, label) = (trace.trial.to_string(), task.label());
        for (i, (inst, cum)) in trace.inst_regret.iter().zip(trace.cumulative()).enumerate() {
            let t = i + 1;
            if t % step == 0 || t == n {
                w.write_record([label, &trace.algorithm, &trial, &t.to_string(), &inst.to_string(), &cum.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `traces.csv` and `summary.json` into `dir` (created if needed).
pub fn write_outputs(dir: &Path, result: &ExperimentResult) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("traces.csv");
    let json_path = dir.join("summary.json");
    let file = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    write_csv(file, result.summary.config.task, &result.traces)?;
    let mut json = serde_json::to_string_pretty(&result.summary)?;
    json.push('\n');
    std::fs::write(&json_path, json)?;
    Ok((csv_path, json_path))
}
