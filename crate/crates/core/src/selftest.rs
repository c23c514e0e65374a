//! Randomized checks of the estimators and their confidence bounds against
//! independent oracles: batch least squares, direct matrix algebra and
//! ground-truth parameter paths.
//!
//! Every suite is deterministic given its seed and returns a
//! [`SuiteReport`]; [`run_all`] is what `driftbandit selftest` prints.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::design::{det_bound_oracle, coverage_bound_oracle, trace_bound_oracle, weighted_potential_bound, DiscountedDesign, RadiusParams};
use crate::env::{gen_arms, path_length, stream_rng, trial_seed, BanditEnv, ParameterPath, RewardModel, SimRng, Stream};
use crate::error::Result;
use crate::glm::oracles::scb_error_bound;
use crate::glm::{default_lambda, optimal_gamma_scb, GlmLearner, GlmVariant, ScoreModel, WeightedHistory};
use crate::lb::{optimal_gamma_lb, Forgetting, LbLearner};
use crate::link::{LinkKind, LinkModel};
use crate::numerics::{dot, max_abs, norm2, scaled};
use crate::BanditLearner;

const DIMS: [usize; 3] = [1, 2, 5];
const GAMMAS: [f64; 4] = [0.5, 0.9, 0.99, 1.0];

/// How a suite is judged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// `value ≤ limit` (worst error or violation count).
    AtMost(f64),
    /// `value ≥ limit` (coverage rate).
    AtLeast(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub value: f64,
    pub criterion: Criterion,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        match self.criterion {
            Criterion::AtMost(l) => self.value <= l,
            Criterion::AtLeast(l) => self.value >= l,
        }
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (op, limit) = match self.criterion {
            Criterion::AtMost(l) => ("<=", l),
            Criterion::AtLeast(l) => (">=", l),
        };
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {:.3e} {op} {:.3e} over {} cases", self.name, self.value, limit, self.cases)
    }
}

fn ball_point(dim: usize, radius: f64, rng: &mut SimRng) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm2(&v).max(1e-300);
    scaled(&v, radius * rng.random::<f64>() / n)
}

/// Case `i` of a sweep over `d ∈ {1,2,5}` and `γ ∈ {0.5,0.9,0.99,1}`.
fn case_shape(i: usize) -> (usize, f64) {
    (DIMS[i % 3], GAMMAS[(i / 3) % 4])
}

struct History {
    dim: usize,
    gamma: f64,
    lambda: f64,
    xs: Vec<Vec<f64>>,
    rs: Vec<f64>,
}

fn random_history(i: usize, seed: u64) -> History {
    let mut rng = stream_rng(trial_seed(seed, i), Stream::Instance);
    let (dim, gamma) = case_shape(i);
    let n = rng.random_range(1..=200);
    let lambda = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    let xs: Vec<Vec<f64>> = (0..n).map(|_| ball_point(dim, 1.0, &mut rng)).collect();
    let rs = xs.iter().map(|x| x.iter().sum::<f64>() * 0.3 + rng.sample::<f64, _>(StandardNormal)).collect();
    History { dim, gamma, lambda, xs, rs }
}

/// `(λI + Σ γ^{n−s} x_s x_sᵀ)⁻¹ Σ γ^{n−s} r_s x_s` by LU on the batch sums.
fn batch_ridge(h: &History) -> Vec<f64> {
    let n = h.xs.len();
    let mut v = DMatrix::<f64>::identity(h.dim, h.dim) * h.lambda;
    let mut b = DVector::<f64>::zeros(h.dim);
    for (s, (x, r)) in h.xs.iter().zip(&h.rs).enumerate() {
        let w = h.gamma.powi((n - 1 - s) as i32);
        let xv = DVector::from_column_slice(x);
        v += &xv * xv.transpose() * w;
        b += xv * (w * r);
    }
    v.lu().solve(&b).expect("regularized design is invertible").iter().copied().collect()
}

fn recursive_design(h: &History) -> Result<DiscountedDesign> {
    let mut d = DiscountedDesign::new(h.dim, h.gamma, h.lambda)?;
    for (x, r) in h.xs.iter().zip(&h.rs) {
        d.update(x, *r)?;
    }
    Ok(d)
}

/// Largest `‖θ̂_recursive − θ̂_batch‖∞` over random histories.
pub fn estimator_equivalence(histories: usize, seed: u64) -> Result<SuiteReport> {
    let errs = (0..histories)
        .into_par_iter()
        .map(|i| {
            let h = random_history(i, seed);
            let rec = recursive_design(&h)?.ridge_estimate()?;
            let batch = batch_ridge(&h);
            Ok(rec.iter().zip(&batch).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SuiteReport {
        name: "recursive vs batch weighted ridge",
        cases: histories,
        value: errs.into_iter().fold(0.0, f64::max),
        criterion: Criterion::AtMost(1e-8),
    })
}

/// Violations of `Σ_t ‖X_t‖²_{V_{t−1}⁻¹} ≤ 2max{1, L²/λ}d(T log(1/γ) + log(1 + L²W_T/(dλ)))`.
pub fn potential_lemma(sequences: usize, seed: u64) -> Result<SuiteReport> {
    let bad = (0..sequences)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(trial_seed(seed, i), Stream::Learner);
            let (dim, gamma) = case_shape(i);
            let t = rng.random_range(1..=200);
            let lambda = [0.25, 1.0, 4.0][rng.random_range(0..3)];
            let l = [0.5, 1.0, 2.0][rng.random_range(0..3)];
            let mut design = DiscountedDesign::new(dim, gamma, lambda)?;
            let mut lhs = 0.0;
            for _ in 0..t {
                let x = ball_point(dim, l, &mut rng);
                lhs += design.matrix().cholesky()?.inv_quad(&x)?;
                design.update(&x, 0.0)?;
            }
            let rhs = weighted_potential_bound(t, gamma, lambda, l, dim, design.weight_sum());
            Ok(usize::from(lhs > rhs * (1.0 + 1e-12) + 1e-12))
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(SuiteReport {
        name: "weighted potential lemma",
        cases: sequences,
        value: bad.iter().sum::<usize>() as f64,
        criterion: Criterion::AtMost(0.0),
    })
}

/// Violations of `Σ_{s≤p} ‖A_s‖²_{U⁻¹} ≤ d` for `U = λI + Σ_s A_s A_sᵀ`, at every `p`.
pub fn trace_lemma(sequences: usize, seed: u64) -> Result<SuiteReport> {
    let bad = (0..sequences)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(trial_seed(seed, i), Stream::Environment);
            let dim = DIMS[i % 3];
            let n = rng.random_range(1..=200);
            let lambda = [0.01, 1.0, 10.0][rng.random_range(0..3)];
            let scale = [0.1, 1.0, 10.0][rng.random_range(0..3)];
            let a: Vec<Vec<f64>> = (0..n).map(|_| ball_point(dim, scale, &mut rng)).collect();
            let sums = trace_bound_oracle(&a, lambda)?;
            Ok(sums.iter().filter(|s| **s > dim as f64 + 1e-9).count().min(1))
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(SuiteReport {
        name: "trace lemma",
        cases: sequences,
        value: bad.iter().sum::<usize>() as f64,
        criterion: Criterion::AtMost(0.0),
    })
}

/// Violations of `log det V_t ≤ d log(λ + L²W_t/d)` at any round.
pub fn determinant_lemma(sequences: usize, seed: u64) -> Result<SuiteReport> {
    let bad = (0..sequences)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(trial_seed(seed, i), Stream::Instance);
            let (dim, gamma) = case_shape(i);
            let t = rng.random_range(1..=200);
            let lambda = [0.25, 1.0, 4.0][rng.random_range(0..3)];
            let l = [0.5, 1.0, 2.0][rng.random_range(0..3)];
            let mut design = DiscountedDesign::new(dim, gamma, lambda)?;
            let mut violated = false;
            for _ in 0..t {
                design.update(&ball_point(dim, l, &mut rng), 0.0)?;
                let (lhs, rhs) = det_bound_oracle(&design, l)?;
                violated |= lhs > rhs + 1e-9;
            }
            Ok(usize::from(violated))
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(SuiteReport {
        name: "determinant lemma",
        cases: sequences,
        value: bad.iter().sum::<usize>() as f64,
        criterion: Criterion::AtMost(0.0),
    })
}

/// Rounds of the coverage experiments and how many are checked.
const COVERAGE_ROUNDS: usize = 600;
const COVERAGE_CHECKPOINTS: usize = 20;

fn checkpoints(rounds: usize) -> impl Iterator<Item = usize> {
    let step = rounds / COVERAGE_CHECKPOINTS;
    (1..=COVERAGE_CHECKPOINTS).map(move |i| i * step)
}

/// Fraction of runs of the discounted linear learner (rotating path, d = 2,
/// 50 arms, Gaussian noise) in which `|xᵀ(θ̂_t − θ_t)|` stays below the
/// estimation-error bound for every arm at all 20 checkpoints.
pub fn confidence_coverage(runs: usize, delta: f64, seed: u64) -> Result<SuiteReport> {
    let t_max = COVERAGE_ROUNDS;
    let path = ParameterPath::rotating(t_max, 1.0);
    let gamma = optimal_gamma_lb(2, t_max, path_length(&path));
    let params = RadiusParams::new(1.0, 1.0, 1.0, delta, 2)?;
    let held = (0..runs)
        .into_par_iter()
        .map(|i| {
            let s = trial_seed(seed, i);
            let env = BanditEnv {
                arms: gen_arms(50, 2, 1.0, &mut stream_rng(s, Stream::Instance))?,
                path: path.clone(),
                model: RewardModel::GaussianLinear { r: 1.0 },
            };
            let mut rng = stream_rng(s, Stream::Environment);
            let mut learner = LbLearner::new(Forgetting::Weighted { gamma }, 2.0, params)?;
            let mut checks = checkpoints(t_max).peekable();
            let mut ok = true;
            for t in 1..=t_max {
                if checks.peek() == Some(&t) {
                    checks.next();
                    let theta_hat = learner.design().ridge_estimate()?;
                    let truth = env.path.theta(t);
                    for x in env.arms.arms() {
                        let err = (dot(x, &theta_hat) - dot(x, truth)).abs();
                        ok &= err <= coverage_bound_oracle(&env.path.thetas()[..t], learner.design(), x, &params)?;
                    }
                }
                let arm = BanditLearner::select(&mut learner, &env.arms)?;
                let r = env.pull(t, arm, &mut rng);
                learner.observe(&env.arms.arms()[arm], r)?;
            }
            Ok(usize::from(ok))
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(SuiteReport {
        name: "linear estimation-error coverage",
        cases: runs,
        value: held.iter().sum::<usize>() as f64 / runs as f64,
        criterion: Criterion::AtLeast(0.93),
    })
}

/// Same as [`confidence_coverage`] for the self-concordant logistic learner:
/// `|μ(xᵀθ̃_t) − μ(xᵀθ_t)|` against its bound, S = 1, over `rounds` rounds.
pub fn scb_coverage(runs: usize, rounds: usize, delta: f64, seed: u64) -> Result<SuiteReport> {
    let path = ParameterPath::rotating(rounds, 1.0);
    let link = LinkModel::new(LinkKind::Logistic, 1.0, 1.0)?;
    let gamma = optimal_gamma_scb(2, rounds, path_length(&path), &link);
    let lambda = default_lambda(GlmVariant::Scb, 2, rounds, &link);
    let params = RadiusParams::new(1.0, 1.0, 0.5, delta, 2)?;
    let held = (0..runs)
        .into_par_iter()
        .map(|i| {
            let s = trial_seed(seed, i);
            let env = BanditEnv {
                arms: gen_arms(50, 2, 1.0, &mut stream_rng(s, Stream::Instance))?,
                path: path.clone(),
                model: RewardModel::BernoulliLogistic,
            };
            let mut rng = stream_rng(s, Stream::Environment);
            let mut learner = GlmLearner::new(GlmVariant::Scb, Forgetting::Weighted { gamma }, lambda, link, params)?;
            let step = (rounds / COVERAGE_CHECKPOINTS).max(1);
            let mut ok = true;
            for t in 1..=rounds {
                if t % step == 0 {
                    let tilde = learner.theta_tilde().to_vec();
                    let truth = env.path.theta(t);
                    for x in env.arms.arms() {
                        let err = (link.mu(dot(x, &tilde)) - link.mu(dot(x, truth))).abs();
                        ok &= err <= scb_error_bound(&env.path.thetas()[..t], &learner, x)?;
                    }
                }
                let arm = BanditLearner::select(&mut learner, &env.arms)?;
                let r = env.pull(t, arm, &mut rng);
                learner.observe(&env.arms.arms()[arm], r)?;
            }
            Ok(usize::from(ok))
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(SuiteReport {
        name: "self-concordant estimation-error coverage",
        cases: runs,
        value: held.iter().sum::<usize>() as f64 / runs as f64,
        criterion: Criterion::AtLeast(0.93),
    })
}

fn weighted_history(h: &History) -> WeightedHistory {
    let mut w = WeightedHistory::new(h.dim, h.gamma);
    for (x, r) in h.xs.iter().zip(&h.rs) {
        w.push(x, *r);
    }
    w
}

/// Largest gap between the identity-link score root and the closed-form
/// weighted ridge estimate.
pub fn glb_reduction(histories: usize, seed: u64) -> Result<SuiteReport> {
    let errs = (0..histories)
        .into_par_iter()
        .map(|i| {
            let h = random_history(i, seed);
            let link = LinkModel::new(LinkKind::Identity, 10.0, 1.0)?;
            let wh = weighted_history(&h);
            let root = ScoreModel::new(&link, h.lambda, &wh).solve(&vec![0.0; h.dim])?.x;
            let closed = batch_ridge(&h);
            Ok(root.iter().zip(&closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SuiteReport {
        name: "identity-link score root vs ridge",
        cases: histories,
        value: errs.into_iter().fold(0.0, f64::max),
        criterion: Criterion::AtMost(1e-8),
    })
}

/// Largest `‖g(θ̂) − Σ w r x‖∞` of the logistic score solver over random
/// Bernoulli histories.
pub fn logistic_residuals(histories: usize, seed: u64) -> Result<SuiteReport> {
    let res = (0..histories)
        .into_par_iter()
        .map(|i| {
            let mut h = random_history(i, seed);
            let mut rng = stream_rng(trial_seed(seed, i), Stream::Learner);
            h.rs = h.xs.iter().map(|_| f64::from(rng.random_bool(0.3))).collect();
            let s = [1.0, 5.0][i % 2];
            let link = LinkModel::new(LinkKind::Logistic, s, 1.0)?;
            let wh = weighted_history(&h);
            let model = ScoreModel::new(&link, h.lambda, &wh);
            let root = model.solve(&vec![0.0; h.dim])?.x;
            Ok(max_abs(&model.residual(&root)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SuiteReport {
        name: "logistic score residual",
        cases: histories,
        value: res.into_iter().fold(0.0, f64::max),
        criterion: Criterion::AtMost(1e-9),
    })
}

/// Every suite at its full size.
pub fn run_all(seed: u64) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        estimator_equivalence(100, seed)?,
        potential_lemma(200, seed)?,
        trace_lemma(200, seed)?,
        determinant_lemma(200, seed)?,
        confidence_coverage(500, 0.05, seed)?,
        glb_reduction(100, seed)?,
        logistic_residuals(100, seed)?,
        scb_coverage(500, 100, 0.05, seed)?,
    ])
}
