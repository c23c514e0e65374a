//! Fixtures shared by the benchmarks.

use driftbandit::design::RadiusParams;
use driftbandit::env::{gen_arms, stream_rng, BanditEnv, ParameterPath, RewardModel, Stream};
use driftbandit::link::{LinkKind, LinkModel};

/// The 50-arm, d = 2 rotating-path instance with `T` rounds.
pub fn rotating_env(horizon: usize, s: f64, logistic: bool) -> BanditEnv {
    let arms = gen_arms(50, 2, 1.0, &mut stream_rng(1, Stream::Instance)).expect("valid sizes");
    let model = if logistic { RewardModel::BernoulliLogistic } else { RewardModel::GaussianLinear { r: 1.0 } };
    BanditEnv { arms, path: ParameterPath::rotating(horizon, s), model }
}

pub fn logistic(s: f64) -> LinkModel {
    LinkModel::new(LinkKind::Logistic, s, 1.0).expect("valid bounds")
}

pub fn radius(s: f64, r: f64, horizon: usize) -> RadiusParams {
    RadiusParams::new(s, 1.0, r, 1.0 / horizon as f64, 2).expect("valid radius")
}
