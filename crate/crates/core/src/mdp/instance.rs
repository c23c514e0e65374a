//! Small synthetic instances for tests and experiments.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use std::f64::consts::TAU;

use super::{MdpFeatures, MixtureMdp, TransitionKind};
use crate::env::{stream_rng, SimRng, Stream};
use crate::error::{Error, Result};
use crate::numerics::{norm2, scaled};

/// Reachable-set size of MNL instances (capped by the state count).
pub const MNL_REACHABLE: usize = 3;
/// Norm of every MNL transition feature.
pub const MNL_PSI_NORM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DeskSizes {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub dim: usize,
    pub episodes: usize,
}

impl Default for DeskSizes {
    fn default() -> Self {
        Self { states: 5, actions: 3, horizon: 5, dim: 4, episodes: 400 }
    }
}

impl DeskSizes {
    fn validate(&self) -> Result<()> {
        let ok = (1..=10).contains(&self.states)
            && (1..=4).contains(&self.actions)
            && (1..=8).contains(&self.horizon)
            && (1..=6).contains(&self.dim)
            && self.episodes >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSizes(format!(
                "{self:?}; need 1 ≤ |S| ≤ 10, 1 ≤ |A| ≤ 4, 1 ≤ H ≤ 8, 1 ≤ d ≤ 6, K ≥ 1"
            )))
        }
    }
}

fn dirichlet(n: usize, alpha: f64, rng: &mut SimRng) -> Vec<f64> {
    let g = Gamma::new(alpha, 1.0).expect("positive shape");
    let mut v: Vec<f64> = (0..n).map(|_| g.sample(rng).max(1e-300)).collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

fn gaussian_direction(dim: usize, rng: &mut SimRng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm2(&v);
        if n > 1e-12 {
            return scaled(&v, 1.0 / n);
        }
    }
}

/// Interpolation weight of episode `k` (1-based): `drift` full
/// back-and-forth sweeps between two endpoints over the run.
fn schedule(k: usize, episodes: usize, drift: f64) -> f64 {
    let x = (k - 1) as f64 / (episodes.max(2) - 1) as f64;
    0.5 * (1.0 - (TAU * drift * x).cos())
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

/// Per-(k, h) parameters moving between two endpoints per stage.
fn drifting_path(ends: &[(Vec<f64>, Vec<f64>)], episodes: usize, drift: f64) -> Vec<Vec<Vec<f64>>> {
    (1..=episodes)
        .map(|k| {
            let t = schedule(k, episodes, drift);
            ends.iter().map(|(a, b)| lerp(a, b, t)).collect()
        })
        .collect()
}

/// Lower bound on `p_i(w)·p_j(w)` over `‖w‖ ≤ s_w` for one reachable set:
/// each logit lies in `[−‖ψ_j‖S_w, ‖ψ_j‖S_w]`.
pub fn mnl_kappa_bound(psi: &[Vec<f64>], s_w: f64) -> f64 {
    let z: Vec<f64> = psi.iter().map(|p| norm2(p) * s_w).collect();
    let lower = (0..z.len())
        .map(|i| {
            let others: f64 = (0..z.len()).filter(|&j| j != i).map(|j| z[j].exp()).sum();
            (-z[i]).exp() / ((-z[i]).exp() + others)
        })
        .fold(f64::INFINITY, f64::min);
    lower * lower
}

/// Random drifting instance of the given kind.
///
/// Rewards use `φ ∈ [0,1]^d` and `θ` on the probability simplex, so every
/// reward lies in `[0, 1]`. Linear-mixture transitions stack `d` random base
/// kernels and keep `w` on the simplex. MNL transitions use random features
/// of norm [`MNL_PSI_NORM`] over [`MNL_REACHABLE`] reachable states and `w`
/// in the unit ball. `drift` is the number of back-and-forth sweeps of every
/// parameter between two random endpoints; `drift = 0` is stationary.
pub fn build_desk_instance(kind: TransitionKind, sizes: DeskSizes, drift: f64, seed: u64) -> Result<MixtureMdp> {
    sizes.validate()?;
    if !(drift >= 0.0) {
        return Err(Error::Config(format!("drift {drift} must be nonnegative")));
    }
    let mut rng = stream_rng(seed, Stream::Instance);
    let DeskSizes { states: n_s, actions: n_a, horizon: h, dim: d, episodes } = sizes;
    let n_sa = n_s * n_a;

    let phi: Vec<Vec<f64>> = (0..n_sa).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let theta_ends: Vec<_> = (0..h).map(|_| (dirichlet(d, 1.0, &mut rng), dirichlet(d, 1.0, &mut rng))).collect();

    let (reachable, psi, w_ends, s_w, kappa) = match kind {
        TransitionKind::LinearMixture => {
            // kernels[i][sa] is a distribution over next states
            let kernels: Vec<Vec<Vec<f64>>> =
                (0..d).map(|_| (0..n_sa).map(|_| dirichlet(n_s, 0.5, &mut rng)).collect()).collect();
            let psi: Vec<Vec<Vec<f64>>> = (0..n_sa)
                .map(|sa| (0..n_s).map(|next| (0..d).map(|i| kernels[i][sa][next]).collect()).collect())
                .collect();
            let w_ends: Vec<_> = (0..h).map(|_| (dirichlet(d, 1.0, &mut rng), dirichlet(d, 1.0, &mut rng))).collect();
            (vec![(0..n_s).collect::<Vec<_>>(); n_sa], psi, w_ends, 1.0, 1.0)
        }
        TransitionKind::Mnl => {
            let u = MNL_REACHABLE.min(n_s);
            let reachable: Vec<Vec<usize>> = (0..n_sa)
                .map(|_| {
                    let mut r = sample(&mut rng, n_s, u).into_vec();
                    r.sort_unstable();
                    r
                })
                .collect();
            let psi: Vec<Vec<Vec<f64>>> = reachable
                .iter()
                .map(|r| r.iter().map(|_| scaled(&gaussian_direction(d, &mut rng), MNL_PSI_NORM)).collect())
                .collect();
            let s_w = 1.0;
            let ball = |rng: &mut SimRng| scaled(&gaussian_direction(d, rng), s_w * rng.random_range(0.5..1.0));
            let w_ends: Vec<_> = (0..h).map(|_| (ball(&mut rng), ball(&mut rng))).collect();
            let kappa = psi.iter().map(|p| mnl_kappa_bound(p, s_w)).fold(f64::INFINITY, f64::min);
            (reachable, psi, w_ends, s_w, kappa)
        }
    };

    let features = MdpFeatures { n_states: n_s, n_actions: n_a, horizon: h, dim: d, kind, phi, reachable, psi };
    let theta = drifting_path(&theta_ends, episodes, drift);
    let w = drifting_path(&w_ends, episodes, drift);
    MixtureMdp::new(features, theta, w, 1.0, s_w, kappa)
}
