//! Exact finite-horizon dynamic programming on the true MDP of one episode.

use super::MixtureMdp;
use crate::argmax_lowest;

fn expected_next(mdp: &MixtureMdp, k: usize, h: usize, s: usize, a: usize, v: &[f64]) -> f64 {
    let sa = mdp.features.sa(s, a);
    mdp.transition(k, h, s, a).iter().zip(&mdp.features.reachable[sa]).map(|(p, &n)| p * v[n]).sum()
}

/// Optimal value `V*_1(s_1)` of episode `k` and an optimal deterministic
/// policy indexed `[h−1][s]`.
pub fn dp_oracle(mdp: &MixtureMdp, k: usize) -> (f64, Vec<Vec<usize>>) {
    let f = &mdp.features;
    let mut v = vec![0.0; f.n_states];
    let mut policy = vec![vec![0; f.n_states]; f.horizon];
    for h in (1..=f.horizon).rev() {
        let mut next = vec![0.0; f.n_states];
        for s in 0..f.n_states {
            let q: Vec<f64> = (0..f.n_actions).map(|a| mdp.reward(k, h, s, a) + expected_next(mdp, k, h, s, a, &v)).collect();
            let a = argmax_lowest(q.iter().copied()).expect("at least one action");
            policy[h - 1][s] = a;
            next[s] = q[a];
        }
        v = next;
    }
    (v[mdp.initial_state], policy)
}

/// Value `V^π_1(s_1)` of a deterministic policy in episode `k`.
pub fn policy_eval(mdp: &MixtureMdp, k: usize, policy: &[Vec<usize>]) -> f64 {
    let f = &mdp.features;
    let mut v = vec![0.0; f.n_states];
    for h in (1..=f.horizon).rev() {
        v = (0..f.n_states)
            .map(|s| {
                let a = policy[h - 1][s];
                mdp.reward(k, h, s, a) + expected_next(mdp, k, h, s, a, &v)
            })
            .collect();
    }
    v[mdp.initial_state]
}
