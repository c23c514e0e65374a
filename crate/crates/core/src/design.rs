//! Discounted design matrix, weighted ridge estimator and confidence radii.
//!
//! The learner remembers its past only through
//! `V_t = λI + Σ_s γ^{t−s} X_s X_sᵀ` and `b_t = Σ_s γ^{t−s} r_s X_s`,
//! maintained recursively as `V_t = γV_{t−1} + X_tX_tᵀ + (1−γ)λI`.

use crate::error::{check_dim, Error, Result};
use crate::numerics::{spd_solve, SpdMatrix};

/// Discounted second-moment matrix and moment vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedDesign {
    dim: usize,
    gamma: f64,
    lambda: f64,
    v: SpdMatrix,
    b: Vec<f64>,
    rounds: usize,
    weight_sum: f64,
}

impl DiscountedDesign {
    /// Fresh design `V = λI`, `b = 0`.
    ///
    /// `gamma = 1` gives the undiscounted (static) design.
    pub fn new(dim: usize, gamma: f64, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("design dimension must be positive".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Config(format!("discount {gamma} outside (0, 1]")));
        }
        if !(lambda > 0.0) {
            return Err(Error::Config(format!("regularizer {lambda} must be positive")));
        }
        Ok(Self {
            dim,
            gamma,
            lambda,
            v: SpdMatrix::scaled_identity(dim, lambda),
            b: vec![0.0; dim],
            rounds: 0,
            weight_sum: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn matrix(&self) -> &SpdMatrix {
        &self.v
    }

    pub fn moment(&self) -> &[f64] {
        &self.b
    }

    /// Number of absorbed rounds.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// `W_t = Σ_{s≤t} γ^{t−s}`, tracked recursively.
    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    /// Absorbs one observation `(x, r)`.
    pub fn update(&mut self, x: &[f64], reward: f64) -> Result<()> {
        check_dim(self.dim, x.len())?;
        self.decay();
        self.v.add_outer(x, 1.0);
        for (bi, xi) in self.b.iter_mut().zip(x) {
            *bi += reward * xi;
        }
        Ok(())
    }

    /// Absorbs several outer products as one round:
    /// `V ← γV + Σ_i x_i x_iᵀ + (1−γ)λI`, `b ← γb`.
    ///
    /// Used by multinomial transition models where one episode stage
    /// contributes a feature per reachable state.
    pub fn update_outer_products(&mut self, xs: &[Vec<f64>]) -> Result<()> {
        for x in xs {
            check_dim(self.dim, x.len())?;
        }
        self.decay();
        for x in xs {
            self.v.add_outer(x, 1.0);
        }
        Ok(())
    }

    fn decay(&mut self) {
        let g = self.gamma;
        if g < 1.0 {
            self.v.scale(g);
            self.v.add_diagonal((1.0 - g) * self.lambda);
            self.b.iter_mut().for_each(|bi| *bi *= g);
        }
        self.weight_sum = g * self.weight_sum + 1.0;
        self.rounds += 1;
    }

    /// Weighted ridge estimate `V⁻¹b`; the zero vector before any data.
    pub fn ridge_estimate(&self) -> Result<Vec<f64>> {
        if self.rounds == 0 {
            return Ok(vec![0.0; self.dim]);
        }
        spd_solve(&self.v, &self.b)
    }

    /// Resets to the fresh design, keeping `γ` and `λ`.
    pub fn reset(&mut self) {
        self.v = SpdMatrix::scaled_identity(self.dim, self.lambda);
        self.b = vec![0.0; self.dim];
        self.rounds = 0;
        self.weight_sum = 0.0;
    }
}

/// Closed form of the discounted weight sum `Σ_{s=1}^{t} γ^{t−s}`.
pub fn geometric_weight_sum(gamma: f64, rounds: usize) -> f64 {
    if gamma >= 1.0 {
        rounds as f64
    } else {
        (1.0 - gamma.powi(rounds as i32)) / (1.0 - gamma)
    }
}

/// Constants entering the confidence radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusParams {
    /// Bound on `‖θ‖₂`.
    pub s: f64,
    /// Bound on `‖x‖₂`.
    pub l: f64,
    /// Sub-Gaussian scale of the reward noise.
    pub r: f64,
    pub delta: f64,
    pub dim: usize,
}

impl RadiusParams {
    pub fn new(s: f64, l: f64, r: f64, delta: f64, dim: usize) -> Result<Self> {
        if !(s > 0.0 && l > 0.0 && r >= 0.0) || dim == 0 {
            return Err(Error::Config(format!(
                "radius parameters must be positive (S={s}, L={l}, R={r}, d={dim})"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("confidence level {delta} outside (0, 1)")));
        }
        Ok(Self { s, l, r, delta, dim })
    }
}

/// Self-normalized part shared by the linear and GLM radii:
/// `R √(2 log(1/δ) + d log(1 + L²W/(λd)))`.
fn noise_radius(p: &RadiusParams, lambda: f64, weight_sum: f64) -> f64 {
    let d = p.dim as f64;
    let log_term = 2.0 * (1.0 / p.delta).ln()
        + d * (1.0 + p.l * p.l * weight_sum.max(0.0) / (lambda * d)).ln();
    p.r * log_term.sqrt()
}

/// Confidence radius of the linear model,
/// `β = √λ·S + R√(2 log(1/δ) + d log(1 + L²W/(λd)))`.
pub fn lb_radius(p: &RadiusParams, lambda: f64, weight_sum: f64) -> f64 {
    lambda.sqrt() * p.s + noise_radius(p, lambda, weight_sum)
}

/// Same as [`lb_radius`] with the parameter term scaled by `c_μ`.
pub(crate) fn scaled_radius(p: &RadiusParams, lambda: f64, weight_sum: f64, c_mu: f64) -> f64 {
    lambda.sqrt() * c_mu * p.s + noise_radius(p, lambda, weight_sum)
}

/// Upper bound on `Σ_t ‖X_t‖²_{V_{t−1}⁻¹}` for discounted designs:
/// `2·max{1, L²/λ}·d·(T log(1/γ) + log(1 + L²W_T/(dλ)))`.
pub fn weighted_potential_bound(
    horizon: usize,
    gamma: f64,
    lambda: f64,
    l: f64,
    dim: usize,
    weight_sum: f64,
) -> f64 {
    let d = dim as f64;
    let drift = if gamma >= 1.0 {
        0.0
    } else {
        horizon as f64 * (1.0 / gamma).ln()
    };
    2.0 * (l * l / lambda).max(1.0) * d * (drift + (1.0 + l * l * weight_sum / (d * lambda)).ln())
}

#[cfg(any(test, feature = "oracles"))]
mod oracles {
    use super::*;
    use crate::numerics::{logdet, norm2, quad_norm, sub};

    /// Full right-hand side of the linear estimation-error bound, evaluated
    /// with the true parameter path.
    ///
    /// `design` holds rounds `1..=n`; `path` holds `θ_1..=θ_{n+1}`, the last
    /// entry being the parameter of the round about to be played. Returns
    /// `L²√(d/λ) Σ_{p=1}^{n} √(Σ_{s≤p} γ^{n−s}) ‖θ_p − θ_{p+1}‖ + β_n ‖x‖_{V_n⁻¹}`.
    pub fn coverage_bound_oracle(
        path: &[Vec<f64>],
        design: &DiscountedDesign,
        x: &[f64],
        params: &RadiusParams,
    ) -> Result<f64> {
        let n = design.rounds();
        check_dim(n + 1, path.len())?;
        check_dim(design.dim(), x.len())?;
        let bias = drift_bias(path, design, params.l)?;
        let beta = lb_radius(params, design.lambda(), design.weight_sum());
        Ok(bias + beta * quad_norm(design.matrix(), x)?)
    }

    /// Drift (bias) part of [`coverage_bound_oracle`].
    pub fn drift_bias(path: &[Vec<f64>], design: &DiscountedDesign, l: f64) -> Result<f64> {
        let n = design.rounds();
        check_dim(n + 1, path.len())?;
        let g = design.gamma();
        let d = design.dim() as f64;
        let scale = l * l * (d / design.lambda()).sqrt();
        // Σ_{s≤p} γ^{n−s} = γ^{n−p} · Σ_{j<p} γ^j
        let mut bias = 0.0;
        let mut prefix = 0.0;
        for p in 1..=n {
            prefix += g.powi((n - p) as i32);
            let jump = norm2(&sub(&path[p - 1], &path[p]));
            if jump > 0.0 {
                bias += prefix.sqrt() * jump;
            }
        }
        Ok(scale * bias)
    }

    /// `(log det V, d·log(λ + L²W/d))`; the first never exceeds the second.
    pub fn det_bound_oracle(design: &DiscountedDesign, l: f64) -> Result<(f64, f64)> {
        let d = design.dim() as f64;
        let lhs = logdet(design.matrix())?;
        let rhs = d * (design.lambda() + l * l * design.weight_sum() / d).ln();
        Ok((lhs, rhs))
    }

    /// Prefix sums `Σ_{s≤p} ‖A_s‖²_{U⁻¹}` for `U = λI + Σ_s A_s A_sᵀ`,
    /// one entry per `p`; each is at most `d`.
    pub fn trace_bound_oracle(vectors: &[Vec<f64>], lambda: f64) -> Result<Vec<f64>> {
        let dim = vectors.first().map_or(1, Vec::len);
        let mut u = SpdMatrix::scaled_identity(dim, lambda);
        for a in vectors {
            check_dim(dim, a.len())?;
            u.add_outer(a, 1.0);
        }
        let chol = u.cholesky()?;
        let mut acc = 0.0;
        vectors
            .iter()
            .map(|a| {
                acc += chol.inv_quad(a)?;
                Ok(acc)
            })
            .collect()
    }
}

#[cfg(any(test, feature = "oracles"))]
pub use oracles::{det_bound_oracle, drift_bias, coverage_bound_oracle, trace_bound_oracle};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{norm2, quad_norm};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> RadiusParams {
        RadiusParams::new(1.0, 1.0, 1.0, 0.05, 2).unwrap()
    }

    #[test]
    fn first_update_by_hand() {
        let mut d = DiscountedDesign::new(2, 0.5, 1.0).unwrap();
        d.update(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(d.matrix(), &SpdMatrix::diagonal(&[2.0, 1.0]));
        assert_eq!(d.moment(), &[1.0, 0.0]);
        assert_eq!(d.weight_sum(), 1.0);
    }

    #[test]
    fn undiscounted_updates_sum() {
        let mut d = DiscountedDesign::new(2, 1.0, 0.7).unwrap();
        let x = [0.6, -0.8];
        for _ in 0..9 {
            d.update(&x, 0.0).unwrap();
        }
        let mut expected = SpdMatrix::scaled_identity(2, 0.7);
        expected.add_outer(&x, 9.0);
        for (a, b) in d.matrix().entries().iter().zip(expected.entries()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        assert_eq!(d.weight_sum(), 9.0);
    }

    #[test]
    fn zero_arm_update_only_decays() {
        let mut d = DiscountedDesign::new(2, 0.8, 2.0).unwrap();
        d.update(&[1.0, 1.0], 3.0).unwrap();
        let before = d.clone();
        d.update(&[0.0, 0.0], 0.0).unwrap();
        let mut expected = before.matrix().clone();
        expected.scale(0.8);
        expected.add_diagonal(0.2 * 2.0);
        for (a, b) in d.matrix().entries().iter().zip(expected.entries()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
        assert_relative_eq!(d.moment()[0], 0.8 * 3.0);
    }

    #[test]
    fn dimension_mismatch() {
        let mut d = DiscountedDesign::new(3, 0.9, 1.0).unwrap();
        assert!(matches!(
            d.update(&[1.0], 0.0),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn ridge_estimate_examples() {
        let d = DiscountedDesign::new(3, 0.9, 1.0).unwrap();
        assert_eq!(d.ridge_estimate().unwrap(), vec![0.0; 3]);
        for gamma in [0.3, 0.9, 1.0] {
            let mut d = DiscountedDesign::new(3, gamma, 1.0).unwrap();
            d.update(&[1.0, 0.0, 0.0], 1.0).unwrap();
            let est = d.ridge_estimate().unwrap();
            assert_relative_eq!(est[0], 0.5, epsilon = 1e-15);
            assert_eq!(&est[1..], &[0.0, 0.0]);
        }
    }

    /// Forms `λI + Σ γ^{t−s} X_sX_sᵀ` and `Σ γ^{t−s} r_s X_s` from stored
    /// history and solves the weighted normal equations.
    fn batch_solution(hist: &[(Vec<f64>, f64)], gamma: f64, lambda: f64) -> (SpdMatrix, Vec<f64>) {
        let dim = hist[0].0.len();
        let t = hist.len();
        let mut v = SpdMatrix::scaled_identity(dim, lambda);
        let mut b = vec![0.0; dim];
        for (s, (x, r)) in hist.iter().enumerate() {
            let w = gamma.powi((t - 1 - s) as i32);
            v.add_outer(x, w);
            for (bi, xi) in b.iter_mut().zip(x) {
                *bi += w * r * xi;
            }
        }
        let theta = spd_solve(&v, &b).unwrap();
        (v, theta)
    }

    #[test]
    fn recursion_matches_batch_weighted_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut d = DiscountedDesign::new(3, 0.93, 1.5).unwrap();
        let mut hist = Vec::new();
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = rng.random_range(-2.0..2.0);
            d.update(&x, r).unwrap();
            hist.push((x, r));
        }
        let (v, theta) = batch_solution(&hist, 0.93, 1.5);
        for (a, b) in d.matrix().entries().iter().zip(v.entries()) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in d.ridge_estimate().unwrap().iter().zip(&theta) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_relative_eq!(d.weight_sum(), geometric_weight_sum(0.93, 50), epsilon = 1e-9);
    }

    #[test]
    fn minimum_eigenvalue_stays_above_lambda() {
        // V − λI = Σ γ^{t−s} XXᵀ ⪰ 0, so V − (λ − 1e-9)I must factorize.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut d = DiscountedDesign::new(4, 0.5, 0.3).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            d.update(&x, 0.0).unwrap();
            let mut shifted = d.matrix().clone();
            shifted.add_diagonal(-(0.3 - 1e-9));
            shifted.add_diagonal(1e-12);
            assert!(shifted.cholesky().is_ok());
        }
    }

    #[test]
    fn lb_radius_examples() {
        let p = RadiusParams::new(1.0, 1.0, 1.0, 0.5, 2).unwrap();
        let beta = lb_radius(&p, 2.0, 0.0);
        assert_relative_eq!(beta, 2.0_f64.sqrt() + (2.0 * 2.0_f64.ln()).sqrt(), epsilon = 1e-12);
        assert!((beta - 2.5916).abs() < 1e-4);

        let noiseless = RadiusParams::new(1.3, 1.0, 0.0, 0.5, 2).unwrap();
        assert_eq!(lb_radius(&noiseless, 4.0, 100.0), 2.0 * 1.3);

        let mut w = 0.5;
        for _ in 0..10 {
            assert!(lb_radius(&p, 2.0, 2.0 * w) > lb_radius(&p, 2.0, w));
            w *= 2.0;
        }
    }

    #[test]
    fn potential_bound_examples() {
        let undiscounted = weighted_potential_bound(100, 1.0, 2.0, 1.0, 3, 100.0);
        let expected = 2.0 * 1.0 * 3.0 * (1.0 + 100.0 / (3.0 * 2.0_f64)).ln();
        assert_relative_eq!(undiscounted, expected, epsilon = 1e-12);

        let w: f64 = (0..10).map(|s| 0.9_f64.powi(s)).sum();
        let by_hand = 2.0 * 2.0 * (10.0 * (1.0 / 0.9_f64).ln() + (1.0 + w / 2.0).ln());
        assert_relative_eq!(
            weighted_potential_bound(10, 0.9, 1.0, 1.0, 2, w),
            by_hand,
            epsilon = 1e-12
        );
        assert!(weighted_potential_bound(0, 0.5, 10.0, 0.1, 1, 0.0) >= 0.0);
    }

    #[test]
    fn coverage_oracle_constant_path() {
        let p = params();
        let mut d = DiscountedDesign::new(2, 0.9, 2.0).unwrap();
        d.update(&[0.3, 0.4], 0.1).unwrap();
        d.update(&[-0.6, 0.8], 0.2).unwrap();
        let path = vec![vec![1.0, 0.0]; 3];
        let x = [0.0, 1.0];
        let rhs = coverage_bound_oracle(&path, &d, &x, &p).unwrap();
        let expected = lb_radius(&p, 2.0, d.weight_sum()) * quad_norm(d.matrix(), &x).unwrap();
        assert_relative_eq!(rhs, expected, epsilon = 1e-14);
        assert_eq!(drift_bias(&path, &d, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn coverage_oracle_single_jump() {
        let gamma = 0.8;
        let lambda = 2.0;
        let mut d = DiscountedDesign::new(2, gamma, lambda).unwrap();
        for _ in 0..5 {
            d.update(&[1.0, 0.0], 0.0).unwrap();
        }
        // rounds n = 5, jump of size ε between θ_3 and θ_4
        let eps = 0.25;
        let mut path = vec![vec![1.0, 0.0]; 6];
        for theta in path.iter_mut().skip(3) {
            *theta = vec![1.0, eps];
        }
        let p = 3;
        let weights: f64 = (1..=p).map(|s| gamma.powi(5 - s)).sum();
        let expected = 1.0 * (2.0 / lambda).sqrt() * weights.sqrt() * eps;
        assert_relative_eq!(drift_bias(&path, &d, 1.0).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn drift_bias_shrinks_with_discount() {
        let path = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let bias = |gamma: f64| {
            let mut d = DiscountedDesign::new(2, gamma, 1.0).unwrap();
            d.update(&[1.0, 0.0], 0.0).unwrap();
            d.update(&[1.0, 0.0], 0.0).unwrap();
            drift_bias(&path, &d, 1.0).unwrap()
        };
        assert!(bias(0.5) < bias(0.9));
        assert!(bias(0.9) < bias(1.0));
    }

    #[test]
    fn coverage_oracle_rejects_wrong_path_length() {
        let d = DiscountedDesign::new(2, 0.9, 1.0).unwrap();
        assert!(coverage_bound_oracle(&[], &d, &[1.0, 0.0], &params()).is_err());
    }

    #[test]
    fn det_bound_examples() {
        let fresh = DiscountedDesign::new(3, 0.7, 2.0).unwrap();
        let (lhs, rhs) = det_bound_oracle(&fresh, 1.0).unwrap();
        assert_relative_eq!(lhs, 3.0 * 2.0_f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(rhs, lhs, epsilon = 1e-14);

        let mut one = DiscountedDesign::new(1, 1.0, 0.5).unwrap();
        one.update(&[1.5], 0.0).unwrap();
        let (lhs, rhs) = det_bound_oracle(&one, 1.5).unwrap();
        assert_relative_eq!(lhs, (0.5 + 2.25_f64).ln(), epsilon = 1e-14);
        assert_relative_eq!(rhs, lhs, epsilon = 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut d = DiscountedDesign::new(3, 0.95, 1.0).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = crate::numerics::project_ball(&x, 1.0);
            d.update(&x, 0.0).unwrap();
            let (lhs, rhs) = det_bound_oracle(&d, 1.0).unwrap();
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn trace_bound_prefix_sums_at_most_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let vs: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let sums = trace_bound_oracle(&vs, 0.1).unwrap();
        assert!(sums.windows(2).all(|w| w[1] >= w[0]));
        assert!(*sums.last().unwrap() <= 3.0 + 1e-9);
        assert!(norm2(&vs[0]) > 0.0);
    }
}
