//! Discounted ("weighted") learners for non-stationary parametric bandits
//! and episodic MDPs, with drifting synthetic environments and dynamic
//! regret accounting.
//!
//! Module map:
//!
//! - [`numerics`]: Cholesky-based SPD algebra.
//! - [`design`]: discounted design matrix, ridge estimate, radii, oracles.
//! - [`lb`]: discounted linear UCB and its static/restart baselines.
//! - [`glm`]: generalized-linear and self-concordant learners.
//! - [`env`]: parameter paths, arm sets, reward models, regret.
//! - [`bob`]: bandits-over-bandits tuning of the discount.
//! - [`mdp`]: linear-mixture and MNL-mixture episodic MDPs.
//! - [`harness`]: experiment configuration, trial runner, CSV/JSON output.

pub mod bandit;
pub mod bob;
pub mod design;
pub mod env;
pub mod error;
pub mod glm;
pub mod harness;
pub mod lb;
pub mod link;
pub mod mdp;
pub mod numerics;
#[cfg(feature = "oracles")]
pub mod selftest;
pub mod solver;

pub use bandit::{argmax_lowest, simulate_bandit, BanditLearner, BanditOutcome};
pub use design::{DiscountedDesign, RadiusParams};
pub use env::{ArmSet, BanditEnv, ParameterPath, RewardModel};
pub use error::{Error, Result};
pub use glm::{GlmLearner, GlmVariant};
pub use harness::{ExperimentConfig, RegretTrace, Task};
pub use lb::{Forgetting, LbLearner};
pub use link::{LinkKind, LinkModel};
pub use numerics::SpdMatrix;
