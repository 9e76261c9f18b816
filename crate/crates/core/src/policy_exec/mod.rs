//! Two-stage execution: a visitation predictor and a distribution follower,
//! with the KL loss and intrinsic return as evaluators.

mod controller;
mod dists;
mod predictor;
mod reward;
mod rollout;

pub use controller::{carrot, follow_controller, should_stop, ControllerConfig};
pub use dists::{
    gaussian_at, gaussian_blur, gold_distributions, kl_loss, rasterize, visitation_geometry, CellDistribution,
    VisitationDistributions, DEFAULT_SIGMA, KL_EPS, VISITATION_SIZE,
};
pub use predictor::{goal_cell, goal_keywords, heuristic_predictor, PredictorConfig, RELATION_KEYWORDS};
pub use reward::{intrinsic_return, step_rewards, ReturnBreakdown, RewardWeights};
pub use rollout::{run_rollout, Rollout, RolloutStep};
