//! Task metrics (success rate, trajectory EMD) and experiment runs.

mod experiment;
mod metrics;
mod report;

pub use experiment::{
    load_resources, run_episode, run_experiment, run_episodes, EpisodeOutcome, EpisodeResult, ExperimentConfig, ExperimentSummary,
    PoolChoice, PredictorKind, Resources, RolloutRecord,
};
pub use metrics::{emd, emd_points, hungarian, resample, success_rate, success_rate_at, EMD_POINTS, SUCCESS_THRESHOLD};
pub use report::{summarize, trajectories_svg, histogram_svg, write_report};
