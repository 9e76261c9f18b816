use serde::{Deserialize, Serialize};

use super::dists::VisitationDistributions;
use super::rollout::Rollout;
use crate::geo_mapping::{visible_cells, MapGeometry, Pose};
use crate::sim_env::Action;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub visit: f64,
    pub stop: f64,
    pub explore: f64,
    pub action: f64,
    pub step: f64,
    /// Radius for the stop term, meters.
    pub stop_radius: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            visit: 0.3,
            stop: 0.5,
            explore: 1.0,
            action: 0.3,
            step: 0.04,
            stop_radius: 0.47,
        }
    }
}

impl RewardWeights {
    pub fn zero() -> Self {
        RewardWeights {
            visit: 0.0,
            stop: 0.0,
            explore: 0.0,
            action: 0.0,
            step: 0.0,
            stop_radius: 0.47,
        }
    }
}

/// Per-term sums, already weighted; `total` is their signed sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReturnBreakdown {
    pub visit: f64,
    pub stop: f64,
    pub explore: f64,
    pub action: f64,
    pub step: f64,
    pub total: f64,
}

/// Weighted reward terms of every step under fixed distributions. Visiting
/// pays the path mass of cells entered for the first time; stopping pays the
/// stop mass near the stop position; exploring pays the fraction of
/// `obs_geom` cells seen for the first time; clamped commands and every step
/// cost.
pub fn step_rewards(rollout: &Rollout, dists: &VisitationDistributions, weights: &RewardWeights, obs_geom: &MapGeometry) -> Vec<ReturnBreakdown> {
    let geom = dists.geometry();
    let mut visited = vec![false; geom.size * geom.size];
    let (sx, sy) = geom.clamped_cell_of(rollout.start.x, rollout.start.y);
    visited[sy * geom.size + sx] = true;
    let mut observed = visible_cells(&Pose::ground(rollout.start.x, rollout.start.y, rollout.start.yaw), obs_geom);
    let n_obs = (obs_geom.size * obs_geom.size) as f64;
    let mut out = Vec::with_capacity(rollout.steps.len());
    for s in &rollout.steps {
        let mut r = ReturnBreakdown::default();
        let (ix, iy) = geom.clamped_cell_of(s.x, s.y);
        let k = iy * geom.size + ix;
        if !visited[k] {
            visited[k] = true;
            r.visit = weights.visit * dists.path.grid.get(ix, iy);
        }
        if s.action == Action::Stop {
            r.stop = weights.stop * dists.goal.mass_within(&geom, s.x, s.y, weights.stop_radius);
        }
        let seen = visible_cells(&Pose::ground(s.x, s.y, s.yaw), obs_geom);
        let mut fresh = 0usize;
        for (o, v) in observed.data_mut().iter_mut().zip(seen.data()) {
            if *v > 0.0 && *o == 0.0 {
                *o = 1.0;
                fresh += 1;
            }
        }
        r.explore = weights.explore * fresh as f64 / n_obs;
        if s.clamped {
            r.action = weights.action;
        }
        r.step = weights.step;
        r.total = r.visit + r.stop + r.explore - r.action - r.step;
        out.push(r);
    }
    out
}

/// Undiscounted episode return: the per-term sums of [`step_rewards`].
pub fn intrinsic_return(rollout: &Rollout, dists: &VisitationDistributions, weights: &RewardWeights, obs_geom: &MapGeometry) -> ReturnBreakdown {
    let mut out = ReturnBreakdown::default();
    for r in step_rewards(rollout, dists, weights, obs_geom) {
        out.visit += r.visit;
        out.stop += r.stop;
        out.explore += r.explore;
        out.action += r.action;
        out.step += r.step;
    }
    out.total = out.visit + out.stop + out.explore - out.action - out.step;
    out
}
