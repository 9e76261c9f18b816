use serde::{Deserialize, Serialize};

use super::dists::VisitationDistributions;
use crate::sim_env::{Action, AgentState, Kinematics};
use crate::util::wrap_angle;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub k_omega: f64,
    /// Minimum carrot distance, meters.
    pub lookahead: f64,
    /// Path cells at or above this fraction of the peak count as on-path.
    pub high_mass: f64,
    /// Stop when the agent's cell holds this fraction of the stop peak.
    pub stop_ratio: f64,
    pub stop_radius: f64,
    /// Stop when the stop mass within `stop_radius` exceeds this.
    pub stop_mass: f64,
    pub kinematics: Kinematics,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            k_omega: 1.5,
            lookahead: 0.5,
            high_mass: 0.3,
            stop_ratio: 0.9,
            stop_radius: 0.47,
            stop_mass: 0.5,
            kinematics: Kinematics::default(),
        }
    }
}

fn goal_point(dists: &VisitationDistributions) -> (f64, f64) {
    let (gx, gy) = dists.goal.grid.argmax();
    dists.geometry().cell_center(gx, gy)
}

/// Carrot point: among on-path cells at least `lookahead` away that are
/// closer to the goal than the agent, take the nearest ring (one cell
/// diagonal wide) and pick its highest-mass cell. The goal itself when no
/// such cell is left.
pub fn carrot(state: &AgentState, dists: &VisitationDistributions, cfg: &ControllerConfig) -> (f64, f64) {
    let geom = dists.geometry();
    let goal = goal_point(dists);
    let dist = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
    let here = state.position();
    let to_goal = dist(here, goal);
    let floor = cfg.high_mass * dists.path.grid.max_value();
    if floor <= 0.0 {
        return goal;
    }
    // (center, mass, distance to agent, distance to goal)
    let mut cands = Vec::new();
    for iy in 0..geom.size {
        for ix in 0..geom.size {
            let m = dists.path.grid.get(ix, iy);
            if m < floor {
                continue;
            }
            let c = geom.cell_center(ix, iy);
            let (d, dg) = (dist(here, c), dist(c, goal));
            if d >= cfg.lookahead && dg < to_goal {
                cands.push((c, m, d, dg));
            }
        }
    }
    let Some(nearest) = cands.iter().map(|c| c.2).min_by(f64::total_cmp) else {
        return goal;
    };
    let ring = nearest + geom.cell_size() * std::f64::consts::SQRT_2;
    cands
        .into_iter()
        .filter(|c| c.2 < ring)
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.3.total_cmp(&a.3)).then(b.2.total_cmp(&a.2)))
        .map_or(goal, |c| c.0)
}

/// Whether the stop rule fires at the agent's position.
pub fn should_stop(state: &AgentState, dists: &VisitationDistributions, cfg: &ControllerConfig) -> bool {
    if dists.goal.is_degenerate() {
        return true;
    }
    let geom = dists.geometry();
    let (ix, iy) = geom.clamped_cell_of(state.x, state.y);
    if dists.goal.grid.get(ix, iy) >= cfg.stop_ratio * dists.goal.grid.max_value() {
        return true;
    }
    dists.goal.mass_within(&geom, state.x, state.y, cfg.stop_radius) > cfg.stop_mass
}

/// Deterministic distribution follower: chase the carrot with
/// `omega = k * err`, `v = v_max * max(0, cos err)`, or stop.
pub fn follow_controller(state: &AgentState, dists: &VisitationDistributions, cfg: &ControllerConfig) -> Result<Action> {
    dists.validate()?;
    if should_stop(state, dists, cfg) {
        return Ok(Action::Stop);
    }
    let (tx, ty) = carrot(state, dists, cfg);
    let err = wrap_angle((ty - state.y).atan2(tx - state.x) - state.yaw);
    let k = &cfg.kinematics;
    Ok(Action::Move {
        v: k.v_max * err.cos().max(0.0),
        omega: (cfg.k_omega * err).clamp(-k.omega_max, k.omega_max),
    })
}
