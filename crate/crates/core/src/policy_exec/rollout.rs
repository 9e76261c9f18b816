use serde::{Deserialize, Serialize};

use super::controller::{follow_controller, ControllerConfig};
use super::dists::VisitationDistributions;
use crate::sim_env::{Action, AgentState};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutStep {
    pub action: Action,
    /// Pose after the action.
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub start: AgentState,
    pub steps: Vec<RolloutStep>,
}

impl Rollout {
    pub fn new(start: AgentState) -> Self {
        Rollout { start, steps: Vec::new() }
    }

    /// Start position followed by every post-step position.
    pub fn positions(&self) -> Vec<[f64; 2]> {
        std::iter::once([self.start.x, self.start.y]).chain(self.steps.iter().map(|s| [s.x, s.y])).collect()
    }

    pub fn final_position(&self) -> [f64; 2] {
        self.steps.last().map_or([self.start.x, self.start.y], |s| [s.x, s.y])
    }

    pub fn stopped(&self) -> bool {
        matches!(self.steps.last(), Some(RolloutStep { action: Action::Stop, .. }))
    }

    /// Apply one action and record it.
    pub fn push(&mut self, state: &AgentState, action: Action, cfg: &ControllerConfig) -> Result<AgentState> {
        let r = state.step(action, &cfg.kinematics)?;
        self.steps.push(RolloutStep {
            action,
            x: r.state.x,
            y: r.state.y,
            yaw: r.state.yaw,
            clamped: r.clamped,
        });
        Ok(r.state)
    }
}

/// Run the follower for at most `max_steps`, asking `predict` for fresh
/// distributions before every step.
pub fn run_rollout(
    start: AgentState,
    max_steps: usize,
    cfg: &ControllerConfig,
    mut predict: impl FnMut(&AgentState, usize) -> Result<VisitationDistributions>,
) -> Result<Rollout> {
    let mut rollout = Rollout::new(start);
    let mut state = start;
    for t in 0..max_steps {
        let dists = predict(&state, t)?;
        let action = follow_controller(&state, &dists, cfg)?;
        state = rollout.push(&state, action, cfg)?;
        if state.terminal {
            break;
        }
    }
    Ok(rollout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo_mapping::ENV_EDGE;
    use crate::policy_exec::dists::{gold_distributions, DEFAULT_SIGMA};

    #[test]
    fn reaches_and_stops() {
        let d = gold_distributions(&[[1.0, 1.0], [3.5, 2.5]], DEFAULT_SIGMA, ENV_EDGE).unwrap();
        let start = AgentState::new(1.0, 1.0, 0.3);
        let r = run_rollout(start, 300, &ControllerConfig::default(), |_, _| Ok(d.clone())).unwrap();
        assert!(r.stopped());
        let [x, y] = r.final_position();
        assert!((x - 3.5).hypot(y - 2.5) < 0.47);
        assert_eq!(r.positions().len(), r.steps.len() + 1);
    }

    #[test]
    fn step_budget_respected() {
        let d = gold_distributions(&[[1.0, 1.0], [4.0, 4.0]], DEFAULT_SIGMA, ENV_EDGE).unwrap();
        let r = run_rollout(AgentState::new(1.0, 1.0, 0.0), 5, &ControllerConfig::default(), |_, _| Ok(d.clone())).unwrap();
        assert_eq!(r.steps.len(), 5);
        assert!(!r.stopped());
    }
}
