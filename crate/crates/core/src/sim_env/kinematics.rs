use serde::{Deserialize, Serialize};

use crate::geo_mapping::{Pose, ENV_EDGE};
use crate::util::wrap_angle;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub v_max: f64,
    pub omega_max: f64,
    pub dt: f64,
    pub edge: f64,
}

impl Default for Kinematics {
    fn default() -> Self {
        Kinematics {
            v_max: 0.7,
            omega_max: 1.0,
            dt: 0.1,
            edge: ENV_EDGE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    /// New setpoint: forward velocity (m/s) and yaw rate (rad/s).
    Move { v: f64, omega: f64 },
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub v: f64,
    pub omega: f64,
    pub t: f64,
    pub steps: usize,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub state: AgentState,
    /// The requested setpoint exceeded a limit.
    pub clamped: bool,
}

impl AgentState {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        AgentState {
            x,
            y,
            yaw,
            v: 0.0,
            omega: 0.0,
            t: 0.0,
            steps: 0,
            terminal: false,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::ground(self.x, self.y, self.yaw)
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    /// Unicycle update: yaw first, then position along the new heading.
    pub fn step(&self, action: Action, k: &Kinematics) -> Result<StepResult> {
        if self.terminal {
            return Err(Error::Terminal);
        }
        let mut next = *self;
        next.steps += 1;
        next.t += k.dt;
        match action {
            Action::Stop => {
                next.v = 0.0;
                next.omega = 0.0;
                next.terminal = true;
                Ok(StepResult {
                    state: next,
                    clamped: false,
                })
            }
            Action::Move { v, omega } => {
                let v_in = if v.is_finite() { v } else { 0.0 };
                let w_in = if omega.is_finite() { omega } else { 0.0 };
                let v_c = v_in.clamp(-k.v_max, k.v_max);
                let w_c = w_in.clamp(-k.omega_max, k.omega_max);
                let clamped = v_c != v || w_c != omega;
                next.v = v_c;
                next.omega = w_c;
                next.yaw = wrap_angle(self.yaw + w_c * k.dt);
                next.x = (self.x + v_c * k.dt * next.yaw.cos()).clamp(0.0, k.edge);
                next.y = (self.y + v_c * k.dt * next.yaw.sin()).clamp(0.0, k.edge);
                Ok(StepResult { state: next, clamped })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn straight_line_closed_form() {
        let k = Kinematics::default();
        let mut s = AgentState::new(0.0, 0.0, 0.0);
        for _ in 0..10 {
            s = s.step(Action::Move { v: 0.7, omega: 0.0 }, &k).unwrap().state;
        }
        assert!((s.x - 0.7).abs() < 1e-12);
        assert_eq!(s.y, 0.0);
    }

    #[test]
    fn pure_rotation() {
        let k = Kinematics {
            omega_max: PI,
            ..Kinematics::default()
        };
        let mut s = AgentState::new(1.0, 2.0, 0.0);
        for _ in 0..10 {
            s = s.step(Action::Move { v: 0.0, omega: PI }, &k).unwrap().state;
        }
        assert!((wrap_angle(s.yaw - PI)).abs() < 1e-9);
        assert_eq!((s.x, s.y), (1.0, 2.0));
    }

    #[test]
    fn stop_is_terminal() {
        let k = Kinematics::default();
        let s = AgentState::new(1.0, 1.0, 0.0).step(Action::Stop, &k).unwrap().state;
        assert!(s.terminal);
        assert!(matches!(s.step(Action::Move { v: 0.1, omega: 0.0 }, &k), Err(Error::Terminal)));
    }

    #[test]
    fn clamping_is_flagged() {
        let k = Kinematics::default();
        let r = AgentState::new(1.0, 1.0, 0.0)
            .step(Action::Move { v: 2.0, omega: -3.0 }, &k)
            .unwrap();
        assert!(r.clamped);
        assert_eq!((r.state.v, r.state.omega), (0.7, -1.0));
        let r = AgentState::new(1.0, 1.0, 0.0)
            .step(Action::Move { v: 0.3, omega: 0.2 }, &k)
            .unwrap();
        assert!(!r.clamped);
    }

    #[test]
    fn circle_radius() {
        let k = Kinematics {
            dt: 0.01,
            edge: 100.0,
            ..Kinematics::default()
        };
        let (v, w) = (0.5, 0.8);
        let mut s = AgentState::new(50.0, 50.0, 0.0);
        let mut pts = Vec::new();
        for _ in 0..1000 {
            s = s.step(Action::Move { v, omega: w }, &k).unwrap().state;
            pts.push((s.x, s.y));
        }
        // Fit the circumcircle of three well-separated samples.
        let (a, b, c) = (pts[0], pts[333], pts[666]);
        let d = 2.0 * (a.0 * (b.1 - c.1) + b.0 * (c.1 - a.1) + c.0 * (a.1 - b.1));
        let sq = |p: (f64, f64)| p.0 * p.0 + p.1 * p.1;
        let ux = (sq(a) * (b.1 - c.1) + sq(b) * (c.1 - a.1) + sq(c) * (a.1 - b.1)) / d;
        let uy = (sq(a) * (c.0 - b.0) + sq(b) * (a.0 - c.0) + sq(c) * (b.0 - a.0)) / d;
        let want = v / w;
        for p in pts {
            let r = (p.0 - ux).hypot(p.1 - uy);
            assert!((r - want).abs() / want < 0.01, "{r} vs {want}");
        }
    }
}
