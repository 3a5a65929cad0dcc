//! Differential-drive kinematics and the closed-loop simulator.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::boundary::{polar_angle, BoundaryModel};
use crate::guidance::{
    escape_control, field_from_error, reference_from_field, tracking_error, GuidanceError, GuidanceParams,
};
use crate::safety::{barrier_value, synthesize, CbfParams, Obstacle, SafetyError};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotGeometry {
    /// Off-axis distance of the controlled point.
    pub l: f64,
    /// Half the wheel separation.
    pub d: f64,
    /// Radius of the robot's enclosing circle.
    pub r_b: f64,
    /// Maximum wheel speed.
    pub v_m: f64,
}

impl RobotGeometry {
    pub fn validate(&self) -> Result<(), String> {
        for (v, name) in [(self.l, "l"), (self.d, "d"), (self.v_m, "v_m")] {
            if !(v > 0.0) {
                return Err(format!("robot {name} must be positive, got {v}"));
            }
        }
        if !(self.r_b >= 0.0) {
            return Err(format!("robot r_b must be non-negative, got {}", self.r_b));
        }
        Ok(())
    }
}

/// Normalizes a heading into `(-π, π]`.
pub fn normalize_heading(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// Wheel-axle center.
    pub p: Vec2,
    pub theta: f64,
}

impl RobotState {
    pub fn new(p: Vec2, theta: f64) -> Self {
        RobotState {
            p,
            theta: normalize_heading(theta),
        }
    }

    /// Controlled point `p + l (cos θ, sin θ)`.
    pub fn off_axis(&self, l: f64) -> Vec2 {
        self.p + l * Vec2::new(self.theta.cos(), self.theta.sin())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlCommand {
    /// Cartesian velocity of the off-axis point.
    pub u: Vec2,
    pub v: f64,
    pub omega: f64,
    pub v_left: f64,
    pub v_right: f64,
    pub modified: bool,
    pub active_set: Vec<usize>,
}

impl ControlCommand {
    /// `(v, ω) = R(θ)^{-1} u`, then wheel speeds `v ∓ d ω`. The stored
    /// `(v, ω)` are recomputed from the wheels so the wheel relations hold
    /// exactly; `u` agrees with `R(θ)(v, ω)` to rounding.
    pub fn from_cartesian(u: Vec2, theta: f64, geom: &RobotGeometry) -> Self {
        let (s, c) = theta.sin_cos();
        let v = c * u.x + s * u.y;
        let omega = (-s * u.x + c * u.y) / geom.l;
        let (v_left, v_right) = (v - geom.d * omega, v + geom.d * omega);
        ControlCommand {
            u,
            v: 0.5 * (v_left + v_right),
            omega: (v_right - v_left) / (2.0 * geom.d),
            v_left,
            v_right,
            modified: false,
            active_set: Vec::new(),
        }
    }

    /// `v = (v_L + v_R) / 2`, `ω = (v_R - v_L) / 2d`, `u = R(θ) (v, ω)`.
    pub fn from_wheels(v_left: f64, v_right: f64, theta: f64, geom: &RobotGeometry) -> Self {
        let v = 0.5 * (v_left + v_right);
        let omega = (v_right - v_left) / (2.0 * geom.d);
        let (s, c) = theta.sin_cos();
        let u = Vec2::new(c * v - geom.l * s * omega, s * v + geom.l * c * omega);
        ControlCommand {
            u,
            v,
            omega,
            v_left,
            v_right,
            modified: false,
            active_set: Vec::new(),
        }
    }

    pub fn stop() -> Self {
        ControlCommand::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub obstacles: Vec<Obstacle>,
    pub boundary: BoundaryModel,
}

impl World {
    /// Smallest `|x - x_o| - r_o` over all obstacles; infinite with none.
    pub fn min_clearance(&self, x: Vec2) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.clearance(x))
            .fold(f64::INFINITY, f64::min)
    }
}

fn unicycle(theta: f64, v: f64, omega: f64) -> [f64; 3] {
    [v * theta.cos(), v * theta.sin(), omega]
}

/// Classical RK4 step of the unicycle with `(v, ω)` held over `dt`.
pub fn step(state: &RobotState, cmd: &ControlCommand, dt: f64) -> RobotState {
    let (v, w) = (cmd.v, cmd.omega);
    let k1 = unicycle(state.theta, v, w);
    let k2 = unicycle(state.theta + 0.5 * dt * k1[2], v, w);
    let k3 = unicycle(state.theta + 0.5 * dt * k2[2], v, w);
    let k4 = unicycle(state.theta + dt * k3[2], v, w);
    let inc = |i: usize| dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    RobotState::new(
        state.p + Vec2::new(inc(0), inc(1)),
        state.theta + inc(2),
    )
}

/// What produced the reference control at a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    Field,
    /// Critical point or reference-point singularity; escape velocity used.
    Escape,
    /// Controller halted after an infeasible QP.
    Stopped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub state: RobotState,
    /// Off-axis point.
    pub x: Vec2,
    pub command: ControlCommand,
    /// Tracking error as fed to the field (NaN when it could not be computed).
    pub e: f64,
    pub min_clearance: f64,
    /// `usize::MAX` when no segment could be evaluated.
    pub segment_id: usize,
    pub qp_modified: bool,
    pub infeasible: bool,
    pub reference: ReferenceKind,
    /// Reference control before filtering.
    pub u_ref: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub guidance: GuidanceParams,
    pub cbf: CbfParams,
    pub geometry: RobotGeometry,
    pub initial: RobotState,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
}

fn escape_seed(seed: u64, k: u64) -> u64 {
    // splitmix64 finalizer over (seed, step)
    let mut z = seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the closed loop from `t = 0` to `t_end`, one record per control step.
///
/// Each step evaluates the tracking error and field at the off-axis point,
/// normalizes it into the reference control (or applies a seeded escape
/// velocity at critical points), filters it through the CBF-QP and integrates
/// the kinematics. An infeasible QP stops the robot for the rest of the run.
pub fn run(world: &World, cfg: &SimConfig) -> Vec<StepRecord> {
    let steps = (cfg.t_end / cfg.dt).round() as u64;
    let mut records = Vec::with_capacity(steps as usize + 1);
    let mut state = cfg.initial;
    let mut halted = false;
    let geom = &cfg.geometry;
    if world
        .obstacles
        .iter()
        .any(|o| barrier_value(state.off_axis(geom.l), o) < 0.0)
    {
        log::warn!("initial state lies inside an inflated obstacle");
    }
    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let x = state.off_axis(geom.l);
        let te = tracking_error(x, &world.boundary, &cfg.guidance);
        let (e, segment_id) = match &te {
            Ok(te) => (te.e, te.segment_id),
            Err(_) => (f64::NAN, world.boundary.select(x).unwrap_or(usize::MAX)),
        };
        let (u_ref, mut reference) = match te {
            Ok(te) => {
                let f = field_from_error(&te, &cfg.guidance);
                match reference_from_field(&f, x, &cfg.guidance) {
                    Ok(u) => (u, ReferenceKind::Field),
                    Err(_) => (escape_control(&cfg.guidance, escape_seed(cfg.seed, k)), ReferenceKind::Escape),
                }
            }
            Err(GuidanceError::Boundary(_)) | Err(GuidanceError::CriticalPoint(..)) => {
                (escape_control(&cfg.guidance, escape_seed(cfg.seed, k)), ReferenceKind::Escape)
            }
        };

        let command = if halted {
            reference = ReferenceKind::Stopped;
            ControlCommand::stop()
        } else {
            match synthesize(&state, u_ref, world, &cfg.cbf, geom) {
                Ok(c) => c,
                Err(SafetyError::Infeasible) | Err(SafetyError::DegenerateGeometry(_)) => {
                    log::warn!("QP infeasible at t = {t:.3}; stopping in place");
                    halted = true;
                    reference = ReferenceKind::Stopped;
                    ControlCommand::stop()
                }
            }
        };

        records.push(StepRecord {
            t,
            state,
            x,
            qp_modified: command.modified,
            infeasible: halted,
            min_clearance: world.min_clearance(x),
            command,
            e,
            segment_id,
            reference,
            u_ref,
        });
        if k < steps {
            let cmd = &records.last().expect("just pushed").command;
            state = step(&state, cmd, cfg.dt);
        }
    }
    records
}

/// Aggregate figures over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub converged: bool,
    /// First time with `|e| <` the threshold.
    pub time_to_converge: Option<f64>,
    pub min_clearance_overall: f64,
    pub max_wheel_speed: f64,
    /// Full turns of the off-axis point about the lap center.
    pub laps: f64,
    pub escape_steps: usize,
    pub infeasible_at: Option<f64>,
    pub modified_fraction: f64,
}

/// Net signed angle swept by the off-axis points about `center`, in turns.
pub fn laps_about(records: &[StepRecord], center: Vec2) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for r in records {
        if let Ok(a) = polar_angle(r.x, center) {
            if let Some(p) = prev {
                let mut d = a - p;
                if d > PI {
                    d -= 2.0 * PI;
                } else if d < -PI {
                    d += 2.0 * PI;
                }
                total += d;
            }
            prev = Some(a);
        }
    }
    total / (2.0 * PI)
}

pub fn summarize(records: &[StepRecord], lap_center: Vec2, threshold: f64) -> RunSummary {
    let time_to_converge = records.iter().find(|r| r.e.abs() < threshold).map(|r| r.t);
    let n = records.len().max(1) as f64;
    RunSummary {
        converged: time_to_converge.is_some(),
        time_to_converge,
        min_clearance_overall: records.iter().map(|r| r.min_clearance).fold(f64::INFINITY, f64::min),
        max_wheel_speed: records
            .iter()
            .map(|r| r.command.v_left.abs().max(r.command.v_right.abs()))
            .fold(0.0, f64::max),
        laps: laps_about(records, lap_center),
        escape_steps: records.iter().filter(|r| r.reference == ReferenceKind::Escape).count(),
        infeasible_at: records.iter().find(|r| r.infeasible).map(|r| r.t),
        modified_fraction: records.iter().filter(|r| r.qp_modified).count() as f64 / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn geom() -> RobotGeometry {
        RobotGeometry {
            l: 0.01,
            d: 0.3,
            r_b: 0.0,
            v_m: 0.3,
        }
    }

    fn cmd(v: f64, omega: f64) -> ControlCommand {
        ControlCommand {
            v,
            omega,
            ..ControlCommand::default()
        }
    }

    #[test]
    fn straight_line() {
        let s = step(&RobotState::new(Vec2::zeros(), 0.0), &cmd(1.0, 0.0), 0.1);
        assert!((s.p.x - 0.1).abs() < 1e-15);
        assert_eq!(s.p.y, 0.0);
        assert_eq!(s.theta, 0.0);
    }

    #[test]
    fn pure_rotation() {
        let s = step(&RobotState::new(Vec2::new(1.0, 2.0), 0.0), &cmd(0.0, PI), 1.0);
        assert_eq!(s.p, Vec2::new(1.0, 2.0));
        assert!((s.theta.abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn heading_normalization() {
        assert!((normalize_heading(PI) - PI).abs() < 1e-15);
        assert!((normalize_heading(-PI) - PI).abs() < 1e-15);
        assert!((normalize_heading(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((normalize_heading(TAU + 0.25) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn wheel_relations() {
        let g = geom();
        let c = ControlCommand::from_cartesian(Vec2::new(0.1, 0.002), 0.3, &g);
        assert!((0.5 * (c.v_left + c.v_right) - c.v).abs() < 1e-15);
        assert!(((c.v_right - c.v_left) / (2.0 * g.d) - c.omega).abs() < 1e-12);
        let back = ControlCommand::from_wheels(c.v_left, c.v_right, 0.3, &g);
        assert!((back.u - c.u).norm() < 1e-15);
    }

    #[test]
    fn off_axis_point() {
        let s = RobotState::new(Vec2::new(1.0, 1.0), PI / 2.0);
        assert!((s.off_axis(0.5) - Vec2::new(1.0, 1.5)).norm() < 1e-15);
    }

    #[test]
    fn laps_counting() {
        let recs: Vec<StepRecord> = (0..=200)
            .map(|i| {
                let a = 2.0 * TAU * i as f64 / 200.0;
                StepRecord {
                    t: i as f64,
                    state: RobotState::new(Vec2::zeros(), 0.0),
                    x: Vec2::new(a.cos(), a.sin()),
                    command: ControlCommand::stop(),
                    e: 0.0,
                    min_clearance: f64::INFINITY,
                    segment_id: 0,
                    qp_modified: false,
                    infeasible: false,
                    reference: ReferenceKind::Field,
                    u_ref: Vec2::zeros(),
                }
            })
            .collect();
        assert!((laps_about(&recs, Vec2::zeros()) - 2.0).abs() < 1e-12);
    }
}
