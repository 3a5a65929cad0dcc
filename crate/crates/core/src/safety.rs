//! CBF-QP safety filter.
//!
//! The reference control is replaced by its Euclidean projection onto the
//! polygon cut out by one barrier row per obstacle and four wheel-speed rows.
//! With two decision variables the projection is found exactly by checking
//! the unconstrained point, the projection onto every constraint line and
//! every pairwise line intersection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{ControlCommand, RobotGeometry, RobotState, World};
use crate::Vec2;

/// Slack tolerance for feasibility, in the units of each row.
pub const FEAS_TOL: f64 = 1e-9;
/// Tolerance for calling a row active at the solution.
const ACTIVE_TOL: f64 = 1e-9;
/// `u` counts as modified when it moves farther than this from `u_r`.
const MODIFIED_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SafetyError {
    #[error("safety and input constraints admit no control")]
    Infeasible,
    #[error("off-axis distance l must be positive, got {0}")]
    DegenerateGeometry(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    pub raw_radius: f64,
    pub inflated_radius: f64,
}

impl Obstacle {
    /// Obstacle with its radius grown by the robot's enclosing radius `r_b`.
    pub fn new(center: Vec2, raw_radius: f64, r_b: f64) -> Self {
        Obstacle {
            center,
            raw_radius,
            inflated_radius: raw_radius + r_b,
        }
    }

    pub fn clearance(&self, x: Vec2) -> f64 {
        (x - self.center).norm() - self.inflated_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbfParams {
    pub alpha: f64,
}

/// `a · u >= b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpace {
    pub a: Vec2,
    pub b: f64,
}

impl HalfSpace {
    pub fn slack(&self, u: Vec2) -> f64 {
        self.a.dot(&u) - self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub u_r: Vec2,
    pub halfspaces: Vec<HalfSpace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: Vec2,
    pub active_set: Vec<usize>,
    pub modified: bool,
}

/// `h(x) = |x - x_o|^2 - r_o^2`.
pub fn barrier_value(x: Vec2, obs: &Obstacle) -> f64 {
    (x - obs.center).norm_squared() - obs.inflated_radius * obs.inflated_radius
}

/// One row `2 (x - x_o) · u >= -alpha h(x)` per obstacle, in input order.
pub fn obstacle_rows(x: Vec2, obstacles: &[Obstacle], params: &CbfParams) -> Vec<HalfSpace> {
    obstacles
        .iter()
        .map(|o| HalfSpace {
            a: 2.0 * (x - o.center),
            b: -params.alpha * barrier_value(x, o),
        })
        .collect()
}

/// `R(theta)^{-1}`, mapping Cartesian off-axis velocity to `(v, omega)`.
pub fn inverse_input_map(theta: f64, l: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, s], [-s / l, c / l]]
}

/// Wheel-speed limits `-v_m <= A R^{-1} u <= v_m`, expanded into four rows:
/// right wheel upper/lower, then left wheel upper/lower.
pub fn input_rows(theta: f64, geom: &RobotGeometry) -> Result<Vec<HalfSpace>, SafetyError> {
    if !(geom.l > 0.0) {
        return Err(SafetyError::DegenerateGeometry(geom.l));
    }
    let m = inverse_input_map(theta, geom.l);
    // v_R = v + d w, v_L = v - d w
    let right = Vec2::new(m[0][0] + geom.d * m[1][0], m[0][1] + geom.d * m[1][1]);
    let left = Vec2::new(m[0][0] - geom.d * m[1][0], m[0][1] - geom.d * m[1][1]);
    Ok(vec![
        HalfSpace { a: -right, b: -geom.v_m },
        HalfSpace { a: right, b: -geom.v_m },
        HalfSpace { a: -left, b: -geom.v_m },
        HalfSpace { a: left, b: -geom.v_m },
    ])
}

fn feasible(rows: &[HalfSpace], u: Vec2) -> bool {
    rows.iter().all(|r| r.slack(u) >= -FEAS_TOL)
}

/// Exact Euclidean projection of `u_r` onto `{u : a_i · u >= b_i}`.
pub fn solve_qp(prob: &QpProblem) -> Result<QpSolution, SafetyError> {
    let rows = &prob.halfspaces;
    let u_r = prob.u_r;
    let finish = |u: Vec2| {
        let active_set = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.slack(u).abs() <= ACTIVE_TOL * r.a.norm().max(1.0))
            .map(|(i, _)| i)
            .collect();
        QpSolution {
            u,
            active_set,
            modified: (u - u_r).norm() > MODIFIED_TOL,
        }
    };
    if feasible(rows, u_r) {
        return Ok(finish(u_r));
    }

    let mut best: Option<(f64, Vec2)> = None;
    let mut consider = |u: Vec2| {
        if !(u.x.is_finite() && u.y.is_finite()) || !feasible(rows, u) {
            return;
        }
        let d = (u - u_r).norm_squared();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, u));
        }
    };

    for r in rows {
        let nn = r.a.norm_squared();
        if nn > 0.0 {
            consider(u_r + r.a * ((r.b - r.a.dot(&u_r)) / nn));
        }
    }
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let (p, q) = (&rows[i], &rows[j]);
            let det = p.a.x * q.a.y - p.a.y * q.a.x;
            let scale = p.a.norm() * q.a.norm();
            if det.abs() <= 1e-14 * scale {
                continue;
            }
            let u = Vec2::new(
                (p.b * q.a.y - p.a.y * q.b) / det,
                (p.a.x * q.b - p.b * q.a.x) / det,
            );
            consider(u);
        }
    }
    best.map(|(_, u)| finish(u)).ok_or(SafetyError::Infeasible)
}

/// Filters `u_r` through the obstacle and wheel-speed constraints and maps the
/// result to wheel space.
pub fn synthesize(
    state: &RobotState,
    u_r: Vec2,
    world: &World,
    cbf: &CbfParams,
    geom: &RobotGeometry,
) -> Result<ControlCommand, SafetyError> {
    let x = state.off_axis(geom.l);
    let mut halfspaces = obstacle_rows(x, &world.obstacles, cbf);
    halfspaces.extend(input_rows(state.theta, geom)?);
    let sol = solve_qp(&QpProblem { u_r, halfspaces })?;
    let mut cmd = ControlCommand::from_cartesian(sol.u, state.theta, geom);
    cmd.modified = sol.modified;
    cmd.active_set = sol.active_set;
    Ok(cmd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{AngleDomain, BoundaryModel, FourierCurve, Winding};

    fn geom(l: f64, d: f64, v_m: f64) -> RobotGeometry {
        RobotGeometry { l, d, r_b: 0.0, v_m }
    }

    #[test]
    fn barrier_values() {
        let o = Obstacle::new(Vec2::zeros(), 1.0, 0.0);
        assert_eq!(barrier_value(Vec2::new(2.0, 0.0), &o), 3.0);
        assert_eq!(barrier_value(Vec2::new(0.0, 1.0), &o), 0.0);
        assert_eq!(barrier_value(Vec2::zeros(), &o), -1.0);
        let inflated = Obstacle::new(Vec2::zeros(), 0.5, 0.5);
        assert_eq!(inflated.inflated_radius, 1.0);
    }

    #[test]
    fn obstacle_row_substitution() {
        let o = Obstacle::new(Vec2::zeros(), 1.0, 0.0);
        let rows = obstacle_rows(Vec2::new(2.0, 0.0), &[o], &CbfParams { alpha: 1.0 });
        assert_eq!(rows[0].a, Vec2::new(4.0, 0.0));
        assert_eq!(rows[0].b, -3.0);
        let rows = obstacle_rows(Vec2::new(0.0, 1.0), &[o], &CbfParams { alpha: 1.0 });
        assert_eq!(rows[0].b, 0.0);
        let o2 = Obstacle::new(Vec2::new(5.0, 0.0), 1.0, 0.0);
        let rows = obstacle_rows(Vec2::new(2.0, 0.0), &[o, o2], &CbfParams { alpha: 1.0 });
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].a, Vec2::new(-6.0, 0.0));
    }

    #[test]
    fn diamond_at_zero_heading() {
        let rows = input_rows(0.0, &geom(1.0, 1.0, 1.0)).unwrap();
        // |u_x + u_y| <= 1 and |u_x - u_y| <= 1
        assert_eq!(rows[0].a, Vec2::new(-1.0, -1.0));
        assert_eq!(rows[1].a, Vec2::new(1.0, 1.0));
        assert_eq!(rows[2].a, Vec2::new(-1.0, 1.0));
        assert_eq!(rows[3].a, Vec2::new(1.0, -1.0));
        assert!(rows.iter().all(|r| r.b == -1.0));
        assert!(rows.iter().all(|r| r.slack(Vec2::zeros()) > 0.0));
        assert!(matches!(input_rows(0.0, &geom(0.0, 1.0, 1.0)), Err(SafetyError::DegenerateGeometry(_))));
    }

    #[test]
    fn qp_interior_and_projection() {
        let big = input_rows(0.0, &geom(1.0, 1.0, 100.0)).unwrap();
        let mut rows = vec![HalfSpace { a: Vec2::new(1.0, 0.0), b: -1.0 }];
        rows.extend(big.iter().copied());
        let s = solve_qp(&QpProblem { u_r: Vec2::new(0.1, 0.0), halfspaces: rows }).unwrap();
        assert_eq!(s.u, Vec2::new(0.1, 0.0));
        assert!(!s.modified);

        let rows = vec![HalfSpace { a: Vec2::new(1.0, 0.0), b: 0.0 }];
        let s = solve_qp(&QpProblem { u_r: Vec2::new(-1.0, 0.0), halfspaces: rows }).unwrap();
        assert!(s.u.norm() < 1e-15);
        assert_eq!(s.active_set, vec![0]);
        assert!(s.modified);
    }

    #[test]
    fn qp_vertex_solution() {
        // u_x <= 1, u_y <= 1; u_r beyond the corner projects to it
        let rows = vec![
            HalfSpace { a: Vec2::new(-1.0, 0.0), b: -1.0 },
            HalfSpace { a: Vec2::new(0.0, -1.0), b: -1.0 },
        ];
        let s = solve_qp(&QpProblem { u_r: Vec2::new(3.0, 2.0), halfspaces: rows }).unwrap();
        assert!((s.u - Vec2::new(1.0, 1.0)).norm() < 1e-15);
        assert_eq!(s.active_set, vec![0, 1]);
    }

    #[test]
    fn qp_infeasible() {
        let rows = vec![
            HalfSpace { a: Vec2::new(1.0, 0.0), b: 1.0 },
            HalfSpace { a: Vec2::new(-1.0, 0.0), b: 1.0 },
        ];
        assert_eq!(
            solve_qp(&QpProblem { u_r: Vec2::zeros(), halfspaces: rows }),
            Err(SafetyError::Infeasible)
        );
    }

    fn far_world() -> World {
        let c = FourierCurve::new(1, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0], Vec2::zeros(), AngleDomain::full()).unwrap();
        World {
            obstacles: vec![Obstacle::new(Vec2::new(50.0, 50.0), 1.0, 0.0)],
            boundary: BoundaryModel::single(c, Winding::Ccw),
        }
    }

    #[test]
    fn synthesize_passes_feasible_reference() {
        let g = geom(0.01, 0.3, 0.3);
        let state = RobotState::new(Vec2::new(1.0, 2.0), 0.4);
        // mostly along the heading, small lateral part
        let (s, c) = 0.4f64.sin_cos();
        let u_r = Vec2::new(c, s) * 0.2 + Vec2::new(-s, c) * 0.002;
        let cmd = synthesize(&state, u_r, &far_world(), &CbfParams { alpha: 1.0 }, &g).unwrap();
        assert!(!cmd.modified);
        assert!((cmd.u - u_r).norm() < 1e-15);
        // wheel speeds reproduce u_r through the forward map
        let back = ControlCommand::from_wheels(cmd.v_left, cmd.v_right, state.theta, &g);
        assert!((back.u - u_r).norm() < 1e-12);
    }

    #[test]
    fn synthesize_saturates_sharp_turn() {
        let g = geom(0.01, 0.3, 0.3);
        let state = RobotState::new(Vec2::zeros(), 0.0);
        // lateral demand far beyond the wheels' authority
        let cmd = synthesize(&state, Vec2::new(0.0, 0.2), &far_world(), &CbfParams { alpha: 1.0 }, &g).unwrap();
        assert!(cmd.modified);
        let top = cmd.v_left.abs().max(cmd.v_right.abs());
        assert!((top - 0.3).abs() < 1e-9, "{top}");
    }

    #[test]
    fn synthesize_blocks_approach_on_barrier() {
        let g = geom(0.01, 0.3, 1.0);
        let state = RobotState::new(Vec2::new(-0.01, 0.0), 0.0);
        let x = state.off_axis(g.l);
        let obs = Obstacle::new(Vec2::new(1.0, 0.0), 1.0, 0.0);
        let mut world = far_world();
        world.obstacles = vec![obs];
        assert!(barrier_value(x, &obs).abs() < 1e-15);
        let cmd = synthesize(&state, Vec2::new(0.5, 0.0), &world, &CbfParams { alpha: 1.0 }, &g).unwrap();
        let inward = (obs.center - x).normalize();
        assert!(cmd.u.dot(&inward) <= 1e-12);
    }
}
