use std::f64::consts::{PI, TAU};

use encircle::boundary::{fit_segment, polar_angle, stacked_system};
use encircle::guidance::{normal, reference_control, vector_field};
use encircle::safety::{input_rows, solve_qp, HalfSpace, QpProblem, FEAS_TOL};
use encircle::sim::{step, ControlCommand};
use encircle::{
    AngleDomain, BoundaryModel, FourierCurve, GuidanceParams, RobotGeometry, RobotState, Vec2, Winding,
};
use proptest::prelude::*;

/// Exact coefficients of `s + r(ρ)(cos ρ, sin ρ)` with
/// `r = r0 + Σ_{k<H} (α_k cos kρ + β_k sin kρ)`, by product-to-sum.
fn polar_coeffs(s: Vec2, r0: f64, alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    let h_max = alpha.len() + 1;
    let mut z = vec![0.0; 4 * h_max + 2];
    let mut add = |h: usize, which: usize, v: f64| {
        if h == 0 {
            // cos 0 = 1 feeds the constant; sin 0 = 0 drops out
            if which == 0 {
                z[4 * h_max] += v;
            } else if which == 2 {
                z[4 * h_max + 1] += v;
            }
        } else {
            z[4 * (h - 1) + which] += v;
        }
    };
    // r0 (cos ρ, sin ρ)
    add(1, 0, r0);
    add(1, 3, r0);
    for k in 1..h_max {
        let (a, b) = (alpha[k - 1], beta[k - 1]);
        // x: a cos kρ cos ρ + b sin kρ cos ρ
        add(k + 1, 0, a / 2.0);
        add(k - 1, 0, a / 2.0);
        add(k + 1, 1, b / 2.0);
        add(k - 1, 1, b / 2.0);
        // y: a cos kρ sin ρ + b sin kρ sin ρ
        add(k + 1, 3, a / 2.0);
        add(k - 1, 3, -a / 2.0);
        add(k - 1, 2, b / 2.0);
        add(k + 1, 2, -b / 2.0);
    }
    z[4 * h_max] += s.x;
    z[4 * h_max + 1] += s.y;
    z
}

fn radius(r0: f64, alpha: &[f64], beta: &[f64], rho: f64) -> f64 {
    r0 + alpha
        .iter()
        .zip(beta)
        .enumerate()
        .map(|(i, (a, b))| {
            let k = (i + 1) as f64;
            a * (k * rho).cos() + b * (k * rho).sin()
        })
        .sum::<f64>()
}

/// A random star-shaped curve: reference, mean radius and small harmonics
/// that keep the radius positive.
fn star_curve() -> impl Strategy<Value = (Vec2, f64, Vec<f64>, Vec<f64>)> {
    (1usize..6).prop_flat_map(|h| {
        (
            (-5.0..5.0f64, -5.0..5.0f64),
            1.0..4.0f64,
            prop::collection::vec(-0.15..0.15f64, h - 1),
            prop::collection::vec(-0.15..0.15f64, h - 1),
        )
            .prop_map(|((sx, sy), r0, a, b)| (Vec2::new(sx, sy), r0, a, b))
    })
}

fn random_curve() -> impl Strategy<Value = FourierCurve> {
    (1usize..7).prop_flat_map(|h| {
        (prop::collection::vec(-2.0..2.0f64, 4 * h + 2))
            .prop_map(move |z| FourierCurve::new(h, z, Vec2::zeros(), AngleDomain::full()).unwrap())
    })
}

fn flower(n: usize) -> Vec<Vec2> {
    (0..n)
        .map(|i| {
            let th = TAU * i as f64 / n as f64;
            let r = 2.0 + 2f64.powf((6.0 * th).sin());
            Vec2::new(r * th.cos(), r * th.sin())
        })
        .collect()
}

proptest! {
    #[test]
    fn tangent_matches_central_difference(curve in random_curve(), rho in 0.0..TAU) {
        let h = 1e-6;
        let fd = (curve.eval_unchecked(rho + h) - curve.eval_unchecked(rho - h)) / (2.0 * h);
        let tau = curve.tangent_unchecked(rho);
        prop_assert!((fd - tau).norm() <= 1e-6 * tau.norm().max(1.0), "fd {fd:?} tau {tau:?}");
    }

    #[test]
    fn fit_recovers_star_curve((s, r0, a, b) in star_curve(), extra in 0usize..60, seed in 0u64..1000) {
        let h = a.len() + 1;
        let n = 2 * h + 2 + extra;
        // distinct, irregular angles
        let angles: Vec<f64> = (0..n)
            .map(|i| (i as f64 + 0.3 * ((seed as f64 + i as f64 * 7.1).sin())) * TAU / n as f64)
            .collect();
        let pts: Vec<Vec2> = angles
            .iter()
            .map(|&t| s + radius(r0, &a, &b, t) * Vec2::new(t.cos(), t.sin()))
            .collect();
        let (curve, report) = fit_segment(&pts, s, h, AngleDomain::full()).unwrap();
        let want = polar_coeffs(s, r0, &a, &b);
        let err = curve.coeffs().iter().zip(&want).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-8, "coefficient error {err:e}");
        prop_assert!(report.rms_residual <= 1e-9);
    }

    #[test]
    fn residual_is_orthogonal_to_regressors(seed in 0u64..10_000, h in 1usize..8) {
        let n = 80;
        let pts: Vec<Vec2> = (0..n)
            .map(|i| {
                let t = TAU * (i as f64 + 0.5) / n as f64;
                let wobble = 0.2 * ((seed as f64 * 0.37 + i as f64 * 1.3).sin());
                (3.0 + wobble) * Vec2::new(t.cos(), t.sin())
            })
            .collect();
        let (curve, _) = fit_segment(&pts, Vec2::zeros(), h, AngleDomain::full()).unwrap();
        let (gamma, c) = stacked_system(&pts, Vec2::zeros(), h).unwrap();
        let zeta = nalgebra::DVector::from_column_slice(curve.coeffs());
        let g = gamma.transpose() * (&c - &gamma * zeta);
        prop_assert!(g.amax() <= 1e-10 * gamma.norm() * c.norm(), "gradient {:e}", g.amax());
    }

    #[test]
    fn tangent_and_normal_are_orthogonal(tx in -1e3..1e3f64, ty in -1e3..1e3f64) {
        let t = Vec2::new(tx, ty);
        prop_assert!(t.dot(&normal(t)).abs() <= 1e-12);
        prop_assert!((normal(t).norm() - t.norm()).abs() <= 1e-12 * t.norm().max(1.0));
    }

    #[test]
    fn reference_speed_is_v_d(
        (s, r0, a, b) in star_curve(),
        px in -10.0..10.0f64, py in -10.0..10.0f64,
        k in 0.05..5.0f64, v_d in 0.05..3.0f64, e_d in 0.0..2.0f64,
    ) {
        let curve = FourierCurve::new(a.len() + 1, polar_coeffs(s, r0, &a, &b), s, AngleDomain::full()).unwrap();
        let model = BoundaryModel::single(curve, Winding::Ccw);
        let params = GuidanceParams::new(k, v_d, e_d);
        let p = Vec2::new(px, py);
        prop_assume!((p - s).norm() > 1e-6);
        if let Ok(u) = reference_control(p, &model, &params) {
            prop_assert!((u.norm() - v_d).abs() <= 1e-12, "|u| = {}", u.norm());
        }
    }

    #[test]
    fn field_is_tangent_on_the_boundary((s, r0, a, b) in star_curve(), rho in 0.0..TAU, cw in any::<bool>()) {
        let curve = FourierCurve::new(a.len() + 1, polar_coeffs(s, r0, &a, &b), s, AngleDomain::full()).unwrap();
        let winding = if cw { Winding::Cw } else { Winding::Ccw };
        let p = curve.eval_unchecked(rho);
        let model = BoundaryModel::single(curve.clone(), winding);
        let f = vector_field(p, &model, &GuidanceParams::new(1.0, 0.5, 0.0)).unwrap();
        let tau = curve.tangent_unchecked(rho) * winding.sign();
        let angle = (f.chi.perp(&tau)).atan2(f.chi.dot(&tau)).abs();
        prop_assert!(angle <= 1e-9, "misalignment {angle:e} rad");
    }

    #[test]
    fn qp_solution_is_feasible_and_stationary(
        ur in (-2.0..2.0f64, -2.0..2.0f64),
        rows in prop::collection::vec(((0.0..TAU), -1.0..0.0f64), 0..6),
    ) {
        let u_r = Vec2::new(ur.0, ur.1);
        // all rows contain the origin neighbourhood, so the problem is feasible
        let halfspaces: Vec<HalfSpace> = rows
            .iter()
            .map(|&(phi, b)| HalfSpace { a: Vec2::new(phi.cos(), phi.sin()), b })
            .collect();
        let sol = solve_qp(&QpProblem { u_r, halfspaces: halfspaces.clone() }).unwrap();
        for h in &halfspaces {
            prop_assert!(h.slack(sol.u) >= -FEAS_TOL);
        }
        // u - u_r must be a non-negative combination of the active normals:
        // any feasible direction d (a_i·d >= 0 on active rows) cannot decrease
        // the objective, i.e. (u - u_r)·d >= 0. Check on a fan of directions.
        let active: Vec<&HalfSpace> = halfspaces.iter().filter(|h| h.slack(sol.u).abs() <= 1e-9).collect();
        for i in 0..360 {
            let t = i as f64 * PI / 180.0;
            let d = Vec2::new(t.cos(), t.sin());
            if active.iter().all(|h| h.a.dot(&d) >= 0.0) {
                prop_assert!((sol.u - u_r).dot(&d) >= -1e-9);
            }
        }
    }

    #[test]
    fn input_rows_match_wheel_limits(theta in -PI..PI, ux in -1.0..1.0f64, uy in -1.0..1.0f64) {
        let geom = RobotGeometry { l: 0.01, d: 0.3, r_b: 0.0, v_m: 0.3 };
        let u = Vec2::new(ux, uy) * 0.01;
        let cmd = ControlCommand::from_cartesian(u, theta, &geom);
        let rows = input_rows(theta, &geom).unwrap();
        let tol = 1e-12 * (1.0 + cmd.v_right.abs() + cmd.v_left.abs());
        prop_assert!((rows[0].slack(u) - (geom.v_m - cmd.v_right)).abs() <= tol);
        prop_assert!((rows[1].slack(u) - (geom.v_m + cmd.v_right)).abs() <= tol);
        prop_assert!((rows[2].slack(u) - (geom.v_m - cmd.v_left)).abs() <= tol);
        prop_assert!((rows[3].slack(u) - (geom.v_m + cmd.v_left)).abs() <= tol);
    }

    #[test]
    fn polar_angle_round_trip(t in 0.0..TAU, r in 1e-3..1e3f64) {
        let s = Vec2::new(1.0, -2.0);
        let a = polar_angle(s + r * Vec2::new(t.cos(), t.sin()), s).unwrap();
        let d = (a - t).rem_euclid(TAU);
        prop_assert!(d.min(TAU - d) <= 1e-12);
    }
}

#[test]
fn flower_residual_decreases_with_harmonics() {
    let pts = flower(400);
    let rms: Vec<f64> = [6, 12, 18]
        .iter()
        .map(|&h| fit_segment(&pts, Vec2::zeros(), h, AngleDomain::full()).unwrap().1.rms_residual)
        .collect();
    assert!(rms[0] > rms[1] && rms[1] > rms[2], "{rms:?}");
}

#[test]
fn rk4_closes_the_unit_circle() {
    let cmd = ControlCommand {
        v: 1.0,
        omega: 1.0,
        ..ControlCommand::default()
    };
    let start = RobotState::new(Vec2::zeros(), 0.0);
    let n = 1000;
    let mut s = start;
    for _ in 0..n {
        s = step(&s, &cmd, TAU / n as f64);
    }
    assert!((s.p - start.p).norm() <= 1e-6, "closure error {:e}", (s.p - start.p).norm());
    // one short step against the analytic arc
    let one = step(&start, &cmd, 0.1);
    let exact = Vec2::new(0.1f64.sin(), 1.0 - 0.1f64.cos());
    assert!((one.p - exact).norm() <= 1e-7);
}
