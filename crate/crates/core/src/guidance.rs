//! Guiding vector field around a fitted boundary.
//!
//! For a point `p` the active segment is picked by its region predicate, the
//! polar angle `rho` of `p` about that segment's reference point is used to
//! look up the boundary point `c(rho)` and tangent `tau = dc/drho`, and the
//! field is `chi = tau - k e n` with `n = E tau`, `E = [[0, 1], [-1, 0]]`.
//! The reference control is `chi` rescaled to the desired speed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{polar_angle, BoundaryError, BoundaryModel};
use crate::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuidanceError {
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error("field vanishes at ({0}, {1}); critical point")]
    CriticalPoint(f64, f64),
}

/// How the polar-radius distance is turned into the error fed to the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorSign {
    /// `e = |p - c(rho)| - e_d`. Attracts from the outer side of the curve
    /// (the side `n` points to) and repels from the inner side.
    Unsigned,
    /// `e = s |p - c(rho)| - e_d` with `s = sign(<p - c(rho), n>)`, which
    /// attracts from both sides.
    #[default]
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceParams {
    /// Field gain `k`.
    pub k: f64,
    /// Desired encircling speed.
    pub v_d: f64,
    /// Stand-off distance.
    pub e_d: f64,
    /// `|tau|` below which the field is treated as critical.
    pub eps_tau: f64,
    /// Magnitude of the escape velocity applied at critical points.
    pub escape_speed: f64,
    pub error_sign: ErrorSign,
}

impl GuidanceParams {
    /// Parameters with the default critical threshold (1e-6) and escape speed
    /// (5% of `v_d`).
    pub fn new(k: f64, v_d: f64, e_d: f64) -> Self {
        GuidanceParams {
            k,
            v_d,
            e_d,
            eps_tau: 1e-6,
            escape_speed: 0.05 * v_d,
            error_sign: ErrorSign::default(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(what.to_string()) };
        check(self.k > 0.0, "k must be positive")?;
        check(self.v_d > 0.0, "v_d must be positive")?;
        check(self.e_d >= 0.0, "e_d must be non-negative")?;
        check(self.eps_tau > 0.0, "eps_tau must be positive")?;
        check(self.escape_speed > 0.0, "escape_speed must be positive")
    }
}

/// Polar-radius error of a point with respect to the boundary model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingError {
    /// Error fed to the field, after stand-off and sign handling.
    pub e: f64,
    /// `|p - c(rho)|`.
    pub distance: f64,
    /// `+1` when `p` is on the side the (winding-adjusted) normal points to.
    pub side: f64,
    /// Angle the curve was evaluated at; clamped into the segment domain.
    pub rho: f64,
    pub segment_id: usize,
    /// Boundary point `c(rho)`.
    pub closest: Vec2,
    /// Winding-adjusted tangent at `rho`.
    pub tau: Vec2,
}

/// Polar-radius tracking error.
///
/// If `p`'s polar angle falls outside the selected segment's domain, the curve
/// is evaluated at the nearer domain endpoint (the cut-off point).
pub fn tracking_error(
    p: Vec2,
    model: &BoundaryModel,
    params: &GuidanceParams,
) -> Result<TrackingError, GuidanceError> {
    let segment_id = model.select(p)?;
    let seg = &model.segments()[segment_id];
    let raw = polar_angle(p, seg.curve.reference())?;
    let rho = seg.curve.domain().clamp(raw);
    let closest = seg.curve.eval_unchecked(rho);
    let tau = seg.curve.tangent_unchecked(rho) * seg.winding.sign();
    let n = normal(tau);
    let diff = p - closest;
    let distance = diff.norm();
    let side = if diff.dot(&n) < 0.0 { -1.0 } else { 1.0 };
    let e = match params.error_sign {
        ErrorSign::Unsigned => distance - params.e_d,
        ErrorSign::Signed => side * distance - params.e_d,
    };
    Ok(TrackingError {
        e,
        distance,
        side,
        rho,
        segment_id,
        closest,
        tau,
    })
}

/// `n = E tau` with `E = [[0, 1], [-1, 0]]`, a rotation by -π/2.
pub fn normal(tau: Vec2) -> Vec2 {
    Vec2::new(tau.y, -tau.x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub chi: Vec2,
    pub tau: Vec2,
    pub n: Vec2,
    pub e: f64,
    pub segment_id: usize,
    pub critical: bool,
}

pub fn vector_field(
    p: Vec2,
    model: &BoundaryModel,
    params: &GuidanceParams,
) -> Result<FieldSample, GuidanceError> {
    let te = tracking_error(p, model, params)?;
    Ok(field_from_error(&te, params))
}

pub fn field_from_error(te: &TrackingError, params: &GuidanceParams) -> FieldSample {
    let tau = te.tau;
    let n = normal(tau);
    let chi = tau - params.k * te.e * n;
    FieldSample {
        chi,
        tau,
        n,
        e: te.e,
        segment_id: te.segment_id,
        critical: tau.norm() < params.eps_tau,
    }
}

/// `u_r = v_d chi / |chi|`.
pub fn reference_control(
    p: Vec2,
    model: &BoundaryModel,
    params: &GuidanceParams,
) -> Result<Vec2, GuidanceError> {
    let f = vector_field(p, model, params)?;
    reference_from_field(&f, p, params)
}

pub fn reference_from_field(f: &FieldSample, p: Vec2, params: &GuidanceParams) -> Result<Vec2, GuidanceError> {
    let norm = f.chi.norm();
    if f.critical || norm < params.eps_tau {
        return Err(GuidanceError::CriticalPoint(p.x, p.y));
    }
    Ok(f.chi * (params.v_d / norm))
}

/// Seeded random direction scaled to `escape_speed`.
pub fn escape_control(params: &GuidanceParams, seed: u64) -> Vec2 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    Vec2::new(angle.cos(), angle.sin()) * params.escape_speed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{AngleDomain, FourierCurve, Winding};

    fn circle_model(r: f64) -> BoundaryModel {
        let c = FourierCurve::new(1, vec![r, 0.0, 0.0, r, 0.0, 0.0], Vec2::zeros(), AngleDomain::full()).unwrap();
        BoundaryModel::single(c, Winding::Ccw)
    }

    fn unsigned(k: f64, e_d: f64) -> GuidanceParams {
        GuidanceParams {
            error_sign: ErrorSign::Unsigned,
            ..GuidanceParams::new(k, 1.0, e_d)
        }
    }

    #[test]
    fn tracking_error_radial_cases() {
        let m = circle_model(2.0);
        let te = tracking_error(Vec2::new(3.0, 0.0), &m, &unsigned(1.0, 0.0)).unwrap();
        assert!((te.e - 1.0).abs() < 1e-12);
        assert!(te.rho.abs() < 1e-15);
        // literal polar-radius error is unsigned
        let te = tracking_error(Vec2::new(1.0, 0.0), &m, &unsigned(1.0, 0.0)).unwrap();
        assert!((te.e - 1.0).abs() < 1e-12);
        assert_eq!(te.side, -1.0);
        let te = tracking_error(Vec2::new(5.0, 0.0), &m, &unsigned(1.0, 3.0)).unwrap();
        assert!(te.e.abs() < 1e-12);

        let signed = GuidanceParams::new(1.0, 1.0, 0.0);
        let te = tracking_error(Vec2::new(1.0, 0.0), &m, &signed).unwrap();
        assert!((te.e + 1.0).abs() < 1e-12);
    }

    #[test]
    fn field_outside_circle() {
        let m = circle_model(2.0);
        let f = vector_field(Vec2::new(4.0, 0.0), &m, &unsigned(1.0, 0.0)).unwrap();
        assert!((f.tau - Vec2::new(0.0, 2.0)).norm() < 1e-12);
        assert!((f.n - Vec2::new(2.0, 0.0)).norm() < 1e-12);
        assert!((f.chi - Vec2::new(-4.0, 2.0)).norm() < 1e-12);
        let f = vector_field(Vec2::new(4.0, 0.0), &m, &unsigned(0.5, 0.0)).unwrap();
        assert!((f.chi - Vec2::new(-2.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn field_on_boundary_is_tangent() {
        let m = circle_model(2.0);
        let p = Vec2::new(2.0f64.sqrt(), 2.0f64.sqrt());
        let f = vector_field(p, &m, &GuidanceParams::new(1.0, 0.3, 0.0)).unwrap();
        assert!((f.chi - f.tau).norm() < 1e-12);
        let u = reference_control(p, &m, &GuidanceParams::new(1.0, 0.3, 0.0)).unwrap();
        assert!((u - f.tau.normalize() * 0.3).norm() < 1e-12);
    }

    #[test]
    fn cw_winding_flips_tangent() {
        let c = FourierCurve::new(1, vec![2.0, 0.0, 0.0, 2.0, 0.0, 0.0], Vec2::zeros(), AngleDomain::full()).unwrap();
        let m = BoundaryModel::single(c, Winding::Cw);
        let f = vector_field(Vec2::new(2.0, 0.0), &m, &GuidanceParams::new(1.0, 1.0, 0.0)).unwrap();
        assert!((f.tau - Vec2::new(0.0, -2.0)).norm() < 1e-12);
        // signed error still attracts toward the curve from outside
        let f = vector_field(Vec2::new(3.0, 0.0), &m, &GuidanceParams::new(1.0, 1.0, 0.0)).unwrap();
        assert!(f.chi.x < 0.0);
    }

    #[test]
    fn degenerate_curve_is_critical() {
        let c = FourierCurve::new(2, vec![0.0; 8].into_iter().chain([1.0, 1.0]).collect(), Vec2::zeros(), AngleDomain::full()).unwrap();
        let m = BoundaryModel::single(c, Winding::Ccw);
        let p = Vec2::new(3.0, -1.0);
        let params = GuidanceParams::new(1.0, 1.0, 0.0);
        let f = vector_field(p, &m, &params).unwrap();
        assert!(f.critical);
        assert_eq!(f.tau, Vec2::zeros());
        assert!(matches!(reference_control(p, &m, &params), Err(GuidanceError::CriticalPoint(..))));
    }

    #[test]
    fn zero_radius_propagates() {
        let m = circle_model(2.0);
        let r = tracking_error(Vec2::zeros(), &m, &GuidanceParams::new(1.0, 1.0, 0.0));
        assert!(matches!(r, Err(GuidanceError::Boundary(BoundaryError::ZeroRadius(_)))));
    }

    #[test]
    fn escape_is_seeded() {
        let mut p = GuidanceParams::new(1.0, 0.2, 0.0);
        p.escape_speed = 0.01;
        let a = escape_control(&p, 0);
        assert_eq!(a, escape_control(&p, 0));
        assert!((a.norm() - 0.01).abs() < 1e-15);
        let b = escape_control(&p, 1);
        assert!((a - b).norm() > 1e-6);
    }

    #[test]
    fn params_validation() {
        assert!(GuidanceParams::new(1.0, 0.2, 0.0).validate().is_ok());
        assert!(GuidanceParams::new(0.0, 0.2, 0.0).validate().is_err());
        assert!(GuidanceParams::new(1.0, -0.2, 0.0).validate().is_err());
        assert!(GuidanceParams::new(1.0, 0.2, -1.0).validate().is_err());
    }
}
