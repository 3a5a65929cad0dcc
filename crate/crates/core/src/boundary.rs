//! Polar-angle parameterized boundary curves.
//!
//! A boundary is sampled as a cloud of points. Each star-shaped piece of it is
//! described in terms of the polar angle `rho` about a reference point and
//! approximated by a truncated Fourier series
//!
//! ```text
//!   c_x(rho) = sum_h a_h cos(h rho) + b_h sin(h rho) + e
//!   c_y(rho) = sum_h c_h cos(h rho) + d_h sin(h rho) + f
//! ```
//!
//! whose coefficients are found by linear least squares. Non-star-shaped
//! boundaries are handled as a [`BoundaryModel`] made of several such pieces,
//! each active in its own region of the plane.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec2;

/// Radius below which a point is considered to coincide with the reference point.
pub const ZERO_RADIUS_TOL: f64 = 1e-12;
/// Two samples closer than this in polar angle break injectivity.
pub const ANGLE_TOL: f64 = 1e-9;
/// Largest acceptable condition estimate of the regression matrix.
pub const MAX_CONDITION: f64 = 1e12;
/// Slack allowed when testing domain membership at the interval ends.
const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error("point coincides with the reference point (radius {0:e} m)")]
    ZeroRadius(f64),
    #[error("{points} points cannot determine {harmonics} harmonics (need at least {required})")]
    TooFewPoints {
        points: usize,
        harmonics: usize,
        required: usize,
    },
    #[error("samples {0} and {1} share a polar angle; not star-shaped about the reference point")]
    NotStarShaped(usize, usize),
    #[error("regression matrix is rank deficient (condition estimate {0:e})")]
    RankDeficient(f64),
    #[error("angle {0} rad lies outside the curve domain")]
    OutOfDomain(f64),
    #[error("harmonic count must be at least 1")]
    ZeroHarmonics,
    #[error("invalid angle domain [{lo}, {hi}]")]
    InvalidDomain { lo: f64, hi: f64 },
    #[error("coefficient vector has length {got}, expected {expected}")]
    CoefficientLength { got: usize, expected: usize },
    #[error("point ({0}, {1}) is not covered by any segment region")]
    NoSegment(f64, f64),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

/// Normalizes an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Full-quadrant polar angle of `p` about `s`, in `[0, 2π)`.
pub fn polar_angle(p: Vec2, s: Vec2) -> Result<f64, BoundaryError> {
    let d = p - s;
    let r = d.norm();
    if !(r >= ZERO_RADIUS_TOL) {
        return Err(BoundaryError::ZeroRadius(r));
    }
    Ok(wrap_angle(d.y.atan2(d.x)))
}

/// Outcome of [`check_star_shaped`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarCheck {
    Injective,
    /// Two sample indices whose polar angles coincide (or one sample sits on
    /// the reference point, reported as `(i, i)`).
    Conflict(usize, usize),
}

impl StarCheck {
    pub fn is_star(&self) -> bool {
        matches!(self, StarCheck::Injective)
    }
}

/// Checks that the polar-angle map over `points` about `s` is injective up to
/// `tol` radians. This is the necessary condition the fit relies on; it does
/// not prove that the segment between `s` and every sample stays inside the set.
pub fn check_star_shaped(points: &[Vec2], s: Vec2, tol: f64) -> StarCheck {
    let mut angles = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        match polar_angle(*p, s) {
            Ok(a) => angles.push((a, i)),
            Err(_) => return StarCheck::Conflict(i, i),
        }
    }
    angles.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for w in angles.windows(2) {
        if w[1].0 - w[0].0 <= tol {
            return StarCheck::Conflict(w[0].1.min(w[1].1), w[0].1.max(w[1].1));
        }
    }
    if let (Some(first), Some(last)) = (angles.first(), angles.last()) {
        if angles.len() > 1 && first.0 + TAU - last.0 <= tol {
            return StarCheck::Conflict(first.1.min(last.1), first.1.max(last.1));
        }
    }
    StarCheck::Injective
}

/// Interval of polar angles a curve is defined on.
///
/// Angles are stored in `[0, 2π]`. When `wraps` is set the interval runs from
/// `lo` up through the `2π` seam and on to `hi`, i.e. it is `[lo, 2π) ∪ [0, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleDomain {
    pub lo: f64,
    pub hi: f64,
    pub wraps: bool,
}

impl AngleDomain {
    pub fn full() -> Self {
        AngleDomain {
            lo: 0.0,
            hi: TAU,
            wraps: false,
        }
    }

    /// Counter-clockwise interval from `lo` to `hi`; both are wrapped into
    /// `[0, 2π)` first and the seam flag is derived from their order.
    pub fn new(lo: f64, hi: f64) -> Result<Self, BoundaryError> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(BoundaryError::InvalidDomain { lo, hi });
        }
        let (l, h) = (wrap_angle(lo), wrap_angle(hi));
        if (l - h).abs() < ANGLE_TOL {
            return Err(BoundaryError::InvalidDomain { lo, hi });
        }
        Ok(AngleDomain {
            lo: l,
            hi: h,
            wraps: l > h,
        })
    }

    pub fn is_full(&self) -> bool {
        !self.wraps && self.lo == 0.0 && self.hi >= TAU
    }

    pub fn length(&self) -> f64 {
        if self.wraps {
            TAU - self.lo + self.hi
        } else {
            self.hi - self.lo
        }
    }

    pub fn contains(&self, rho: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let r = wrap_angle(rho);
        if self.wraps {
            r >= self.lo - DOMAIN_SLACK || r <= self.hi + DOMAIN_SLACK
        } else {
            (r >= self.lo - DOMAIN_SLACK && r <= self.hi + DOMAIN_SLACK)
                // slack across the seam for intervals touching 0 or 2π
                || (self.lo < DOMAIN_SLACK && r > TAU - DOMAIN_SLACK)
                || (self.hi > TAU - DOMAIN_SLACK && r < DOMAIN_SLACK)
        }
    }

    /// Returns `rho` if it is in the domain, otherwise the nearer endpoint.
    pub fn clamp(&self, rho: f64) -> f64 {
        if self.contains(rho) {
            return wrap_angle(rho);
        }
        let r = wrap_angle(rho);
        let dist = |a: f64| {
            let d = (r - a).rem_euclid(TAU);
            d.min(TAU - d)
        };
        if dist(self.lo) <= dist(self.hi) {
            self.lo
        } else {
            wrap_angle(self.hi)
        }
    }

    /// Unwrapped angle of `rho` measured from `lo`; useful for sorting samples
    /// along a wrapped interval.
    pub fn offset(&self, rho: f64) -> f64 {
        (wrap_angle(rho) - self.lo).rem_euclid(TAU)
    }
}

/// The `2 × (4H+2)` regression matrix `G(rho)`.
pub fn build_regressor(rho: f64, harmonics: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(2, 4 * harmonics + 2);
    for h in 1..=harmonics {
        let (s, c) = (h as f64 * rho).sin_cos();
        let j = 4 * (h - 1);
        g[(0, j)] = c;
        g[(0, j + 1)] = s;
        g[(1, j + 2)] = c;
        g[(1, j + 3)] = s;
    }
    g[(0, 4 * harmonics)] = 1.0;
    g[(1, 4 * harmonics + 1)] = 1.0;
    g
}

/// A fitted boundary piece. Coefficients are laid out as
/// `[a_1, b_1, c_1, d_1, …, a_H, b_H, c_H, d_H, e, f]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCurve {
    harmonics: usize,
    coeffs: Vec<f64>,
    reference: Vec2,
    domain: AngleDomain,
}

impl FourierCurve {
    pub fn new(
        harmonics: usize,
        coeffs: Vec<f64>,
        reference: Vec2,
        domain: AngleDomain,
    ) -> Result<Self, BoundaryError> {
        if harmonics == 0 {
            return Err(BoundaryError::ZeroHarmonics);
        }
        let expected = 4 * harmonics + 2;
        if coeffs.len() != expected {
            return Err(BoundaryError::CoefficientLength {
                got: coeffs.len(),
                expected,
            });
        }
        Ok(FourierCurve {
            harmonics,
            coeffs,
            reference,
            domain,
        })
    }

    pub fn harmonics(&self) -> usize {
        self.harmonics
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn reference(&self) -> Vec2 {
        self.reference
    }

    pub fn domain(&self) -> &AngleDomain {
        &self.domain
    }

    /// Constant term `(e, f)`.
    pub fn offset(&self) -> Vec2 {
        Vec2::new(self.coeffs[4 * self.harmonics], self.coeffs[4 * self.harmonics + 1])
    }

    /// `(a_h, b_h, c_h, d_h)` for harmonic `h` (1-based).
    pub fn harmonic(&self, h: usize) -> [f64; 4] {
        let j = 4 * (h - 1);
        [
            self.coeffs[j],
            self.coeffs[j + 1],
            self.coeffs[j + 2],
            self.coeffs[j + 3],
        ]
    }

    pub fn eval(&self, rho: f64) -> Result<Vec2, BoundaryError> {
        if !self.domain.contains(rho) {
            return Err(BoundaryError::OutOfDomain(rho));
        }
        Ok(self.eval_unchecked(rho))
    }

    pub fn tangent(&self, rho: f64) -> Result<Vec2, BoundaryError> {
        if !self.domain.contains(rho) {
            return Err(BoundaryError::OutOfDomain(rho));
        }
        Ok(self.tangent_unchecked(rho))
    }

    /// Evaluates the series at any angle, ignoring the domain.
    pub fn eval_unchecked(&self, rho: f64) -> Vec2 {
        let mut p = self.offset();
        for h in 1..=self.harmonics {
            let (s, c) = (h as f64 * rho).sin_cos();
            let [a, b, cc, d] = self.harmonic(h);
            p.x += a * c + b * s;
            p.y += cc * c + d * s;
        }
        p
    }

    /// Analytic `d c / d rho` at any angle, ignoring the domain.
    pub fn tangent_unchecked(&self, rho: f64) -> Vec2 {
        let mut t = Vec2::zeros();
        for h in 1..=self.harmonics {
            let hf = h as f64;
            let (s, c) = (hf * rho).sin_cos();
            let [a, b, cc, d] = self.harmonic(h);
            t.x += hf * (-a * s + b * c);
            t.y += hf * (-cc * s + d * c);
        }
        t
    }
}

/// Diagnostics of a least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub rms_residual: f64,
    pub max_residual: f64,
    pub n_points: usize,
    pub condition_estimate: f64,
}

/// Least-squares fit of an `H`-harmonic curve to `points` about `reference`.
///
/// Samples are sorted by polar angle first; coincident angles are rejected.
/// The x and y coordinates share the same harmonic basis, so the stacked
/// problem splits into two solves against one `N × (2H+1)` matrix, done here
/// with a Householder QR factorization.
pub fn fit_segment(
    points: &[Vec2],
    reference: Vec2,
    harmonics: usize,
    domain: AngleDomain,
) -> Result<(FourierCurve, FitReport), BoundaryError> {
    if harmonics == 0 {
        return Err(BoundaryError::ZeroHarmonics);
    }
    let required = 2 * harmonics + 2;
    if points.len() < required {
        return Err(BoundaryError::TooFewPoints {
            points: points.len(),
            harmonics,
            required,
        });
    }
    if let Some(i) = points.iter().position(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(BoundaryError::NonFinite(i));
    }
    let mut samples = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let rho = polar_angle(*p, reference)?;
        if !domain.contains(rho) {
            return Err(BoundaryError::OutOfDomain(rho));
        }
        samples.push((domain.offset(rho), rho, *p, i));
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.3.cmp(&b.3)));
    for w in samples.windows(2) {
        if w[1].0 - w[0].0 <= ANGLE_TOL {
            return Err(BoundaryError::NotStarShaped(w[0].3.min(w[1].3), w[0].3.max(w[1].3)));
        }
    }
    if let (Some(first), Some(last)) = (samples.first(), samples.last()) {
        if first.0 + TAU - last.0 <= ANGLE_TOL {
            return Err(BoundaryError::NotStarShaped(first.3.min(last.3), first.3.max(last.3)));
        }
    }

    let n = samples.len();
    let cols = 2 * harmonics + 1;
    let mut basis = DMatrix::zeros(n, cols);
    let mut rhs = DMatrix::zeros(n, 2);
    for (row, (_, rho, p, _)) in samples.iter().enumerate() {
        for h in 1..=harmonics {
            let (s, c) = (h as f64 * rho).sin_cos();
            basis[(row, 2 * (h - 1))] = c;
            basis[(row, 2 * (h - 1) + 1)] = s;
        }
        basis[(row, cols - 1)] = 1.0;
        rhs[(row, 0)] = p.x;
        rhs[(row, 1)] = p.y;
    }

    let sv = basis.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(BoundaryError::RankDeficient(condition));
    }

    let qr = basis.clone().qr();
    let qtb = qr.q().transpose() * &rhs;
    let r = qr.r();
    let sol = r
        .solve_upper_triangular(&qtb)
        .ok_or(BoundaryError::RankDeficient(condition))?;

    let mut coeffs = vec![0.0; 4 * harmonics + 2];
    for h in 1..=harmonics {
        let j = 4 * (h - 1);
        coeffs[j] = sol[(2 * (h - 1), 0)];
        coeffs[j + 1] = sol[(2 * (h - 1) + 1, 0)];
        coeffs[j + 2] = sol[(2 * (h - 1), 1)];
        coeffs[j + 3] = sol[(2 * (h - 1) + 1, 1)];
    }
    coeffs[4 * harmonics] = sol[(cols - 1, 0)];
    coeffs[4 * harmonics + 1] = sol[(cols - 1, 1)];

    let curve = FourierCurve::new(harmonics, coeffs, reference, domain)?;
    let mut sum_sq = 0.0;
    let mut max_res: f64 = 0.0;
    for (_, rho, p, _) in &samples {
        let r = (curve.eval_unchecked(*rho) - p).norm();
        sum_sq += r * r;
        max_res = max_res.max(r);
    }
    let report = FitReport {
        rms_residual: (sum_sq / n as f64).sqrt(),
        max_residual: max_res,
        n_points: n,
        condition_estimate: condition,
    };
    Ok((curve, report))
}

/// Stacked regression matrix `Γ` and data vector `C` for the given samples,
/// in the interleaved `(x, y)` layout. Mostly useful for diagnostics.
pub fn stacked_system(points: &[Vec2], reference: Vec2, harmonics: usize) -> Result<(DMatrix<f64>, DVector<f64>), BoundaryError> {
    let mut gamma = DMatrix::zeros(2 * points.len(), 4 * harmonics + 2);
    let mut c = DVector::zeros(2 * points.len());
    for (i, p) in points.iter().enumerate() {
        let rho = polar_angle(*p, reference)?;
        gamma.rows_mut(2 * i, 2).copy_from(&build_regressor(rho, harmonics));
        c[2 * i] = p.x;
        c[2 * i + 1] = p.y;
    }
    Ok((gamma, c))
}

/// Traversal orientation of a segment relative to increasing polar angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winding {
    #[default]
    Ccw,
    Cw,
}

impl Winding {
    pub fn sign(self) -> f64 {
        match self {
            Winding::Ccw => 1.0,
            Winding::Cw => -1.0,
        }
    }
}

/// Closed half-plane `{p : (p - point) · normal <= 0}`; `normal` points out of
/// the region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub point: Vec2,
    pub normal: Vec2,
}

impl HalfPlane {
    pub fn contains(&self, p: Vec2) -> bool {
        (p - self.point).dot(&self.normal) <= 0.0
    }

    /// Signed distance to the line, positive outside.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        (p - self.point).dot(&self.normal) / self.normal.norm()
    }

    pub fn flipped(&self) -> Self {
        HalfPlane {
            point: self.point,
            normal: -self.normal,
        }
    }
}

/// Intersection of half-planes; empty means the whole plane.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionPredicate {
    pub halfplanes: Vec<HalfPlane>,
}

impl RegionPredicate {
    pub fn everywhere() -> Self {
        RegionPredicate::default()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.halfplanes.iter().all(|h| h.contains(p))
    }

    /// Distance from `p` to the nearest bounding line.
    fn distance_to_edge(&self, p: Vec2) -> f64 {
        self.halfplanes
            .iter()
            .map(|h| h.signed_distance(p).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub curve: FourierCurve,
    pub region: RegionPredicate,
    pub winding: Winding,
}

/// Gap between the end of one segment and the start of the next, following
/// each segment's traversal direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffGap {
    pub from: usize,
    pub to: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryModel {
    segments: Vec<Segment>,
}

impl BoundaryModel {
    pub fn new(segments: Vec<Segment>) -> Self {
        BoundaryModel { segments }
    }

    /// A single star-shaped curve active everywhere.
    pub fn single(curve: FourierCurve, winding: Winding) -> Self {
        BoundaryModel {
            segments: vec![Segment {
                curve,
                region: RegionPredicate::everywhere(),
                winding,
            }],
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Index of the segment owning `p`. Points on a shared switching line go
    /// to the lower index.
    pub fn select(&self, p: Vec2) -> Result<usize, BoundaryError> {
        self.segments
            .iter()
            .position(|s| s.region.contains(p))
            .ok_or(BoundaryError::NoSegment(p.x, p.y))
    }

    /// Checks on an `n × n` grid over `[lo, hi]` that every point lies in at
    /// least one region and that overlaps only happen on region edges.
    /// Returns the first offending grid point.
    pub fn check_partition(&self, lo: Vec2, hi: Vec2, n: usize) -> Result<(), Vec2> {
        let n = n.max(2);
        for i in 0..n {
            for j in 0..n {
                let p = Vec2::new(
                    lo.x + (hi.x - lo.x) * i as f64 / (n - 1) as f64,
                    lo.y + (hi.y - lo.y) * j as f64 / (n - 1) as f64,
                );
                let owners: Vec<&Segment> =
                    self.segments.iter().filter(|s| s.region.contains(p)).collect();
                match owners.len() {
                    0 => return Err(p),
                    1 => {}
                    _ => {
                        if owners.iter().all(|s| s.region.distance_to_edge(p) > 1e-9) {
                            return Err(p);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Cut-off gaps between consecutive segments (cyclically). A single
    /// full-circle segment has no cut-off points and yields an empty list.
    pub fn cutoff_gaps(&self) -> Vec<CutoffGap> {
        let n = self.segments.len();
        if n < 2 {
            return Vec::new();
        }
        let ends = |s: &Segment| {
            let d = s.curve.domain();
            let (a, b) = (s.curve.eval_unchecked(d.lo), s.curve.eval_unchecked(d.hi));
            match s.winding {
                Winding::Ccw => (a, b),
                Winding::Cw => (b, a),
            }
        };
        (0..n)
            .map(|i| {
                let j = (i + 1) % n;
                let (_, end) = ends(&self.segments[i]);
                let (start, _) = ends(&self.segments[j]);
                CutoffGap {
                    from: i,
                    to: j,
                    gap: (end - start).norm(),
                }
            })
            .collect()
    }
}
