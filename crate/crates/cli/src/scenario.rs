//! Scenario files: TOML schema, boundary sources and eager validation.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use encircle::boundary::{
    fit_segment, polar_angle, BoundaryError, HalfPlane, RegionPredicate, StarCheck,
};
use encircle::boundary::check_star_shaped;
use encircle::guidance::ErrorSign;
use encircle::sim::SimConfig;
use encircle::{
    AngleDomain, BoundaryModel, CbfParams, FitReport, FourierCurve, GuidanceParams, Obstacle,
    RobotGeometry, RobotState, Segment, Vec2, Winding, World,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curves::read_curves;
use crate::error::{CliError, ValidationCode as Code};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub boundary: BoundarySpec,
    /// Listed in traversal order; consecutive segments meet at cut-off points.
    #[serde(default, rename = "segment", skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentSpec>,
    pub guidance: GuidanceSpec,
    #[serde(default)]
    pub cbf: CbfSpec,
    pub robot: RobotSpec,
    #[serde(default, rename = "obstacle", skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<ObstacleSpec>,
    pub initial: InitialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    /// Equally spaced samples of a circle.
    Circle,
    /// Equally spaced samples of `r = 2 + 2^{sin 6θ}`.
    Flower,
    /// Whitespace-separated `x y` lines, `#` comments.
    Samples,
    /// A fitted-curve file written by `encircle fit`.
    Curves,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub kind: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Standard deviation of Gaussian noise added to generated samples.
    #[serde(default)]
    pub noise_std: f64,
    /// Largest accepted distance between consecutive segments' cut-off
    /// points; defaults to 2% of the sample bounding-box diagonal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cutoff_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainSpec {
    /// Only `"full"` is accepted.
    Named(String),
    Range([f64; 2]),
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec::Named("full".into())
    }
}

impl DomainSpec {
    pub fn to_domain(&self) -> Result<AngleDomain, CliError> {
        match self {
            DomainSpec::Named(s) if s == "full" => Ok(AngleDomain::full()),
            DomainSpec::Named(s) => Err(CliError::validation(
                Code::InvalidDomain,
                format!("unknown domain {s:?}; use \"full\" or [lo, hi]"),
            )),
            DomainSpec::Range([lo, hi]) => AngleDomain::new(*lo, *hi)
                .map_err(|e| CliError::validation(Code::InvalidDomain, e.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfPlaneSpec {
    pub point: [f64; 2],
    /// Points outward; the region is `(p - point) · normal <= 0`.
    pub normal: [f64; 2],
}

impl HalfPlaneSpec {
    pub fn to_halfplane(&self) -> Result<HalfPlane, CliError> {
        let (point, normal) = (v(self.point), v(self.normal));
        if !(point.iter().all(|c| c.is_finite()) && normal.iter().all(|c| c.is_finite()))
            || normal.norm() == 0.0
        {
            return Err(CliError::validation(
                Code::HalfPlane,
                format!("half-plane normal {:?} must be finite and non-zero", self.normal),
            ));
        }
        Ok(HalfPlane { point, normal })
    }

    pub fn from_halfplane(h: &HalfPlane) -> Self {
        HalfPlaneSpec {
            point: [h.point.x, h.point.y],
            normal: [h.normal.x, h.normal.y],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub reference: [f64; 2],
    pub harmonics: usize,
    #[serde(default)]
    pub domain: DomainSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winding: Option<Winding>,
    #[serde(default, rename = "halfplane", skip_serializing_if = "Vec::is_empty")]
    pub halfplanes: Vec<HalfPlaneSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceSpec {
    pub k: f64,
    pub v_d: f64,
    #[serde(default)]
    pub e_d: f64,
    #[serde(default)]
    pub error: ErrorSign,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escape_speed: Option<f64>,
}

impl GuidanceSpec {
    pub fn params(&self) -> GuidanceParams {
        let mut g = GuidanceParams::new(self.k, self.v_d, self.e_d);
        g.error_sign = self.error;
        if let Some(eps) = self.eps_tau {
            g.eps_tau = eps;
        }
        if let Some(s) = self.escape_speed {
            g.escape_speed = s;
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CbfSpec {
    #[serde(default = "one")]
    pub alpha: f64,
}

impl Default for CbfSpec {
    fn default() -> Self {
        CbfSpec { alpha: 1.0 }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    #[serde(default = "default_l")]
    pub l: f64,
    #[serde(default = "default_d")]
    pub d: f64,
    #[serde(default)]
    pub r_b: f64,
    pub v_m: f64,
}

fn default_l() -> f64 {
    0.01
}

fn default_d() -> f64 {
    0.3
}

impl RobotSpec {
    pub fn geometry(&self) -> RobotGeometry {
        RobotGeometry {
            l: self.l,
            d: self.d,
            r_b: self.r_b,
            v_m: self.v_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub center: [f64; 2],
    /// Raw radius; the robot's `r_b` is added when the world is built.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub p: [f64; 2],
    #[serde(default)]
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    #[serde(default = "default_grid")]
    pub n: usize,
}

fn default_grid() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// Write every n-th step record to the trajectory table.
    #[serde(default = "default_every")]
    pub every: usize,
    #[serde(default = "default_threshold")]
    pub converge_threshold: f64,
    /// Center used to count laps; defaults to the first segment's reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lap_center: Option<[f64; 2]>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: default_out(),
            every: default_every(),
            converge_threshold: default_threshold(),
            lap_center: None,
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_every() -> usize {
    1
}

fn default_threshold() -> f64 {
    0.05
}

fn v(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

/// Line/column (1-based) of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

pub(crate) fn parse_toml<T: serde::de::DeserializeOwned>(
    text: &str,
    path: &Path,
) -> Result<T, CliError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        CliError::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

impl Scenario {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, CliError> {
        parse_toml(text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario is always representable in TOML")
    }

    /// Precondition checks that do not need the boundary data.
    pub fn validate_params(&self) -> Result<(), CliError> {
        self.guidance
            .params()
            .validate()
            .map_err(|m| CliError::validation(Code::Guidance, m))?;
        if !(self.cbf.alpha > 0.0) {
            return Err(CliError::validation(Code::Cbf, "alpha must be positive"));
        }
        self.robot
            .geometry()
            .validate()
            .map_err(|m| CliError::validation(Code::Robot, m))?;
        if !(self.robot.v_m > self.guidance.v_d) {
            log::info!(
                "v_m = {} does not exceed v_d = {}; the input limits will bind whenever the robot turns",
                self.robot.v_m,
                self.guidance.v_d
            );
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0 && o.center.iter().all(|c| c.is_finite())) {
                return Err(CliError::validation(
                    Code::Obstacle,
                    format!("obstacle {i}: radius must be positive and center finite"),
                ));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CliError::validation(Code::Timing, "dt must be positive"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(CliError::validation(Code::Timing, "t_end must be non-negative"));
        }
        if self.output.every == 0 {
            return Err(CliError::validation(Code::Timing, "output.every must be at least 1"));
        }
        if !(self.output.converge_threshold > 0.0) {
            return Err(CliError::validation(
                Code::Timing,
                "output.converge_threshold must be positive",
            ));
        }
        if let Some(f) = &self.field {
            if f.n < 2 || !(f.hi[0] > f.lo[0] && f.hi[1] > f.lo[1]) {
                return Err(CliError::validation(
                    Code::FieldGrid,
                    "field grid needs n >= 2 and hi > lo on both axes",
                ));
            }
        }
        if !self.initial.p.iter().all(|c| c.is_finite()) || !self.initial.theta.is_finite() {
            return Err(CliError::validation(Code::Robot, "initial state must be finite"));
        }
        Ok(())
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub seed: Option<u64>,
}

/// A scenario after every load-time check, with its boundary model built.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub source_path: PathBuf,
    /// SHA-256 (hex) of the scenario file and every data file it reads.
    pub hash: String,
    pub world: World,
    /// One report per segment; `None` when the curve came from a curve file.
    pub fits: Vec<Option<FitReport>>,
    pub samples: Vec<Vec2>,
    pub notices: Vec<String>,
}

impl LoadedScenario {
    pub fn sim_config(&self) -> SimConfig {
        let s = &self.scenario;
        SimConfig {
            guidance: s.guidance.params(),
            cbf: CbfParams { alpha: s.cbf.alpha },
            geometry: s.robot.geometry(),
            initial: RobotState::new(v(s.initial.p), s.initial.theta),
            t_end: s.t_end,
            dt: s.dt,
            seed: s.seed,
        }
    }

    pub fn lap_center(&self) -> Vec2 {
        match self.scenario.output.lap_center {
            Some(c) => v(c),
            None => self.world.boundary.segments()[0].curve.reference(),
        }
    }

    /// Field grid: the scenario's, or a 50×50 box around the samples.
    pub fn field_grid(&self) -> FieldSpec {
        if let Some(f) = &self.scenario.field {
            return f.clone();
        }
        let (lo, hi) = bbox(self.samples.iter().copied().chain(self.reference_points()));
        let pad = 0.25 * (hi - lo).norm().max(1.0);
        FieldSpec {
            lo: [lo.x - pad, lo.y - pad],
            hi: [hi.x + pad, hi.y + pad],
            n: default_grid(),
        }
    }

    fn reference_points(&self) -> Vec<Vec2> {
        self.world.boundary.segments().iter().map(|s| s.curve.reference()).collect()
    }
}

fn bbox(points: impl IntoIterator<Item = Vec2>) -> (Vec2, Vec2) {
    let mut lo = Vec2::repeat(f64::INFINITY);
    let mut hi = Vec2::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(&p);
        hi = hi.sup(&p);
    }
    if !lo.x.is_finite() {
        return (Vec2::zeros(), Vec2::zeros());
    }
    (lo, hi)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Parses `x y` sample lines; `#` starts a comment, commas count as spaces.
pub fn parse_samples(text: &str, path: &Path) -> Result<Vec<Vec2>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").replace(',', " ");
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let bad = || {
            CliError::validation(
                Code::SampleFormat,
                format!("{}:{}: expected two finite numbers, got {:?}", path.display(), i + 1, raw.trim()),
            )
        };
        if fields.len() != 2 {
            return Err(bad());
        }
        let x: f64 = fields[0].parse().map_err(|_| bad())?;
        let y: f64 = fields[1].parse().map_err(|_| bad())?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(bad());
        }
        out.push(Vec2::new(x, y));
    }
    Ok(out)
}

/// Samples of a built-in analytic boundary, `n` equally spaced polar angles
/// from 0, with optional seeded Gaussian noise on both coordinates.
pub fn generate(kind: SourceKind, n: usize, center: Vec2, radius: f64, noise_std: f64, seed: u64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_std.max(0.0)).expect("finite std");
    (0..n)
        .map(|i| {
            let th = TAU * i as f64 / n as f64;
            let r = match kind {
                SourceKind::Flower => 2.0 + 2f64.powf((6.0 * th).sin()),
                _ => radius,
            };
            let mut p = center + r * Vec2::new(th.cos(), th.sin());
            if noise_std > 0.0 {
                p += Vec2::new(noise.sample(&mut rng), noise.sample(&mut rng));
            }
            p
        })
        .collect()
}

fn boundary_error(seg: usize, e: BoundaryError) -> CliError {
    let code = match e {
        BoundaryError::ZeroRadius(_) => Code::ZeroRadius,
        BoundaryError::TooFewPoints { .. } => Code::TooFewPoints,
        BoundaryError::NotStarShaped(..) => Code::NotStarShaped,
        BoundaryError::RankDeficient(_) => Code::RankDeficient,
        BoundaryError::ZeroHarmonics => Code::ZeroHarmonics,
        BoundaryError::InvalidDomain { .. } | BoundaryError::OutOfDomain(_) => Code::InvalidDomain,
        BoundaryError::CoefficientLength { .. } => Code::Curve,
        BoundaryError::NoSegment(..) => Code::Partition,
        BoundaryError::NonFinite(_) => Code::SampleFormat,
    };
    CliError::validation(code, format!("segment {seg}: {e}"))
}

fn sha_hex(h: Sha256) -> String {
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads, parses and fully validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario, CliError> {
    load_scenario_with(path, Overrides::default())
}

pub fn load_scenario_with(path: &Path, ov: Overrides) -> Result<LoadedScenario, CliError> {
    let text = read(path)?;
    let mut scenario = Scenario::from_toml(&text, path)?;
    if let Some(dt) = ov.dt {
        scenario.dt = dt;
    }
    if let Some(t) = ov.t_end {
        scenario.t_end = t;
    }
    if let Some(s) = ov.seed {
        scenario.seed = s;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let mut loaded = build(scenario, base, &mut hasher)?;
    loaded.source_path = path.to_path_buf();
    loaded.hash = sha_hex(hasher);
    Ok(loaded)
}

/// Builds the world from an already-parsed scenario; relative data paths are
/// resolved against `base`.
pub fn build(scenario: Scenario, base: &Path, hasher: &mut Sha256) -> Result<LoadedScenario, CliError> {
    scenario.validate_params()?;
    let mut notices = Vec::new();
    let mut notice = |m: String| {
        log::info!("{m}");
        notices.push(m);
    };
    let b = &scenario.boundary;
    let need_path = matches!(b.kind, SourceKind::Samples | SourceKind::Curves);
    match (need_path, &b.path) {
        (true, None) => {
            return Err(CliError::validation(Code::BoundarySource, "boundary.path is required for this kind"))
        }
        (false, Some(_)) => {
            return Err(CliError::validation(Code::BoundarySource, "boundary.path is only used with samples or curves"))
        }
        _ => {}
    }
    if !(b.noise_std >= 0.0 && b.noise_std.is_finite()) {
        return Err(CliError::validation(Code::BoundarySource, "noise_std must be non-negative"));
    }

    let (model, fits, samples) = if b.kind == SourceKind::Curves {
        if !scenario.segments.is_empty() {
            return Err(CliError::validation(
                Code::BoundarySource,
                "segments come from the curve file; remove the [[segment]] tables",
            ));
        }
        let p = base.join(b.path.as_ref().expect("checked above"));
        let text = read(&p)?;
        hasher.update(text.as_bytes());
        let model = read_curves(&text, &p)?;
        let n = model.segments().len();
        (model, vec![None; n], Vec::new())
    } else {
        let samples = match b.kind {
            SourceKind::Samples => {
                let p = base.join(b.path.as_ref().expect("checked above"));
                let text = read(&p)?;
                hasher.update(text.as_bytes());
                parse_samples(&text, &p)?
            }
            kind => {
                let n = b.n.ok_or_else(|| CliError::validation(Code::BoundarySource, "boundary.n is required for generators"))?;
                let radius = match kind {
                    SourceKind::Circle => b.radius.ok_or_else(|| {
                        CliError::validation(Code::BoundarySource, "boundary.radius is required for circle")
                    })?,
                    _ => 0.0,
                };
                if kind == SourceKind::Circle && !(radius > 0.0) {
                    return Err(CliError::validation(Code::BoundarySource, "circle radius must be positive"));
                }
                generate(kind, n, v(b.center.unwrap_or([0.0, 0.0])), radius, b.noise_std, scenario.seed)
            }
        };
        let (model, fits) = fit_segments(&scenario, &samples, &mut notice)?;
        (model, fits, samples)
    };

    check_geometry(&scenario, &model, &samples)?;

    let r_b = scenario.robot.r_b;
    let obstacles: Vec<Obstacle> = scenario
        .obstacles
        .iter()
        .map(|o| Obstacle::new(v(o.center), o.radius, r_b))
        .collect();
    let world = World {
        obstacles,
        boundary: model,
    };
    let x0 = RobotState::new(v(scenario.initial.p), scenario.initial.theta).off_axis(scenario.robot.l);
    if world.min_clearance(x0) < 0.0 {
        notice(format!("initial off-axis point ({}, {}) starts inside an obstacle", x0.x, x0.y));
    }
    Ok(LoadedScenario {
        scenario,
        source_path: PathBuf::new(),
        hash: String::new(),
        world,
        fits,
        samples,
        notices,
    })
}

type Fitted = (BoundaryModel, Vec<Option<FitReport>>);

/// Assigns samples to segments (inside the closed region and the angle
/// domain) and fits each one.
fn fit_segments(scenario: &Scenario, samples: &[Vec2], notice: &mut impl FnMut(String)) -> Result<Fitted, CliError> {
    if scenario.segments.is_empty() {
        return Err(CliError::validation(Code::BoundarySource, "at least one [[segment]] is required"));
    }
    let mut specs = Vec::new();
    for (i, s) in scenario.segments.iter().enumerate() {
        let domain = s.domain.to_domain()?;
        let region = RegionPredicate {
            halfplanes: s.halfplanes.iter().map(|h| h.to_halfplane()).collect::<Result<_, _>>()?,
        };
        if s.harmonics == 0 {
            return Err(boundary_error(i, BoundaryError::ZeroHarmonics));
        }
        let winding = match s.winding {
            Some(w) => w,
            None => {
                notice(format!("segment {i}: winding not given, using ccw"));
                Winding::Ccw
            }
        };
        specs.push((v(s.reference), domain, region, winding, s.harmonics));
    }

    let mut owned: Vec<Vec<Vec2>> = vec![Vec::new(); specs.len()];
    for (k, p) in samples.iter().enumerate() {
        let mut claimed = false;
        for (i, (s, domain, region, ..)) in specs.iter().enumerate() {
            if !region.contains(*p) {
                continue;
            }
            let rho = polar_angle(*p, *s).map_err(|e| boundary_error(i, e))?;
            if domain.contains(rho) {
                owned[i].push(*p);
                claimed = true;
            }
        }
        if !claimed {
            return Err(CliError::validation(
                Code::UnassignedSample,
                format!("sample {k} at ({}, {}) lies in no segment's region and domain", p.x, p.y),
            ));
        }
    }

    let mut segments = Vec::new();
    let mut fits = Vec::new();
    for (i, ((s, domain, region, winding, h), pts)) in specs.into_iter().zip(owned).enumerate() {
        if let StarCheck::Conflict(a, b) = check_star_shaped(&pts, s, encircle::boundary::ANGLE_TOL) {
            return Err(CliError::validation(
                Code::NotStarShaped,
                format!("segment {i}: samples ({}, {}) and ({}, {}) share a polar angle", pts[a].x, pts[a].y, pts[b].x, pts[b].y),
            ));
        }
        let (curve, report) = fit_segment(&pts, s, h, domain).map_err(|e| boundary_error(i, e))?;
        segments.push(Segment {
            curve,
            region,
            winding,
        });
        fits.push(Some(report));
    }
    Ok((BoundaryModel::new(segments), fits))
}

/// Partition coverage and cut-off continuity for multi-segment models.
fn check_geometry(scenario: &Scenario, model: &BoundaryModel, samples: &[Vec2]) -> Result<(), CliError> {
    if model.segments().len() < 2 {
        return Ok(());
    }
    let curve_pts: Vec<Vec2> = model
        .segments()
        .iter()
        .flat_map(|s| {
            let d = *s.curve.domain();
            (0..=64).map(move |i| s.curve.eval_unchecked(d.lo + d.length() * i as f64 / 64.0))
        })
        .collect();
    let extra = scenario.obstacles.iter().map(|o| v(o.center)).chain([v(scenario.initial.p)]);
    let (lo, hi) = bbox(samples.iter().copied().chain(curve_pts.iter().copied()).chain(extra));
    let pad = 0.2 * (hi - lo).norm().max(1.0);
    let pad = Vec2::repeat(pad);
    if let Err(p) = model.check_partition(lo - pad, hi + pad, 101) {
        return Err(CliError::validation(
            Code::Partition,
            format!("point ({}, {}) is owned by no segment or by several in their interiors", p.x, p.y),
        ));
    }
    let (slo, shi) = bbox(curve_pts.iter().copied());
    let limit = scenario.boundary.max_cutoff_gap.unwrap_or(0.02 * (shi - slo).norm());
    for g in model.cutoff_gaps() {
        if !(g.gap <= limit) {
            return Err(CliError::validation(
                Code::CutoffGap,
                format!("segments {} -> {} are {:.3e} m apart at their cut-off points (limit {limit:.3e})", g.from, g.to, g.gap),
            ));
        }
    }
    Ok(())
}

/// Rebuilds a curve with the given fields; used by the curve-file reader.
pub(crate) fn curve_from_parts(
    seg: usize,
    harmonics: usize,
    coeffs: Vec<f64>,
    reference: [f64; 2],
    domain: AngleDomain,
) -> Result<FourierCurve, CliError> {
    FourierCurve::new(harmonics, coeffs, v(reference), domain).map_err(|e| boundary_error(seg, e))
}
