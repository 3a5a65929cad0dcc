//! The four subcommands. Each one is a thin composition of library calls that
//! renders plain-text tables and writes them under the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use encircle::guidance::vector_field;
use encircle::sim::{run, summarize, RunSummary, StepRecord};
use encircle::Vec2;
use serde::Serialize;

use crate::curves::write_curves;
use crate::error::CliError;
use crate::scenario::LoadedScenario;

pub const TRAJECTORY_COLUMNS: [&str; 15] = [
    "t", "p_x", "p_y", "theta", "x", "y", "e", "v", "omega", "v_L", "v_R", "min_clearance", "segment_id",
    "qp_modified", "infeasible",
];

pub const FIELD_COLUMNS: [&str; 6] = ["x", "y", "chi_x", "chi_y", "e", "segment_id"];

pub const FIT_COLUMNS: [&str; 6] = ["segment", "harmonics", "n_points", "rms_residual", "max_residual", "condition_estimate"];

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn b(x: bool) -> &'static str {
    if x {
        "1"
    } else {
        "0"
    }
}

/// `#`-prefixed lines naming the scenario, its hash, the seed and the
/// parameters, shared by every output table.
pub fn metadata(ls: &LoadedScenario, command: &str) -> Vec<String> {
    let s = &ls.scenario;
    let g = s.guidance.params();
    let r = &s.robot;
    let mut m = vec![
        format!("encircle {command}"),
        format!("scenario = {}", ls.source_path.display()),
        format!("scenario_sha256 = {}", ls.hash),
        format!("seed = {}", s.seed),
        format!("dt = {} t_end = {}", s.dt, s.t_end),
        format!(
            "guidance k = {} v_d = {} e_d = {} error = {:?} eps_tau = {} escape_speed = {}",
            g.k, g.v_d, g.e_d, g.error_sign, g.eps_tau, g.escape_speed
        ),
        format!("robot l = {} d = {} r_b = {} v_m = {} alpha = {}", r.l, r.d, r.r_b, r.v_m, s.cbf.alpha),
    ];
    for o in &ls.world.obstacles {
        m.push(format!(
            "obstacle center = ({}, {}) raw_radius = {} inflated_radius = {}",
            o.center.x, o.center.y, o.raw_radius, o.inflated_radius
        ));
    }
    m
}

fn table(meta: &[String], columns: &[&str], rows: impl Iterator<Item = String>) -> String {
    let mut out = String::new();
    for m in meta {
        let _ = writeln!(out, "# {m}");
    }
    out.push_str(&columns.join(" "));
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let p = dir.join(name);
    fs::write(&p, contents).map_err(|e| CliError::io(&p, e))?;
    Ok(p)
}

pub fn fit_table(ls: &LoadedScenario) -> String {
    let mut meta = metadata(ls, "fit");
    for g in ls.world.boundary.cutoff_gaps() {
        meta.push(format!("cutoff_gap {} -> {} = {}", g.from, g.to, f(g.gap)));
    }
    let rows = ls.world.boundary.segments().iter().zip(&ls.fits).enumerate().map(|(i, (s, fit))| {
        let (n, rms, max, cond) = match fit {
            Some(r) => (r.n_points.to_string(), f(r.rms_residual), f(r.max_residual), f(r.condition_estimate)),
            None => ("0".into(), f(f64::NAN), f(f64::NAN), f(f64::NAN)),
        };
        format!("{i} {} {n} {rms} {max} {cond}", s.curve.harmonics())
    });
    table(&meta, &FIT_COLUMNS, rows)
}

pub fn curves_file(ls: &LoadedScenario) -> String {
    write_curves(&ls.world.boundary, &ls.fits, &metadata(ls, "fit"))
}

/// Writes `curves.toml` and `fit_report.txt`.
pub fn cmd_fit(ls: &LoadedScenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    Ok(vec![write(out, "curves.toml", &curves_file(ls))?, write(out, "fit_report.txt", &fit_table(ls))?])
}

/// Field samples on the scenario's grid, row-major in `y` then `x`.
/// Points where the field is undefined (the reference point itself) get NaN.
pub fn field_table(ls: &LoadedScenario) -> String {
    let grid = ls.field_grid();
    let params = ls.scenario.guidance.params();
    let n = grid.n;
    let mut meta = metadata(ls, "field");
    meta.push(format!("grid lo = ({}, {}) hi = ({}, {}) n = {n}", grid.lo[0], grid.lo[1], grid.hi[0], grid.hi[1]));
    let rows = (0..n).flat_map(move |j| (0..n).map(move |i| (i, j))).map(|(i, j)| {
        let t = |k: usize, lo: f64, hi: f64| lo + (hi - lo) * k as f64 / (n - 1) as f64;
        let p = Vec2::new(t(i, grid.lo[0], grid.hi[0]), t(j, grid.lo[1], grid.hi[1]));
        match vector_field(p, &ls.world.boundary, &params) {
            Ok(s) => format!("{} {} {} {} {} {}", f(p.x), f(p.y), f(s.chi.x), f(s.chi.y), f(s.e), s.segment_id),
            Err(_) => {
                let seg = ls.world.boundary.select(p).unwrap_or(usize::MAX);
                format!("{} {} {} {} {} {seg}", f(p.x), f(p.y), f(f64::NAN), f(f64::NAN), f(f64::NAN))
            }
        }
    });
    table(&meta, &FIELD_COLUMNS, rows)
}

pub fn cmd_field(ls: &LoadedScenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    Ok(vec![write(out, "field.txt", &field_table(ls))?])
}

pub fn trajectory_row(r: &StepRecord) -> String {
    let c = &r.command;
    format!(
        "{} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
        f(r.t),
        f(r.state.p.x),
        f(r.state.p.y),
        f(r.state.theta),
        f(r.x.x),
        f(r.x.y),
        f(r.e),
        f(c.v),
        f(c.omega),
        f(c.v_left),
        f(c.v_right),
        f(r.min_clearance),
        r.segment_id,
        b(r.qp_modified),
        b(r.infeasible)
    )
}

pub fn trajectory_table(ls: &LoadedScenario, records: &[StepRecord]) -> String {
    let every = ls.scenario.output.every;
    let last = records.len().saturating_sub(1);
    let rows = records
        .iter()
        .enumerate()
        .filter(move |(k, _)| k % every == 0 || *k == last)
        .map(|(_, r)| trajectory_row(r));
    table(&metadata(ls, "run"), &TRAJECTORY_COLUMNS, rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario_sha256: String,
    pub seed: u64,
    #[serde(flatten)]
    pub run: RunSummary,
    /// Per segment; NaN when the curve was loaded rather than fitted.
    pub fit_rms: Vec<f64>,
}

pub fn summary(ls: &LoadedScenario, records: &[StepRecord]) -> Summary {
    Summary {
        scenario_sha256: ls.hash.clone(),
        seed: ls.scenario.seed,
        run: summarize(records, ls.lap_center(), ls.scenario.output.converge_threshold),
        fit_rms: ls.fits.iter().map(|f| f.as_ref().map_or(f64::NAN, |r| r.rms_residual)).collect(),
    }
}

pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

/// Simulates, writes `trajectory.txt` and `summary.toml`, and reports an
/// infeasible QP as an error after the files are on disk.
pub fn cmd_run(ls: &LoadedScenario, out: &Path) -> Result<RunOutput, CliError> {
    let records = run(&ls.world, &ls.sim_config());
    let summary = summary(ls, &records);
    let files = vec![
        write(out, "trajectory.txt", &trajectory_table(ls, &records))?,
        write(out, "summary.toml", &toml::to_string(&summary).expect("summary is representable in TOML"))?,
    ];
    if let Some(t) = summary.run.infeasible_at {
        return Err(CliError::Infeasible { t });
    }
    Ok(RunOutput {
        records,
        summary,
        files,
    })
}

/// Human-readable validation report; loading already ran every check.
pub fn cmd_check(ls: &LoadedScenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ok {}", ls.source_path.display());
    let _ = writeln!(out, "scenario_sha256 {}", ls.hash);
    let _ = writeln!(out, "samples {}", ls.samples.len());
    for (i, (s, fit)) in ls.world.boundary.segments().iter().zip(&ls.fits).enumerate() {
        let c = &s.curve;
        let _ = write!(
            out,
            "segment {i} harmonics {} reference ({}, {}) winding {:?} halfplanes {}",
            c.harmonics(),
            c.reference().x,
            c.reference().y,
            s.winding,
            s.region.halfplanes.len()
        );
        if let Some(r) = fit {
            let _ = write!(out, " points {} rms {:.3e} condition {:.3e}", r.n_points, r.rms_residual, r.condition_estimate);
        }
        out.push('\n');
    }
    for g in ls.world.boundary.cutoff_gaps() {
        let _ = writeln!(out, "cutoff {} -> {} gap {:.3e}", g.from, g.to, g.gap);
    }
    for n in &ls.notices {
        let _ = writeln!(out, "notice {n}");
    }
    out
}
