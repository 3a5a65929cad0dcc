//! Fitted-curve files: the coefficients of every segment plus its region and
//! winding, as TOML. Floats are written in shortest round-trip form, so a
//! write/read cycle reproduces every number bit for bit.

use std::path::Path;

use encircle::boundary::RegionPredicate;
use encircle::{AngleDomain, BoundaryModel, FitReport, Segment, Winding};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, ValidationCode as Code};
use crate::scenario::{curve_from_parts, parse_toml, HalfPlaneSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveFile {
    #[serde(rename = "segment")]
    segments: Vec<CurveRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveRecord {
    harmonics: usize,
    reference: [f64; 2],
    winding: Winding,
    domain: AngleDomain,
    /// `[a_1, b_1, c_1, d_1, …, e, f]`
    coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rms_residual: Option<f64>,
    #[serde(default, rename = "halfplane", skip_serializing_if = "Vec::is_empty")]
    halfplanes: Vec<HalfPlaneSpec>,
}

pub fn write_curves(model: &BoundaryModel, fits: &[Option<FitReport>], header: &[String]) -> String {
    let file = CurveFile {
        segments: model
            .segments()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let c = &s.curve;
                CurveRecord {
                    harmonics: c.harmonics(),
                    reference: [c.reference().x, c.reference().y],
                    winding: s.winding,
                    domain: *c.domain(),
                    coeffs: c.coeffs().to_vec(),
                    rms_residual: fits.get(i).and_then(|f| f.as_ref()).map(|f| f.rms_residual),
                    halfplanes: s.region.halfplanes.iter().map(HalfPlaneSpec::from_halfplane).collect(),
                }
            })
            .collect(),
    };
    let mut out: String = header.iter().map(|h| format!("# {h}\n")).collect();
    out.push_str(&toml::to_string(&file).expect("curve file is always representable in TOML"));
    out
}

fn check_domain(seg: usize, d: &AngleDomain) -> Result<(), CliError> {
    if d.is_full() && d.hi == AngleDomain::full().hi {
        return Ok(());
    }
    match AngleDomain::new(d.lo, d.hi) {
        Ok(canon) if canon == *d => Ok(()),
        _ => Err(CliError::validation(
            Code::Curve,
            format!("segment {seg}: domain {{lo = {}, hi = {}, wraps = {}}} is not canonical", d.lo, d.hi, d.wraps),
        )),
    }
}

pub fn read_curves(text: &str, path: &Path) -> Result<BoundaryModel, CliError> {
    let file: CurveFile = parse_toml(text, path)?;
    if file.segments.is_empty() {
        return Err(CliError::validation(Code::Curve, "curve file has no segments"));
    }
    let mut segments = Vec::with_capacity(file.segments.len());
    for (i, r) in file.segments.into_iter().enumerate() {
        check_domain(i, &r.domain)?;
        if !r.coeffs.iter().chain(&r.reference).all(|c| c.is_finite()) {
            return Err(CliError::validation(Code::Curve, format!("segment {i}: non-finite coefficient")));
        }
        let curve = curve_from_parts(i, r.harmonics, r.coeffs, r.reference, r.domain)?;
        let region = RegionPredicate {
            halfplanes: r.halfplanes.iter().map(|h| h.to_halfplane()).collect::<Result<_, _>>()?,
        };
        segments.push(Segment {
            curve,
            region,
            winding: r.winding,
        });
    }
    Ok(BoundaryModel::new(segments))
}
