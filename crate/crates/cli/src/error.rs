use std::path::PathBuf;

use thiserror::Error;

/// Everything that can stop a subcommand. Each variant maps to one exit code
/// and each validation failure carries a stable machine-readable code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{code}: {detail}")]
    Validation { code: ValidationCode, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("QP infeasible at t = {t} s; robot stopped in place")]
    Infeasible { t: f64 },
}

impl CliError {
    pub fn validation(code: ValidationCode, detail: impl Into<String>) -> Self {
        CliError::Validation {
            code,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } => 2,
            CliError::Infeasible { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }

    /// Stable identifier printed on the first line of stderr.
    pub fn code(&self) -> String {
        match self {
            CliError::Parse { .. } => "E_PARSE".into(),
            CliError::Validation { code, .. } => format!("E_VALIDATION.{code}"),
            CliError::Io { .. } => "E_IO".into(),
            CliError::Infeasible { .. } => "E_INFEASIBLE".into(),
        }
    }
}

/// One code per documented scenario precondition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationCode {
    /// Boundary source fields are missing, conflicting or out of range.
    BoundarySource,
    /// A sample file line is not two finite numbers.
    SampleFormat,
    /// A segment has fewer samples than `2H+2`.
    TooFewPoints,
    /// Two samples of a segment share a polar angle about its reference.
    NotStarShaped,
    /// A sample coincides with its segment's reference point.
    ZeroRadius,
    /// The harmonic basis is numerically rank deficient on the samples.
    RankDeficient,
    /// `harmonics` is zero.
    ZeroHarmonics,
    /// An angle domain is empty or malformed.
    InvalidDomain,
    /// A sample is claimed by no segment.
    UnassignedSample,
    /// Segment regions leave part of the workspace uncovered or overlap in
    /// their interiors.
    Partition,
    /// Consecutive segments do not meet at their cut-off points.
    CutoffGap,
    /// A half-plane normal is zero or non-finite.
    HalfPlane,
    /// A stored curve is malformed (coefficient count, domain, winding).
    Curve,
    Guidance,
    Cbf,
    Robot,
    Obstacle,
    /// `dt`, `t_end` or the output decimation are out of range.
    Timing,
    /// Field grid spec is malformed.
    FieldGrid,
}

impl std::fmt::Display for ValidationCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}
