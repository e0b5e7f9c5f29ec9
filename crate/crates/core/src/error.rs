use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("polygon generation failed after {attempts} attempts ({reason})")]
    GenerationFailed { attempts: usize, reason: String },
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("no suitable {condition} edit site: {reason}")]
    NoSuitableSite { condition: String, reason: String },
    #[error("relative edit area {0} outside (0, 0.15]")]
    InvalidRelArea(f64),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("{path}: malformed mask ({reason})")]
    MalformedMask { path: PathBuf, reason: String },

    #[error("{path}: unsupported manifest schema version {found} (expected {expected})")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("manifest references missing files: {}", display_paths(.0))]
    MissingFiles(Vec<PathBuf>),

    #[error("missing external mask for trial {trial_id}: {path}")]
    MissingExternalMask { trial_id: String, path: PathBuf },

    #[error("{path}: mask is {found_w}x{found_h}, battery resolution is {expected_w}x{expected_h}")]
    DimensionMismatch {
        path: PathBuf,
        found_w: u32,
        found_h: u32,
        expected_w: u32,
        expected_h: u32,
    },

    #[error("epoch {epoch}: {source}")]
    Epoch {
        epoch: String,
        #[source]
        source: Box<Error>,
    },

    #[error("RAC undefined: edited segment area is zero")]
    Domain,

    #[error("missing condition {0}")]
    MissingCondition(String),

    #[error("{0}")]
    Invalid(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

fn display_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line tool: 3 for generation
    /// failures, 4 for IO and file-contract violations, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Geometry(GeometryError::GenerationFailed { .. })
            | Error::Geometry(GeometryError::NoSuitableSite { .. }) => 3,
            Error::Geometry(_) | Error::Invalid(_) => 2,
            Error::Epoch { source, .. } => source.exit_code(),
            _ => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
