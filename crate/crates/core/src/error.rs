use thiserror::Error;

/// Errors raised by the reconstruction library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("near-singular system in {stage} (condition estimate {condition:.3e})")]
    NearSingular { stage: &'static str, condition: f64 },

    #[error("iteration did not converge in {stage} (final residual {residual:.3e})")]
    NoConvergence { stage: &'static str, residual: f64 },

    #[error("energy {energy} is (numerically) a Dirichlet eigenvalue: {detail}")]
    ResonantEnergy { energy: f64, detail: String },

    #[error("grid too coarse: self-convergence defect {defect:.3e} exceeds {tolerance:.3e}")]
    GridTooCoarse { defect: f64, tolerance: f64 },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("bad magic: expected one of {expected}, found {found:?}")]
    BadMagic { expected: &'static str, found: [u8; 4] },

    #[error("unsupported container version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("truncated file: needed {needed} bytes, found {found}")]
    TruncatedFile { needed: usize, found: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage} at E = {energy}: {source}")]
    InStage { stage: &'static str, energy: f64, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// The underlying error with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::InStage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn in_stage(self, stage: &'static str, energy: f64) -> Error {
        Error::InStage { stage, energy, source: Box::new(self) }
    }

    /// True for errors that signal a numerical failure (as opposed to IO or
    /// configuration problems).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NearSingular { .. }
                | Error::NoConvergence { .. }
                | Error::ResonantEnergy { .. }
                | Error::GridTooCoarse { .. }
                | Error::Domain(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self.root(),
            Error::Io(_) | Error::BadMagic { .. } | Error::VersionMismatch { .. } | Error::TruncatedFile { .. }
        )
    }

    /// Process exit code: 3 numerical, 4 IO, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_io() {
            4
        } else if self.is_numerical() {
            3
        } else {
            2
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
