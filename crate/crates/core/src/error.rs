use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants split into two families: input/validation problems and numerical
/// failures. The CLI maps them onto exit codes 1 and 2 via [`Error::is_numerical`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("surprises are collinear: |r22| = {r22:e} is below 1e-12 x |r11| = {r11:e}")]
    CollinearSurprises { r11: f64, r22: f64 },

    #[error("sign restrictions cannot be satisfied: {0}")]
    IdentificationFailure(String),

    #[error("weight w = {0} must lie strictly inside (0, 1)")]
    WeightOutOfRange(f64),

    #[error("variance ratio {0} must lie in (0, 1]")]
    RatioOutOfRange(f64),

    #[error("angle {alpha} lies outside the admissible interval ({lo}, {hi})")]
    AngleOutOfRange { alpha: f64, lo: f64, hi: f64 },

    #[error("unbalanced panel, missing cells: {}", format_cells(.0))]
    UnbalancedPanel(Vec<(String, String, String)>),

    #[error("duplicate cell ({0}, {1}, {2})")]
    DuplicateCell(String, String, String),

    #[error("non-positive value {value} for log-transformed variable {variable} ({country}, {date})")]
    NonPositiveLog {
        country: String,
        date: String,
        variable: String,
        value: f64,
    },

    #[error("unparseable date {0:?}")]
    BadDate(String),

    #[error("dates are not contiguous months: gap after {0}")]
    NonContiguousDates(String),

    #[error("shock dated {0} falls after the panel end {1}")]
    ShockAfterPanel(String, String),

    #[error("unknown country {0:?}")]
    UnknownCountry(String),

    #[error("unknown variable {0:?}")]
    UnknownVariable(String),

    #[error("insufficient observations: {0}")]
    InsufficientObservations(String),

    #[error("rank-deficient design (condition number {cond:e}): {what}")]
    RankDeficient { what: String, cond: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("{rejected} of {total} posterior draws rejected, above the 1% budget")]
    TooManyRejections { rejected: usize, total: usize },

    #[error("collinear regressors: {0}")]
    Collinear(String),

    #[error("unstable VAR: spectral radius {0} >= 1")]
    Unstable(f64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_cells(cells: &[(String, String, String)]) -> String {
    cells
        .iter()
        .map(|(c, d, v)| format!("({c}, {d}, {v})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::CollinearSurprises { .. }
                | Error::IdentificationFailure(_)
                | Error::RankDeficient { .. }
                | Error::NotPositiveDefinite(_)
                | Error::TooManyRejections { .. }
                | Error::Collinear(_)
                | Error::Unstable(_)
                | Error::Degenerate(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn open_csv(path: &std::path::Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Reader::from_reader(file))
}
