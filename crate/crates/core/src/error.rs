use thiserror::Error;

use crate::data::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("truncation mass numerically zero")]
    TruncationMassZero,
    #[error("singular system")]
    SingularSystem,
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },
    #[error("matrix not positive definite")]
    NotPositiveDefinite,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: non-numeric value `{value}`")]
    ParseCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: missing value")]
    MissingValue { row: usize, column: String },
    #[error("invalid dataset: {}", summarize(.0))]
    InvalidDataset(Vec<Violation>),
    #[error("no-observed-x: every covariate value is at or below the detection limit")]
    NoObservedX,
    #[error("degenerate split: fold {fold} has no observed covariate values")]
    DegenerateSplit { fold: usize },

    #[error("singular auxiliary design")]
    SingularAuxDesign,
    #[error("auxiliary MLE did not converge")]
    AuxNotConverged,
    #[error("Gehan loss unbounded - check censoring pattern")]
    GehanUnbounded,
    #[error("KM undefined: no uncensored residuals")]
    KmUndefined,
    #[error("h~ window empty for row {row}")]
    HtildeWindowEmpty { row: usize },
    #[error("auxiliary fit does not support this operation: {0}")]
    AuxKind(String),

    #[error("GEE did not converge")]
    GeeNotConverged,
    #[error("non-finite conditional mean at row {row}")]
    NonFiniteMean { row: usize },
    #[error("rank-deficient information")]
    RankDeficientInformation,
    #[error("auxiliary information singular")]
    AuxInfoSingular,
    #[error("SSCF fold failure in fold {fold}: {source}")]
    SscfFoldFailure {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("constraint matrix rank-deficient")]
    ConstraintRankDeficient,
    #[error("hidden truth unavailable; full-data fit needs a simulated dataset")]
    MissingTruth,

    #[error("config error: {0}")]
    Config(String),
}

fn summarize(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// I/O and file-format problems, as opposed to model or configuration failures.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv(_)
                | Error::MissingColumn(_)
                | Error::ParseCell { .. }
                | Error::MissingValue { .. }
        )
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_io() {
            1
        } else {
            2
        }
    }
}
