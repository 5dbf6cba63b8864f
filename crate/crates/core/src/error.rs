use chrono::NaiveDate;
use thiserror::Error;

/// Errors raised anywhere in the connectedness pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: cannot parse date {value:?} with format {format:?}")]
    BadDate { line: u64, value: String, format: String },

    #[error("line {line}, series {series}: price {value:?} is not a strictly positive number")]
    BadPrice { line: u64, series: String, value: String },

    #[error("column {0:?} not found in input header")]
    MissingColumn(String),

    #[error("duplicate column or label {0:?}")]
    DuplicateLabel(String),

    #[error("date {0} appears more than once")]
    DuplicateDate(NaiveDate),

    #[error("dates must be strictly increasing ({prev} is followed by {next})")]
    UnsortedDates { prev: NaiveDate, next: NaiveDate },

    #[error("no dates remain after aligning the selected series")]
    EmptyIntersection,

    #[error("series {series}: {gap} consecutive missing rows ending {date} exceed forward-fill limit {max_gap}")]
    GapExceeded { series: String, gap: usize, max_gap: usize, date: NaiveDate },

    #[error("insufficient data: need at least {required} observations, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    #[error("series {0} is constant")]
    ConstantSeries(String),

    #[error("non-finite value in series {0}")]
    NonFinite(String),

    #[error("rank deficient design: singular value ratio {ratio:.3e} below tolerance {tolerance:.0e}")]
    RankDeficient { ratio: f64, tolerance: f64 },

    #[error("predictors {first} and {second} are collinear")]
    Collinear { first: String, second: String },

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero residual variance in equation {0}")]
    ZeroVariance(String),

    #[error("equation {index} ({label}): {source}")]
    Equation {
        index: usize,
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("breakpoint {date} outside sample range {first}..={last}")]
    BreakpointOutOfRange { date: NaiveDate, first: NaiveDate, last: NaiveDate },

    #[error("segment {0:?} is empty")]
    EmptySegment(String),

    #[error("all {0} rolling windows were degenerate")]
    AllWindowsDegenerate(usize),

    #[error("unstable VAR specification: companion spectral radius {0:.4} >= 1")]
    Unstable(f64),

    #[error("unknown format {0:?}")]
    UnknownFormat(String),

    #[error("malformed table: {0}")]
    MalformedTable(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn in_equation(self, index: usize, label: &str) -> Self {
        Error::Equation { index, label: label.to_string(), source: Box::new(self) }
    }
}
