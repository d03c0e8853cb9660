use thiserror::Error;

/// Errors raised by survey ingestion, the statistical tests and report building.
#[derive(Debug, Error)]
pub enum StatsError {
    #[error("line {line}: bad header, expected `participant_id,music_id,condition,survey,feature,score`, found `{found}`")]
    BadHeader { line: usize, found: String },

    #[error("line {line}: invalid condition `{value}` (expected A, B or C)")]
    InvalidCondition { line: usize, value: String },

    #[error("line {line}: invalid survey `{value}` (expected timbre, imagery or entertainment)")]
    InvalidSurvey { line: usize, value: String },

    #[error("line {line}: feature `{feature}` is not part of the {survey} vocabulary")]
    InvalidFeature {
        line: usize,
        survey: String,
        feature: String,
    },

    #[error("line {line}: score `{value}` outside the 1..7 Likert range")]
    ScoreOutOfRange { line: usize, value: String },

    #[error("line {line}: music id `{value}` outside 1..20")]
    InvalidMusicId { line: usize, value: String },

    #[error("line {line}: duplicate answer for ({key})")]
    DuplicateKey { line: usize, key: String },

    #[error("line {line}: expected 6 fields, found {found}")]
    WrongFieldCount { line: usize, found: usize },

    #[error("no answers for participant `{participant}` in cell {cell}")]
    MissingCell { participant: String, cell: String },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("all paired differences are zero")]
    AllZeroDifferences,

    #[error("design has {rows} rows but needs at least {needed} for {ivs} regressors")]
    TooFewObservations {
        rows: usize,
        ivs: usize,
        needed: usize,
    },

    #[error("design matrix is rank deficient (condition number {condition_number:.3e})")]
    RankDeficient { condition_number: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("coefficient {value} outside the open interval (-1, 1)")]
    CoefficientOutOfRange { value: f64 },

    #[error("sample size {value} must exceed 3")]
    SampleSizeTooSmall { value: usize },

    #[error("{context}: {source}")]
    Table {
        context: String,
        #[source]
        source: Box<StatsError>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl StatsError {
    /// Wraps an error with the table it was raised for.
    pub fn in_table(self, context: impl Into<String>) -> Self {
        StatsError::Table {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, StatsError>;
