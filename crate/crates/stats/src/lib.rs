//! Statistics workbench for the Tailors listening study.
//!
//! Ingests Likert answers from the timbre, imagery and entertainment surveys
//! and produces the study's tables:
//!
//! - Kruskal-Wallis across the three listening conditions
//! - Wilcoxon signed-rank between condition pairs (participant x music pairs)
//! - OLS regressions on per-participant means (timbre -> imagery,
//!   imagery -> entertainment)
//! - Fisher z comparisons of regression coefficients between conditions
//!
//! ```text
//! CSV -> SurveyRecord -> participant means -> OLS -> Fisher
//!                     \-> paired scores    -> Wilcoxon / Kruskal-Wallis
//! ```

pub mod error;
pub mod fisher;
pub mod nonparametric;
pub mod regression;
pub mod report;
pub mod survey;

pub use error::{Result, StatsError};
pub use fisher::{fisher_compare, significance_stars, FisherComparison};
pub use nonparametric::{kruskal_wallis, wilcoxon_signed_rank, TestMethod, TestResult, WilcoxonResult};
pub use regression::{ols_fit, CoefficientRow, RegressionResult};
pub use report::{build_reports, ReportBundle, ReportOptions, WilcoxonPairing};
pub use survey::{
    aggregate_participant_means, load_survey_csv, parse_survey_csv, Condition, ParticipantMean,
    Survey, SurveyRecord,
};
