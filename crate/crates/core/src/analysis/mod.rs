//! Pairs implicit and explicit scores, ranks them, removes the respondents
//! whose two rankings disagree most, and measures agreement under different
//! question-weighting schemes.
//!
//! Both rankings put the most concept-B-leaning respondent at rank 1: the
//! IAT ranking orders by ascending D-score (positive D leans to concept A)
//! and the questionnaire ranking orders by descending weighted total.

mod correlation;
mod optimize;
mod paired;
mod rank;
mod report;

pub use correlation::{pearson, spearman, spearman_of_scores, CorrelationError};
pub use optimize::{optimize_weights, Objective, OptimizedWeights, SearchConfig};
pub use paired::{find_outliers, PairedRow, PairedScores};
pub use rank::{fractional_rank, Direction};
pub use report::{
    compact_layout, run_report, run_report_rows, AnalysisReport, CohortEntry, OutlierPolicy,
    ReportRow, RowSpec,
};

use crate::questionnaire::QuestionnaireError;
use crate::RespondentCode;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Questionnaire(#[from] QuestionnaireError),
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
    #[error("at least {needed} respondents required, got {got}")]
    InsufficientRespondents { needed: usize, got: usize },
    #[error("respondent {0} appears twice")]
    DuplicateRespondent(RespondentCode),
    #[error("no signal: the objective is undefined under every weighting tried")]
    NoSignal,
    #[error("invalid search configuration: {0}")]
    InvalidSearch(String),
}
