//! Core algorithms for pairing implicit-association tests with explicit
//! questionnaires and measuring how far the two respondent rankings diverge.
//!
//! The crate is organised along the measurement pipeline:
//!
//! - [`protocol`]: stimulus sets, the five-block session plan and response-log checks.
//! - [`scoring`]: block latency summaries and the standardized D-score.
//! - [`questionnaire`]: the question bank, valence coding, spread statistics and weighting.
//! - [`analysis`]: fractional ranks, Spearman/Pearson, outlier removal, reports and weight search.
//! - [`simulator`]: synthetic cohorts with a known latent attitude and misreporting shift.
//! - [`pipeline`]: glue that turns raw session data into an [`analysis::AnalysisReport`].

pub mod analysis;
pub mod pipeline;
pub mod protocol;
pub mod questionnaire;
mod respondent;
pub mod scoring;
pub mod simulator;

pub use analysis::{AnalysisReport, CohortEntry, Objective, OutlierPolicy};
pub use protocol::{
    build_session_plan, validate_response_log, PairingOrder, PlanConfig, SessionPlan, Side,
    StimulusSet, TrialRecord,
};
pub use questionnaire::{CodedResponse, QuestionBank, QuestionId, WeightScheme};
pub use respondent::{InvalidRespondentCode, RespondentCode};
pub use scoring::{DScore, ScoringPolicy, ScoringVariant};
