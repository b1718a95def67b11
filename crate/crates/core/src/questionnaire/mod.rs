//! The explicit instrument: question bank, valence coding, answer-spread
//! statistics and question weighting.
//!
//! Codes run from -2 to 2. Negative codes lean towards concept A, positive
//! codes towards concept B and 0 is neutral, so a higher weighted total means
//! a respondent who is further on the concept-B side.

mod bank;
mod cohort_csv;
mod stats;
mod weights;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use bank::{AnswerOption, Question, QuestionBank};
pub use cohort_csv::{read_cohort_csv, write_cohort_csv};
pub use stats::{question_stats, stats_from_counts, QuestionStats};
pub use weights::{derive_weight_scheme, total_score, SchemeKind, WeightScheme};

use crate::RespondentCode;

/// Legal valence codes.
pub const CODES: [i8; 5] = [-2, -1, 0, 1, 2];

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionId(pub String);

impl QuestionId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for QuestionId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// One respondent's coded answers to the questions used in analysis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedResponse {
    pub respondent: RespondentCode,
    pub answers: BTreeMap<QuestionId, i8>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuestionnaireError {
    #[error("{question}: `{answer}` is not one of the answer options")]
    UnknownOption { question: QuestionId, answer: String },
    #[error("{question}: no answer given")]
    MissingAnswer { question: QuestionId },
    #[error("{question}: code {code} is not a legal option code")]
    IllegalCode { question: QuestionId, code: i8 },
    #[error("unknown question `{0}`")]
    UnknownQuestion(QuestionId),
    #[error("question `{0}` defined twice")]
    DuplicateQuestion(QuestionId),
    #[error("{question}: invalid option set ({reason})")]
    InvalidOptions { question: QuestionId, reason: String },
    #[error("weight scheme has no weight for {0}")]
    MissingWeight(QuestionId),
    #[error("invalid weight scheme: {0}")]
    InvalidWeights(String),
    #[error("cohort is empty")]
    EmptyCohort,
    #[error("question bank: {0}")]
    BankFormat(String),
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("missing column {0}")]
    MissingColumn(QuestionId),
}

/// Maps option texts to codes. Questions outside the analysis set are dropped.
pub fn code_answers(
    bank: &QuestionBank,
    respondent: RespondentCode,
    raw: &BTreeMap<String, String>,
) -> Result<CodedResponse, QuestionnaireError> {
    for id in raw.keys() {
        if bank.question(id).is_none() {
            return Err(QuestionnaireError::UnknownQuestion(QuestionId::new(id.clone())));
        }
    }
    let mut answers = BTreeMap::new();
    for q in bank.analysed() {
        let text = raw
            .get(q.id.as_str())
            .ok_or_else(|| QuestionnaireError::MissingAnswer {
                question: q.id.clone(),
            })?;
        let code = q
            .code_for(text)
            .ok_or_else(|| QuestionnaireError::UnknownOption {
                question: q.id.clone(),
                answer: text.clone(),
            })?;
        answers.insert(q.id.clone(), code);
    }
    Ok(CodedResponse {
        respondent,
        answers,
    })
}

/// Inverse of [`code_answers`] for the analysed questions.
pub fn decode_answers(
    bank: &QuestionBank,
    response: &CodedResponse,
) -> Result<BTreeMap<String, String>, QuestionnaireError> {
    response
        .answers
        .iter()
        .map(|(id, &code)| {
            let q = bank
                .question(id.as_str())
                .ok_or_else(|| QuestionnaireError::UnknownQuestion(id.clone()))?;
            let text = q
                .text_for(code)
                .ok_or_else(|| QuestionnaireError::IllegalCode {
                    question: id.clone(),
                    code,
                })?;
            Ok((id.0.clone(), text.to_string()))
        })
        .collect()
}

impl CodedResponse {
    /// Every analysed question answered exactly once with a legal code.
    pub fn validate(&self, bank: &QuestionBank) -> Result<(), QuestionnaireError> {
        for id in self.answers.keys() {
            match bank.question(id.as_str()) {
                Some(q) if q.in_analysis => {}
                _ => return Err(QuestionnaireError::UnknownQuestion(id.clone())),
            }
        }
        for q in bank.analysed() {
            let code = *self
                .answers
                .get(&q.id)
                .ok_or_else(|| QuestionnaireError::MissingAnswer {
                    question: q.id.clone(),
                })?;
            if q.text_for(code).is_none() {
                return Err(QuestionnaireError::IllegalCode {
                    question: q.id.clone(),
                    code,
                });
            }
        }
        Ok(())
    }
}
