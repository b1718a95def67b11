use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{CodedResponse, QuestionId, QuestionStats, QuestionnaireError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Uniform,
    VarianceRank,
    ReverseDeviationRank,
    Custom,
}

/// Per-question weights, kept in question order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightScheme {
    pub kind: SchemeKind,
    pub weights: Vec<(QuestionId, f64)>,
}

impl WeightScheme {
    fn checked(kind: SchemeKind, weights: Vec<(QuestionId, f64)>) -> Result<Self, QuestionnaireError> {
        if weights.is_empty() {
            return Err(QuestionnaireError::InvalidWeights("no questions".into()));
        }
        for (i, (id, w)) in weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(QuestionnaireError::InvalidWeights(format!(
                    "weight for {id} must be finite and non-negative, got {w}"
                )));
            }
            if weights[..i].iter().any(|(other, _)| other == id) {
                return Err(QuestionnaireError::InvalidWeights(format!("{id} weighted twice")));
            }
        }
        if weights.iter().all(|(_, w)| *w == 0.0) {
            return Err(QuestionnaireError::InvalidWeights("all weights are zero".into()));
        }
        Ok(Self { kind, weights })
    }

    pub fn uniform(questions: &[QuestionId]) -> Result<Self, QuestionnaireError> {
        Self::checked(
            SchemeKind::Uniform,
            questions.iter().map(|q| (q.clone(), 1.0)).collect(),
        )
    }

    pub fn custom(weights: Vec<(QuestionId, f64)>) -> Result<Self, QuestionnaireError> {
        Self::checked(SchemeKind::Custom, weights)
    }

    /// Pairs a plain weight list with the questions in order.
    pub fn positional(questions: &[QuestionId], weights: &[f64]) -> Result<Self, QuestionnaireError> {
        if questions.len() != weights.len() {
            return Err(QuestionnaireError::InvalidWeights(format!(
                "{} weights for {} questions",
                weights.len(),
                questions.len()
            )));
        }
        Self::custom(questions.iter().cloned().zip(weights.iter().copied()).collect())
    }

    /// Hand-tuned weights for Q1-Q5, Q9, Q10, in that order.
    pub const MANUAL_UK_IRELAND: [f64; 7] = [1.0, 0.1, 0.1, 2.0, 11.0, 1.5, 0.2];

    pub fn weight(&self, question: &QuestionId) -> Option<f64> {
        self.weights
            .iter()
            .find(|(id, _)| id == question)
            .map(|(_, w)| *w)
    }

    pub fn questions(&self) -> impl Iterator<Item = &QuestionId> {
        self.weights.iter().map(|(id, _)| id)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, QuestionnaireError> {
        Self::checked(
            self.kind,
            self.weights.iter().map(|(id, w)| (id.clone(), w * factor)).collect(),
        )
    }

    pub fn describe(&self) -> String {
        match self.kind {
            SchemeKind::Uniform => "uniform".into(),
            SchemeKind::VarianceRank => "variance-rank".into(),
            SchemeKind::ReverseDeviationRank => "reverse-deviation-rank".into(),
            SchemeKind::Custom => {
                let mut s = String::from("custom (");
                for (i, (id, w)) in self.weights.iter().enumerate() {
                    if i > 0 {
                        s.push_str(", ");
                    }
                    let _ = write!(s, "{id}: {w}");
                }
                s.push(')');
                s
            }
        }
    }
}

/// Weighted sum of a respondent's codes.
pub fn total_score(response: &CodedResponse, scheme: &WeightScheme) -> Result<f64, QuestionnaireError> {
    response.answers.iter().try_fold(0.0, |acc, (id, &code)| {
        let w = scheme
            .weight(id)
            .ok_or_else(|| QuestionnaireError::MissingWeight(id.clone()))?;
        Ok(acc + w * f64::from(code))
    })
}

/// Uses a question's rank number directly as its weight.
pub fn derive_weight_scheme(
    stats: &[QuestionStats],
    kind: SchemeKind,
) -> Result<WeightScheme, QuestionnaireError> {
    let pick = |f: fn(&QuestionStats) -> f64| -> Vec<(QuestionId, f64)> {
        stats.iter().map(|s| (s.question_id.clone(), f(s))).collect()
    };
    let weights = match kind {
        SchemeKind::Uniform => pick(|_| 1.0),
        SchemeKind::VarianceRank => pick(|s| s.variance_rank),
        SchemeKind::ReverseDeviationRank => pick(|s| s.reverse_deviation_rank),
        SchemeKind::Custom => {
            return Err(QuestionnaireError::InvalidWeights(
                "custom schemes cannot be derived from statistics".into(),
            ))
        }
    };
    WeightScheme::checked(kind, weights)
}
