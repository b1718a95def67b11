use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CodedResponse, QuestionBank, QuestionId, QuestionnaireError};
use crate::analysis::{fractional_rank, Direction};

/// How one question's answers spread over its codes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionStats {
    pub question_id: QuestionId,
    /// Respondents per code, including codes nobody chose.
    pub counts: BTreeMap<i8, usize>,
    /// Population variance of the coded answers.
    pub variance: f64,
    pub deviation: f64,
    /// Rank 1 = largest variance; ties share the mean rank.
    pub variance_rank: f64,
    /// Rank 1 = largest 1/SD (smallest spread); SD 0 counts as 1/SD = inf.
    pub reverse_deviation_rank: f64,
}

impl QuestionStats {
    pub fn cohort_size(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Per-question spread statistics over the analysed questions, in bank order.
pub fn question_stats(
    bank: &QuestionBank,
    cohort: &[CodedResponse],
) -> Result<Vec<QuestionStats>, QuestionnaireError> {
    if cohort.is_empty() {
        return Err(QuestionnaireError::EmptyCohort);
    }
    let mut tallies = Vec::new();
    for q in bank.analysed() {
        let mut counts: BTreeMap<i8, usize> = q.codes().map(|c| (c, 0)).collect();
        for response in cohort {
            let code = *response
                .answers
                .get(&q.id)
                .ok_or_else(|| QuestionnaireError::MissingAnswer {
                    question: q.id.clone(),
                })?;
            *counts
                .get_mut(&code)
                .ok_or_else(|| QuestionnaireError::IllegalCode {
                    question: q.id.clone(),
                    code,
                })? += 1;
        }
        tallies.push((q.id.clone(), counts));
    }
    Ok(stats_from_counts(tallies))
}

/// Spread statistics from per-code answer counts.
///
/// Variance is evaluated from integer moments, so questions whose count
/// vectors are mirror images get bit-identical variances and tie exactly.
pub fn stats_from_counts(tallies: Vec<(QuestionId, BTreeMap<i8, usize>)>) -> Vec<QuestionStats> {
    let variances: Vec<f64> = tallies
        .iter()
        .map(|(_, counts)| {
            let (mut n, mut sum, mut sum_sq) = (0i64, 0i64, 0i64);
            for (&code, &count) in counts {
                let (c, k) = (i64::from(code), count as i64);
                n += k;
                sum += c * k;
                sum_sq += c * c * k;
            }
            if n == 0 {
                0.0
            } else {
                (n * sum_sq - sum * sum) as f64 / (n * n) as f64
            }
        })
        .collect();
    let reverse_dev: Vec<f64> = variances.iter().map(|v| 1.0 / v.sqrt()).collect();
    let variance_ranks = fractional_rank(&variances, Direction::Descending);
    let reverse_ranks = fractional_rank(&reverse_dev, Direction::Descending);

    tallies
        .into_iter()
        .enumerate()
        .map(|(i, (question_id, counts))| QuestionStats {
            question_id,
            counts,
            variance: variances[i],
            deviation: variances[i].sqrt(),
            variance_rank: variance_ranks[i],
            reverse_deviation_rank: reverse_ranks[i],
        })
        .collect()
}
