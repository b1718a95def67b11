use serde::{Deserialize, Serialize};

use super::correlation::{pearson, spearman, CorrelationError};
use super::rank::{fractional_rank, Direction};
use crate::RespondentCode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedRow {
    pub respondent: RespondentCode,
    pub d_score: f64,
    pub q_total: f64,
    pub iat_rank: f64,
    pub q_rank: f64,
}

impl PairedRow {
    pub fn rank_gap(&self) -> f64 {
        (self.iat_rank - self.q_rank).abs()
    }
}

/// Both instruments' scores and ranks over one respondent set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairedScores {
    pub rows: Vec<PairedRow>,
}

impl PairedScores {
    /// Ranks `(respondent, d_score, questionnaire_total)` triples.
    pub fn new(entries: impl IntoIterator<Item = (RespondentCode, f64, f64)>) -> Self {
        let entries: Vec<_> = entries.into_iter().collect();
        let d: Vec<f64> = entries.iter().map(|e| e.1).collect();
        let q: Vec<f64> = entries.iter().map(|e| e.2).collect();
        let iat_ranks = fractional_rank(&d, Direction::Ascending);
        let q_ranks = fractional_rank(&q, Direction::Descending);
        Self {
            rows: entries
                .into_iter()
                .enumerate()
                .map(|(i, (respondent, d_score, q_total))| PairedRow {
                    respondent,
                    d_score,
                    q_total,
                    iat_rank: iat_ranks[i],
                    q_rank: q_ranks[i],
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Re-ranked pairing over the respondents not in `removed`.
    pub fn without(&self, removed: &[RespondentCode]) -> Self {
        Self::new(
            self.rows
                .iter()
                .filter(|r| !removed.contains(&r.respondent))
                .map(|r| (r.respondent, r.d_score, r.q_total)),
        )
    }

    pub fn spearman(&self) -> Result<f64, CorrelationError> {
        let a: Vec<f64> = self.rows.iter().map(|r| r.iat_rank).collect();
        let b: Vec<f64> = self.rows.iter().map(|r| r.q_rank).collect();
        spearman(&a, &b)
    }

    /// Pearson correlation of the raw scores, oriented so that agreement
    /// between the instruments is positive.
    pub fn pearson(&self) -> Result<f64, CorrelationError> {
        let a: Vec<f64> = self.rows.iter().map(|r| -r.d_score).collect();
        let b: Vec<f64> = self.rows.iter().map(|r| r.q_total).collect();
        pearson(&a, &b)
    }
}

/// The `k` respondents with the largest rank gap, ties broken by code.
/// Asking for more than the cohort returns everyone.
pub fn find_outliers(paired: &PairedScores, k: usize) -> Vec<RespondentCode> {
    let mut rows: Vec<&PairedRow> = paired.rows.iter().collect();
    rows.sort_by(|a, b| {
        b.rank_gap()
            .total_cmp(&a.rank_gap())
            .then(a.respondent.cmp(&b.respondent))
    });
    rows.into_iter().take(k).map(|r| r.respondent).collect()
}
