//! Block latency summaries and the standardized D-score.
//!
//! The score is the difference between the mean latency of the block where
//! concept B shares a key with "good" and the block where concept A does,
//! divided by the population SD of every retained latency in both blocks.
//! Positive values mean the respondent was quicker when concept A was paired
//! with "good", i.e. an implicit preference for concept A.

use serde::{Deserialize, Serialize};

use crate::protocol::{PairingOrder, SessionPlan, TrialRecord};
use crate::RespondentCode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyPolicy {
    /// Latencies above this are discarded before scoring.
    pub ceiling_ms: f64,
    /// Latencies below this count towards the fast-responder flag.
    pub fast_ms: f64,
    /// Fraction of fast latencies above which a respondent is flagged.
    pub fast_fraction: f64,
}

impl Default for LatencyPolicy {
    fn default() -> Self {
        Self {
            ceiling_ms: 10_000.0,
            fast_ms: 300.0,
            fast_fraction: 0.10,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringVariant {
    /// Standardized difference of block means over all retained trials.
    #[default]
    Simple,
    /// As `Simple`, but error-trial latencies are replaced by the block's
    /// correct-trial mean plus a fixed penalty.
    Improved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoringPolicy {
    pub latency: LatencyPolicy,
    pub variant: ScoringVariant,
    pub error_penalty_ms: f64,
    /// Scores with `|value| <= neutral_band` are classified neutral.
    pub neutral_band: f64,
}

impl Default for ScoringPolicy {
    fn default() -> Self {
        Self {
            latency: LatencyPolicy::default(),
            variant: ScoringVariant::Simple,
            error_penalty_ms: 600.0,
            neutral_band: 0.15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockLatencySummary {
    pub block_index: u8,
    pub n_trials_used: usize,
    pub mean_ms: f64,
    /// Population SD of the retained latencies.
    pub sd_ms: f64,
    pub n_discarded: usize,
    pub n_errors: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    ProA,
    Neutral,
    ProB,
}

impl Classification {
    pub fn of(value: f64, neutral_band: f64) -> Self {
        if value.abs() <= neutral_band {
            Classification::Neutral
        } else if value > 0.0 {
            Classification::ProA
        } else {
            Classification::ProB
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DScore {
    pub respondent: RespondentCode,
    pub value: f64,
    pub variant: ScoringVariant,
    /// Scored block in which concept A was paired with "good".
    pub congruent_block: u8,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("block {0} is not a scored block")]
    NotScoredBlock(u8),
    #[error("records from blocks {0} and {1} mixed in one summary")]
    MixedBlocks(u8, u8),
    #[error("empty block: no retained trials in block {0}")]
    EmptyBlock(u8),
    #[error("expected summaries of blocks 3 and 5, got {0} and {1}")]
    WrongBlocks(u8, u8),
    #[error("degenerate latencies: pooled SD is zero")]
    DegenerateLatencies,
    #[error("no scores to summarise")]
    NoScores,
}

/// Summarises one scored block after applying the latency ceiling.
pub fn summarize_block(
    records: &[TrialRecord],
    policy: &ScoringPolicy,
) -> Result<BlockLatencySummary, ScoringError> {
    let Some(first) = records.first() else {
        return Err(ScoringError::EmptyBlock(0));
    };
    let block = first.block_index;
    if block != 3 && block != 5 {
        return Err(ScoringError::NotScoredBlock(block));
    }
    if let Some(other) = records.iter().find(|r| r.block_index != block) {
        return Err(ScoringError::MixedBlocks(block, other.block_index));
    }

    let (kept, discarded): (Vec<&TrialRecord>, Vec<&TrialRecord>) = records
        .iter()
        .partition(|r| r.latency_ms.is_finite() && r.latency_ms >= 0.0 && r.latency_ms <= policy.latency.ceiling_ms);
    if kept.is_empty() {
        return Err(ScoringError::EmptyBlock(block));
    }
    let n_errors = kept.iter().filter(|r| !r.correct).count();

    let latencies: Vec<f64> = match policy.variant {
        ScoringVariant::Simple => kept.iter().map(|r| r.latency_ms).collect(),
        ScoringVariant::Improved => {
            let correct: Vec<f64> = kept.iter().filter(|r| r.correct).map(|r| r.latency_ms).collect();
            let base = if correct.is_empty() {
                mean(kept.iter().map(|r| r.latency_ms))
            } else {
                mean(correct.iter().copied())
            };
            let replacement = base + policy.error_penalty_ms;
            kept.iter()
                .map(|r| if r.correct { r.latency_ms } else { replacement })
                .collect()
        }
    };

    let m = mean(latencies.iter().copied());
    let var = latencies.iter().map(|x| (x - m).powi(2)).sum::<f64>() / latencies.len() as f64;
    Ok(BlockLatencySummary {
        block_index: block,
        n_trials_used: latencies.len(),
        mean_ms: m,
        sd_ms: var.sqrt(),
        n_discarded: discarded.len(),
        n_errors,
    })
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

/// Population SD of the union of two summarised samples.
pub fn pooled_sd(a: &BlockLatencySummary, b: &BlockLatencySummary) -> f64 {
    let (na, nb) = (a.n_trials_used as f64, b.n_trials_used as f64);
    let n = na + nb;
    let grand = (na * a.mean_ms + nb * b.mean_ms) / n;
    let var = (na * (a.sd_ms.powi(2) + (a.mean_ms - grand).powi(2))
        + nb * (b.sd_ms.powi(2) + (b.mean_ms - grand).powi(2)))
        / n;
    var.max(0.0).sqrt()
}

pub fn compute_d_score(
    respondent: RespondentCode,
    block3: &BlockLatencySummary,
    block5: &BlockLatencySummary,
    pairing: PairingOrder,
    policy: &ScoringPolicy,
) -> Result<DScore, ScoringError> {
    if block3.block_index != 3 || block5.block_index != 5 {
        return Err(ScoringError::WrongBlocks(block3.block_index, block5.block_index));
    }
    if block3.n_trials_used == 0 {
        return Err(ScoringError::EmptyBlock(3));
    }
    if block5.n_trials_used == 0 {
        return Err(ScoringError::EmptyBlock(5));
    }
    let sd = pooled_sd(block3, block5);
    let scale = block3.mean_ms.abs().max(block5.mean_ms.abs()).max(1.0);
    if sd.is_nan() || sd <= scale * 1e-12 {
        return Err(ScoringError::DegenerateLatencies);
    }
    let (a_good, b_good) = match pairing {
        PairingOrder::AGoodFirst => (block3, block5),
        PairingOrder::BGoodFirst => (block5, block3),
    };
    let value = (b_good.mean_ms - a_good.mean_ms) / sd;
    Ok(DScore {
        respondent,
        value,
        variant: policy.variant,
        congruent_block: pairing.a_good_block(),
        classification: Classification::of(value, policy.neutral_band),
    })
}

/// Scores a full session log against its plan.
pub fn score_session(
    plan: &SessionPlan,
    records: &[TrialRecord],
    policy: &ScoringPolicy,
) -> Result<DScore, ScoringError> {
    let pick = |block: u8| -> Vec<TrialRecord> {
        records
            .iter()
            .filter(|r| r.block_index == block)
            .cloned()
            .collect()
    };
    let b3 = pick(3);
    let b5 = pick(5);
    if b3.is_empty() {
        return Err(ScoringError::EmptyBlock(3));
    }
    if b5.is_empty() {
        return Err(ScoringError::EmptyBlock(5));
    }
    let s3 = summarize_block(&b3, policy)?;
    let s5 = summarize_block(&b5, policy)?;
    compute_d_score(plan.respondent, &s3, &s5, plan.pairing_order, policy)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandCounts {
    pub pro_a: usize,
    pub neutral: usize,
    pub pro_b: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    /// Respondents ranked from highest score to lowest; ties by code.
    pub ranked: Vec<(RespondentCode, f64)>,
    pub bands: BandCounts,
    pub histogram: Vec<HistogramBin>,
}

/// Band counts, a fixed-width histogram and the descending ranking.
pub fn score_distribution(
    scores: &[DScore],
    neutral_band: f64,
    bin_width: f64,
) -> Result<ScoreDistribution, ScoringError> {
    if scores.is_empty() {
        return Err(ScoringError::NoScores);
    }
    let mut ranked: Vec<(RespondentCode, f64)> =
        scores.iter().map(|s| (s.respondent, s.value)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut bands = BandCounts::default();
    for s in scores {
        match Classification::of(s.value, neutral_band) {
            Classification::ProA => bands.pro_a += 1,
            Classification::Neutral => bands.neutral += 1,
            Classification::ProB => bands.pro_b += 1,
        }
    }

    let bin_width = if bin_width > 0.0 { bin_width } else { 0.25 };
    let lo = (ranked.last().unwrap().1 / bin_width).floor() as i64;
    let hi = (ranked[0].1 / bin_width).floor() as i64;
    let mut histogram: Vec<HistogramBin> = (lo..=hi)
        .map(|k| HistogramBin {
            lower: k as f64 * bin_width,
            upper: (k + 1) as f64 * bin_width,
            count: 0,
        })
        .collect();
    for &(_, v) in &ranked {
        let k = (v / bin_width).floor() as i64;
        histogram[(k - lo) as usize].count += 1;
    }

    Ok(ScoreDistribution {
        ranked,
        bands,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Side;
    use approx::assert_abs_diff_eq;

    fn rec(block: u8, latency: f64, correct: bool) -> TrialRecord {
        TrialRecord {
            block_index: block,
            trial_index: 0,
            stimulus: "x".into(),
            presented_at_ms: 0.0,
            response: Side::Left,
            latency_ms: latency,
            correct,
        }
    }

    fn block(block: u8, latencies: &[f64]) -> Vec<TrialRecord> {
        latencies.iter().map(|&l| rec(block, l, true)).collect()
    }

    fn summary(block_index: u8, n: usize, mean_ms: f64, sd_ms: f64) -> BlockLatencySummary {
        BlockLatencySummary {
            block_index,
            n_trials_used: n,
            mean_ms,
            sd_ms,
            n_discarded: 0,
            n_errors: 0,
        }
    }

    fn code() -> RespondentCode {
        RespondentCode::new(2024).unwrap()
    }

    #[test]
    fn summary_uses_population_sd() {
        let s = summarize_block(&block(3, &[500.0, 700.0, 600.0]), &ScoringPolicy::default()).unwrap();
        assert_abs_diff_eq!(s.mean_ms, 600.0, epsilon = 1e-12);
        // sqrt(((-100)^2 + 100^2 + 0) / 3)
        let oracle = (20_000.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(s.sd_ms, oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(s.sd_ms, 81.65, epsilon = 0.01);
        assert_eq!(s.n_errors, 0);
    }

    #[test]
    fn ceiling_discards() {
        let s = summarize_block(&block(5, &[500.0, 12_000.0, 700.0]), &ScoringPolicy::default()).unwrap();
        assert_eq!(s.n_discarded, 1);
        assert_eq!(s.n_trials_used + s.n_discarded, 3);
        assert_abs_diff_eq!(s.mean_ms, 600.0);
    }

    #[test]
    fn empty_and_unscored_blocks_rejected() {
        let policy = ScoringPolicy::default();
        assert!(matches!(summarize_block(&[], &policy), Err(ScoringError::EmptyBlock(_))));
        assert_eq!(
            summarize_block(&block(3, &[20_000.0]), &policy),
            Err(ScoringError::EmptyBlock(3))
        );
        assert_eq!(
            summarize_block(&block(2, &[600.0]), &policy),
            Err(ScoringError::NotScoredBlock(2))
        );
        let mut mixed = block(3, &[600.0]);
        mixed.push(rec(5, 600.0, true));
        assert_eq!(summarize_block(&mixed, &policy), Err(ScoringError::MixedBlocks(3, 5)));
    }

    #[test]
    fn improved_variant_penalises_errors() {
        let mut records = block(3, &[500.0, 700.0]);
        records.push(rec(3, 100.0, false));
        let simple = summarize_block(&records, &ScoringPolicy::default()).unwrap();
        let improved = summarize_block(
            &records,
            &ScoringPolicy {
                variant: ScoringVariant::Improved,
                ..ScoringPolicy::default()
            },
        )
        .unwrap();
        assert_eq!(simple.n_errors, 1);
        assert_abs_diff_eq!(simple.mean_ms, 1300.0 / 3.0, epsilon = 1e-9);
        // error replaced by 600 + 600
        assert_abs_diff_eq!(improved.mean_ms, (500.0 + 700.0 + 1200.0) / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn equal_means_give_neutral_zero() {
        let d = compute_d_score(
            code(),
            &summary(3, 40, 650.0, 100.0),
            &summary(5, 40, 650.0, 100.0),
            PairingOrder::AGoodFirst,
            &ScoringPolicy::default(),
        )
        .unwrap();
        assert_eq!(d.value, 0.0);
        assert_eq!(d.classification, Classification::Neutral);
    }

    #[test]
    fn standardized_difference_of_one() {
        // Equal-size blocks with means 600 and 800: pooled variance is the
        // within variance plus (100)^2, so a within SD of sqrt(30000) gives
        // a pooled SD of exactly 200.
        let within = 30_000.0f64.sqrt();
        let s3 = summary(3, 40, 600.0, within);
        let s5 = summary(5, 40, 800.0, within);
        assert_abs_diff_eq!(pooled_sd(&s3, &s5), 200.0, epsilon = 1e-9);
        let d = compute_d_score(code(), &s3, &s5, PairingOrder::AGoodFirst, &ScoringPolicy::default())
            .unwrap();
        assert_abs_diff_eq!(d.value, 1.0, epsilon = 1e-12);
        assert_eq!(d.congruent_block, 3);
        assert_eq!(d.classification, Classification::ProA);

        let flipped =
            compute_d_score(code(), &s3, &s5, PairingOrder::BGoodFirst, &ScoringPolicy::default())
                .unwrap();
        assert_eq!(flipped.value, -d.value);
        assert_eq!(flipped.congruent_block, 5);
        assert_eq!(flipped.classification, Classification::ProB);
    }

    #[test]
    fn pooled_sd_matches_raw_latencies() {
        let b3 = [520.0, 610.0, 700.0, 455.0];
        let b5 = [800.0, 760.0, 910.0];
        let policy = ScoringPolicy::default();
        let s3 = summarize_block(&block(3, &b3), &policy).unwrap();
        let s5 = summarize_block(&block(5, &b5), &policy).unwrap();
        let all: Vec<f64> = b3.iter().chain(b5.iter()).copied().collect();
        let m = all.iter().sum::<f64>() / all.len() as f64;
        let sd = (all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / all.len() as f64).sqrt();
        assert_abs_diff_eq!(pooled_sd(&s3, &s5), sd, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_latencies_rejected() {
        let err = compute_d_score(
            code(),
            &summary(3, 10, 600.0, 0.0),
            &summary(5, 10, 600.0, 0.0),
            PairingOrder::AGoodFirst,
            &ScoringPolicy::default(),
        )
        .unwrap_err();
        assert_eq!(err, ScoringError::DegenerateLatencies);
    }

    #[test]
    fn summaries_must_be_blocks_three_and_five() {
        let s = summary(3, 10, 600.0, 10.0);
        assert_eq!(
            compute_d_score(code(), &s, &s, PairingOrder::AGoodFirst, &ScoringPolicy::default()),
            Err(ScoringError::WrongBlocks(3, 3))
        );
    }

    fn dscore(code: u16, value: f64) -> DScore {
        DScore {
            respondent: RespondentCode::new(code).unwrap(),
            value,
            variant: ScoringVariant::Simple,
            congruent_block: 3,
            classification: Classification::of(value, 0.15),
        }
    }

    #[test]
    fn distribution_bands() {
        let zeros: Vec<_> = (0..5).map(|i| dscore(1000 + i, 0.0)).collect();
        let d = score_distribution(&zeros, 0.15, 0.25).unwrap();
        assert_eq!(d.bands, BandCounts { pro_a: 0, neutral: 5, pro_b: 0 });

        let three = [dscore(1001, -1.0), dscore(1002, 0.0), dscore(1003, 1.0)];
        let d = score_distribution(&three, 0.15, 0.5).unwrap();
        assert_eq!(d.bands, BandCounts { pro_a: 1, neutral: 1, pro_b: 1 });
        let order: Vec<f64> = d.ranked.iter().map(|r| r.1).collect();
        assert_eq!(order, vec![1.0, 0.0, -1.0]);
        assert_eq!(d.histogram.iter().map(|b| b.count).sum::<usize>(), 3);
        assert_eq!(d.histogram.first().unwrap().lower, -1.0);
        assert_eq!(d.histogram.last().unwrap().upper, 1.5);
    }

    #[test]
    fn band_edges_are_neutral() {
        assert_eq!(Classification::of(0.15, 0.15), Classification::Neutral);
        assert_eq!(Classification::of(-0.15, 0.15), Classification::Neutral);
        assert_eq!(Classification::of(0.1500001, 0.15), Classification::ProA);
    }

    #[test]
    fn empty_distribution_rejected() {
        assert_eq!(score_distribution(&[], 0.15, 0.25), Err(ScoringError::NoScores));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn latencies() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(200.0f64..3000.0, 3..30)
        }

        fn d_of(b3: &[f64], b5: &[f64]) -> f64 {
            let policy = ScoringPolicy {
                latency: LatencyPolicy {
                    ceiling_ms: f64::INFINITY,
                    ..LatencyPolicy::default()
                },
                ..ScoringPolicy::default()
            };
            let s3 = summarize_block(&block(3, b3), &policy).unwrap();
            let s5 = summarize_block(&block(5, b5), &policy).unwrap();
            compute_d_score(code(), &s3, &s5, PairingOrder::AGoodFirst, &policy)
                .unwrap()
                .value
        }

        proptest! {
            #[test]
            fn shift_invariant(b3 in latencies(), b5 in latencies(), c in -150.0f64..5000.0) {
                let d = d_of(&b3, &b5);
                let s3: Vec<f64> = b3.iter().map(|x| x + c).collect();
                let s5: Vec<f64> = b5.iter().map(|x| x + c).collect();
                prop_assert!((d - d_of(&s3, &s5)).abs() < 1e-9);
            }

            #[test]
            fn scale_invariant(b3 in latencies(), b5 in latencies(), k in 0.05f64..20.0) {
                let d = d_of(&b3, &b5);
                let s3: Vec<f64> = b3.iter().map(|x| x * k).collect();
                let s5: Vec<f64> = b5.iter().map(|x| x * k).collect();
                prop_assert!((d - d_of(&s3, &s5)).abs() < 1e-9);
            }

            #[test]
            fn antisymmetric(b3 in latencies(), b5 in latencies()) {
                prop_assert!((d_of(&b3, &b5) + d_of(&b5, &b3)).abs() < 1e-9);
            }

            #[test]
            fn ranking_ignores_band(values in prop::collection::vec(-2.0f64..2.0, 1..20), band in 0.0f64..1.0) {
                let scores: Vec<DScore> = values.iter().enumerate().map(|(i, &v)| dscore(1000 + i as u16, v)).collect();
                let a = score_distribution(&scores, 0.15, 0.25).unwrap();
                let b = score_distribution(&scores, band, 0.25).unwrap();
                prop_assert_eq!(a.ranked, b.ranked);
            }
        }
    }
}
