//! Raw sessions in, analysis report out.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    optimize_weights, run_report_rows, AnalysisError, AnalysisReport, CohortEntry, Objective,
    OptimizedWeights, OutlierPolicy, RowSpec, SearchConfig,
};
use crate::protocol::{SessionPlan, TrialRecord};
use crate::questionnaire::{
    derive_weight_scheme, question_stats, CodedResponse, QuestionBank, QuestionId,
    QuestionStats, QuestionnaireError, SchemeKind, WeightScheme,
};
use crate::scoring::{score_session, ScoringPolicy};
use crate::RespondentCode;

/// Custom weights, either listed in question order or keyed by question id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CustomWeights {
    Positional(Vec<f64>),
    Named(BTreeMap<String, f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SchemeSpec {
    Uniform,
    VarianceRank,
    ReverseDeviationRank,
    /// The hand-tuned weights shipped with the UK/Ireland bank.
    Manual,
    Custom { weights: CustomWeights },
    /// Weights found by search, started from the three statistical schemes.
    Optimized { objective: Objective },
}

impl SchemeSpec {
    /// Parses the short names used on the command line.
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name.trim().to_ascii_lowercase().as_str() {
            "uniform" => SchemeSpec::Uniform,
            "variance-rank" | "variance" => SchemeSpec::VarianceRank,
            "reverse-deviation-rank" | "reverse-deviation" | "deviation" => {
                SchemeSpec::ReverseDeviationRank
            }
            "manual" => SchemeSpec::Manual,
            "optimized" | "optimized-spearman" => SchemeSpec::Optimized {
                objective: Objective::Spearman,
            },
            "optimized-pearson" => SchemeSpec::Optimized {
                objective: Objective::Pearson,
            },
            other => {
                let weights = other
                    .split(',')
                    .map(|w| w.trim().parse::<f64>().ok())
                    .collect::<Option<Vec<f64>>>()?;
                SchemeSpec::Custom {
                    weights: CustomWeights::Positional(weights),
                }
            }
        })
    }

    fn default_policies(&self, layout: Layout) -> &'static [OutlierPolicy] {
        use OutlierPolicy::*;
        match (layout, self) {
            (Layout::Grid, _) => &[AllRespondents, ExcludingOutliers],
            (Layout::Compact, SchemeSpec::Uniform) => &[AllRespondents],
            (Layout::Compact, SchemeSpec::VarianceRank | SchemeSpec::ReverseDeviationRank) => {
                &[AllRespondents, ExcludingOutliers]
            }
            (Layout::Compact, _) => &[ExcludingOutliers],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Every scheme with and without outliers.
    #[default]
    Grid,
    /// Uniform over everyone, statistical schemes both ways, the rest without outliers.
    Compact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisRequest {
    pub schemes: Vec<SchemeSpec>,
    pub k_outliers: usize,
    pub layout: Layout,
    pub scoring: ScoringPolicy,
    pub search: SearchConfig,
}

impl Default for AnalysisRequest {
    fn default() -> Self {
        Self {
            schemes: vec![
                SchemeSpec::Uniform,
                SchemeSpec::VarianceRank,
                SchemeSpec::ReverseDeviationRank,
                SchemeSpec::Manual,
            ],
            k_outliers: 4,
            layout: Layout::Grid,
            scoring: ScoringPolicy::default(),
            search: SearchConfig::default(),
        }
    }
}

/// One respondent's raw data as collected.
#[derive(Clone, Copy, Debug)]
pub struct SessionInput<'a> {
    pub plan: &'a SessionPlan,
    pub trials: &'a [TrialRecord],
    pub response: Option<&'a CodedResponse>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedRespondent {
    pub respondent: RespondentCode,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOutcome {
    pub stats: Vec<QuestionStats>,
    pub report: AnalysisReport,
    pub optimized: Vec<OptimizedWeights>,
    pub skipped: Vec<SkippedRespondent>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Questionnaire(#[from] QuestionnaireError),
    #[error("at least {needed} complete respondents required, got {got}")]
    InsufficientRespondents { needed: usize, got: usize },
}

pub const MIN_RESPONDENTS: usize = 3;

/// Scores every session that has both instruments; the rest are reported as skipped.
pub fn score_cohort<'a>(
    bank: &QuestionBank,
    sessions: impl IntoIterator<Item = SessionInput<'a>>,
    policy: &ScoringPolicy,
) -> (Vec<CohortEntry>, Vec<SkippedRespondent>) {
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for s in sessions {
        let respondent = s.plan.respondent;
        let skip = |reason: String| SkippedRespondent { respondent, reason };
        let Some(response) = s.response else {
            skipped.push(skip("questionnaire not submitted".into()));
            continue;
        };
        if let Err(e) = response.validate(bank) {
            skipped.push(skip(e.to_string()));
            continue;
        }
        match score_session(s.plan, s.trials, policy) {
            Ok(d) => entries.push(CohortEntry {
                respondent,
                d_score: d.value,
                response: response.clone(),
            }),
            Err(e) => skipped.push(skip(e.to_string())),
        }
    }
    (entries, skipped)
}

fn resolve_custom(
    questions: &[QuestionId],
    weights: &CustomWeights,
) -> Result<WeightScheme, QuestionnaireError> {
    match weights {
        CustomWeights::Positional(w) => WeightScheme::positional(questions, w),
        CustomWeights::Named(map) => {
            if let Some(unknown) = map.keys().find(|k| !questions.iter().any(|q| q.0 == **k)) {
                return Err(QuestionnaireError::UnknownQuestion(QuestionId(unknown.clone())));
            }
            let pairs = questions
                .iter()
                .map(|q| {
                    map.get(&q.0)
                        .map(|w| (q.clone(), *w))
                        .ok_or_else(|| QuestionnaireError::MissingWeight(q.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            WeightScheme::custom(pairs)
        }
    }
}

/// Runs the requested schemes over an already scored cohort.
///
/// Entries are processed in respondent-code order, so the result does not
/// depend on the order they are supplied in.
pub fn analyze_entries(
    bank: &QuestionBank,
    entries: &[CohortEntry],
    request: &AnalysisRequest,
) -> Result<(Vec<QuestionStats>, AnalysisReport, Vec<OptimizedWeights>), PipelineError> {
    if entries.len() < MIN_RESPONDENTS {
        return Err(PipelineError::InsufficientRespondents {
            needed: MIN_RESPONDENTS,
            got: entries.len(),
        });
    }
    let mut sorted = entries.to_vec();
    sorted.sort_by_key(|e| e.respondent);
    let entries = &sorted[..];
    let questions = bank.analysed_ids();
    let responses: Vec<CodedResponse> = entries.iter().map(|e| e.response.clone()).collect();
    let stats = question_stats(bank, &responses)?;
    let uniform = WeightScheme::uniform(&questions)?;
    let variance = derive_weight_scheme(&stats, SchemeKind::VarianceRank)?;
    let deviation = derive_weight_scheme(&stats, SchemeKind::ReverseDeviationRank)?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut optimized = Vec::new();
    for spec in &request.schemes {
        let (scheme, label) = match spec {
            SchemeSpec::Uniform => (uniform.clone(), None),
            SchemeSpec::VarianceRank => (variance.clone(), None),
            SchemeSpec::ReverseDeviationRank => (deviation.clone(), None),
            SchemeSpec::Manual => (
                WeightScheme::positional(&questions, &WeightScheme::MANUAL_UK_IRELAND)?,
                None,
            ),
            SchemeSpec::Custom { weights } => (resolve_custom(&questions, weights)?, None),
            SchemeSpec::Optimized { objective } => {
                let found = optimize_weights(
                    entries,
                    *objective,
                    request.k_outliers,
                    &[uniform.clone(), variance.clone(), deviation.clone()],
                    &request.search,
                )?;
                let name = match objective {
                    Objective::Spearman => "spearman",
                    Objective::Pearson => "pearson",
                };
                let label = format!("optimized-{name} {}", found.scheme.describe());
                let scheme = found.scheme.clone();
                optimized.push(found);
                (scheme, Some(label))
            }
        };
        for &outliers in spec.default_policies(request.layout) {
            rows.push(RowSpec {
                scheme: scheme.clone(),
                outliers,
            });
            labels.push(label.clone());
        }
    }

    let mut report = run_report_rows(entries, &rows, request.k_outliers)?;
    for (row, label) in report.rows.iter_mut().zip(labels) {
        if let Some(label) = label {
            row.scheme = label;
        }
    }
    Ok((stats, report, optimized))
}

/// Scores the sessions and analyses the complete respondents.
pub fn analyze_sessions<'a>(
    bank: &QuestionBank,
    sessions: impl IntoIterator<Item = SessionInput<'a>>,
    request: &AnalysisRequest,
) -> Result<AnalysisOutcome, PipelineError> {
    let (entries, skipped) = score_cohort(bank, sessions, &request.scoring);
    let (stats, report, optimized) = analyze_entries(bank, &entries, request)?;
    Ok(AnalysisOutcome {
        stats,
        report,
        optimized,
        skipped,
    })
}

impl crate::simulator::SyntheticCohort {
    pub fn sessions(&self) -> impl Iterator<Item = SessionInput<'_>> {
        self.respondents.iter().map(|r| SessionInput {
            plan: &r.plan,
            trials: &r.trials,
            response: Some(&r.response),
        })
    }

    pub fn entries(&self, policy: &ScoringPolicy) -> Vec<CohortEntry> {
        score_cohort(&self.bank, self.sessions(), policy).0
    }
}
