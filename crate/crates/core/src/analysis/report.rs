use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::paired::{find_outliers, PairedScores};
use super::AnalysisError;
use crate::questionnaire::{total_score, CodedResponse, QuestionId, SchemeKind, WeightScheme};
use crate::RespondentCode;

/// One respondent with both instruments scored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortEntry {
    pub respondent: RespondentCode,
    pub d_score: f64,
    pub response: CodedResponse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierPolicy {
    AllRespondents,
    ExcludingOutliers,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowSpec {
    pub scheme: WeightScheme,
    pub outliers: OutlierPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scheme: String,
    pub kind: SchemeKind,
    pub weights: Vec<(QuestionId, f64)>,
    pub outliers: OutlierPolicy,
    pub spearman: Option<f64>,
    pub pearson: Option<f64>,
    pub n_respondents: usize,
    /// Why the row has no correlations, if it has none.
    pub error: Option<String>,
}

impl ReportRow {
    pub fn is_valid(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub cohort_size: usize,
    pub k_outliers: usize,
    /// Outliers found once from the uniform-weight pairing.
    pub outliers_removed: Vec<RespondentCode>,
    pub rows: Vec<ReportRow>,
}

/// Every scheme, both over all respondents and excluding outliers.
pub fn run_report(
    cohort: &[CohortEntry],
    schemes: &[WeightScheme],
    k_outliers: usize,
) -> Result<AnalysisReport, AnalysisError> {
    let rows: Vec<RowSpec> = schemes
        .iter()
        .flat_map(|s| {
            [OutlierPolicy::AllRespondents, OutlierPolicy::ExcludingOutliers].map(|outliers| RowSpec {
                scheme: s.clone(),
                outliers,
            })
        })
        .collect();
    run_report_rows(cohort, &rows, k_outliers)
}

/// The six-row layout: uniform over everyone, each derived scheme with and
/// without outliers, and the hand-tuned scheme without outliers.
pub fn compact_layout(
    uniform: WeightScheme,
    variance_rank: WeightScheme,
    reverse_deviation_rank: WeightScheme,
    manual: WeightScheme,
) -> Vec<RowSpec> {
    use OutlierPolicy::*;
    vec![
        RowSpec { scheme: uniform, outliers: AllRespondents },
        RowSpec { scheme: variance_rank.clone(), outliers: AllRespondents },
        RowSpec { scheme: variance_rank, outliers: ExcludingOutliers },
        RowSpec { scheme: reverse_deviation_rank.clone(), outliers: AllRespondents },
        RowSpec { scheme: reverse_deviation_rank, outliers: ExcludingOutliers },
        RowSpec { scheme: manual, outliers: ExcludingOutliers },
    ]
}

/// Questions answered by the cohort, in the order of the first response.
pub(crate) fn cohort_questions(cohort: &[CohortEntry]) -> Vec<QuestionId> {
    cohort
        .first()
        .map(|e| e.response.answers.keys().cloned().collect())
        .unwrap_or_default()
}

pub(crate) fn check_unique(cohort: &[CohortEntry]) -> Result<(), AnalysisError> {
    let mut seen = HashSet::new();
    for e in cohort {
        if !seen.insert(e.respondent) {
            return Err(AnalysisError::DuplicateRespondent(e.respondent));
        }
    }
    Ok(())
}

pub(crate) fn pair_with(
    cohort: &[CohortEntry],
    scheme: &WeightScheme,
) -> Result<PairedScores, AnalysisError> {
    let triples = cohort
        .iter()
        .map(|e| Ok((e.respondent, e.d_score, total_score(&e.response, scheme)?)))
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    Ok(PairedScores::new(triples))
}

/// Outliers from the uniform-weight pairing.
pub(crate) fn uniform_outliers(
    cohort: &[CohortEntry],
    k_outliers: usize,
) -> Result<Vec<RespondentCode>, AnalysisError> {
    let uniform = WeightScheme::uniform(&cohort_questions(cohort))?;
    Ok(find_outliers(&pair_with(cohort, &uniform)?, k_outliers))
}

pub fn run_report_rows(
    cohort: &[CohortEntry],
    rows: &[RowSpec],
    k_outliers: usize,
) -> Result<AnalysisReport, AnalysisError> {
    if cohort.is_empty() {
        return Err(AnalysisError::InsufficientRespondents { needed: 1, got: 0 });
    }
    check_unique(cohort)?;
    let outliers = uniform_outliers(cohort, k_outliers)?;

    let rows = rows
        .iter()
        .map(|spec| {
            let paired = pair_with(cohort, &spec.scheme).map(|p| match spec.outliers {
                OutlierPolicy::AllRespondents => p,
                OutlierPolicy::ExcludingOutliers => p.without(&outliers),
            });
            let n_respondents = match spec.outliers {
                OutlierPolicy::AllRespondents => cohort.len(),
                OutlierPolicy::ExcludingOutliers => cohort.len() - outliers.len(),
            };
            let mut row = ReportRow {
                scheme: spec.scheme.describe(),
                kind: spec.scheme.kind,
                weights: spec.scheme.weights.clone(),
                outliers: spec.outliers,
                spearman: None,
                pearson: None,
                n_respondents,
                error: None,
            };
            let correlations = paired.and_then(|p| Ok((p.spearman()?, p.pearson()?)));
            match correlations {
                Ok((s, p)) => {
                    row.spearman = Some(s);
                    row.pearson = Some(p);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();

    Ok(AnalysisReport {
        cohort_size: cohort.len(),
        k_outliers,
        outliers_removed: outliers,
        rows,
    })
}

impl OutlierPolicy {
    pub fn describe(self, removed: usize) -> String {
        match self {
            OutlierPolicy::AllRespondents => "all respondents".into(),
            OutlierPolicy::ExcludingOutliers => format!("excluding {removed} outliers"),
        }
    }
}

impl AnalysisReport {
    /// Comma-separated table: scheme, outlier policy, both correlations,
    /// respondent count and the removed respondent codes.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let removed = self
            .outliers_removed
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" ");
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        w.write_record(["scheme", "outliers", "spearman", "pearson", "n", "removed", "error"])
            .expect("in-memory write");
        for row in &self.rows {
            let removed_here = match row.outliers {
                OutlierPolicy::AllRespondents => "",
                OutlierPolicy::ExcludingOutliers => removed.as_str(),
            };
            w.write_record([
                row.scheme.as_str(),
                &row.outliers.describe(self.outliers_removed.len()),
                &fmt(row.spearman),
                &fmt(row.pearson),
                &row.n_respondents.to_string(),
                removed_here,
                row.error.as_deref().unwrap_or(""),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    /// Plain-text table for terminals.
    pub fn to_table(&self) -> String {
        let labels: Vec<String> = self
            .rows
            .iter()
            .map(|row| format!("{} ({})", row.scheme, row.outliers.describe(self.outliers_removed.len())))
            .collect();
        let header = "weighting scheme and outliers";
        let width = labels.iter().map(|l| l.chars().count()).chain([header.len()]).max().unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{header:<width$} {:>9} {:>9} {:>4}", "spearman", "pearson", "n");
        for (row, label) in self.rows.iter().zip(&labels) {
            let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
            let _ = writeln!(
                out,
                "{label:<width$} {:>9} {:>9} {:>4}",
                cell(row.spearman),
                cell(row.pearson),
                row.n_respondents
            );
        }
        if !self.outliers_removed.is_empty() {
            let ids: Vec<String> = self.outliers_removed.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "outliers: {}", ids.join(", "));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::questionnaire::QuestionBank;

    fn entry(code: u16, d: f64, answers: [i8; 7]) -> CohortEntry {
        let ids = QuestionBank::uk_ireland().analysed_ids();
        CohortEntry {
            respondent: RespondentCode::new(code).unwrap(),
            d_score: d,
            response: CodedResponse {
                respondent: RespondentCode::new(code).unwrap(),
                answers: ids.into_iter().zip(answers).collect(),
            },
        }
    }

    fn ids() -> Vec<QuestionId> {
        QuestionBank::uk_ireland().analysed_ids()
    }

    #[test]
    fn two_respondents_give_unit_correlations() {
        let cohort = [entry(1001, 0.5, [-2; 7]), entry(1002, -0.5, [2; 7])];
        let report = run_report(&cohort, &[WeightScheme::uniform(&ids()).unwrap()], 0).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            let s = row.spearman.unwrap();
            assert!(s == 1.0 || s == -1.0);
            assert_eq!(row.n_respondents, 2);
        }
        // disagreement flips the sign
        let cohort = [entry(1001, -0.5, [-2; 7]), entry(1002, 0.5, [2; 7])];
        let report = run_report(&cohort, &[WeightScheme::uniform(&ids()).unwrap()], 0).unwrap();
        assert_eq!(report.rows[0].spearman, Some(-1.0));
    }

    #[test]
    fn invalid_rows_do_not_abort() {
        let cohort = [entry(1001, 0.5, [-2; 7]), entry(1002, -0.5, [2; 7])];
        let report = run_report(&cohort, &[WeightScheme::uniform(&ids()).unwrap()], 4).unwrap();
        assert_eq!(report.outliers_removed.len(), 2);
        let excluded = &report.rows[1];
        assert!(!excluded.is_valid());
        assert_eq!(excluded.n_respondents, 0);
        assert!(report.rows[0].is_valid());

        let partial = WeightScheme::uniform(&ids()[..2]).unwrap();
        let report = run_report(&cohort, &[partial], 0).unwrap();
        assert!(report.rows[0].error.as_deref().unwrap().contains("no weight"));
    }

    #[test]
    fn compact_layout_shape() {
        let u = WeightScheme::uniform(&ids()).unwrap();
        let manual = WeightScheme::positional(&ids(), &WeightScheme::MANUAL_UK_IRELAND).unwrap();
        let v = WeightScheme { kind: SchemeKind::VarianceRank, ..u.clone() };
        let r = WeightScheme { kind: SchemeKind::ReverseDeviationRank, ..u.clone() };
        let layout = compact_layout(u, v, r, manual);
        let cohort: Vec<CohortEntry> = (0..8)
            .map(|i| {
                let a = (i % 5) as i8 - 2;
                entry(1000 + i, f64::from(i) * 0.1 - 0.3, [a, -a, a, a, 0, a, -a])
            })
            .collect();
        let report = run_report_rows(&cohort, &layout, 2).unwrap();
        let shape: Vec<(SchemeKind, OutlierPolicy)> =
            report.rows.iter().map(|r| (r.kind, r.outliers)).collect();
        use OutlierPolicy::*;
        assert_eq!(
            shape,
            vec![
                (SchemeKind::Uniform, AllRespondents),
                (SchemeKind::VarianceRank, AllRespondents),
                (SchemeKind::VarianceRank, ExcludingOutliers),
                (SchemeKind::ReverseDeviationRank, AllRespondents),
                (SchemeKind::ReverseDeviationRank, ExcludingOutliers),
                (SchemeKind::Custom, ExcludingOutliers),
            ]
        );
        for row in &report.rows {
            let expected = match row.outliers {
                AllRespondents => 8,
                ExcludingOutliers => 6,
            };
            assert_eq!(row.n_respondents, expected);
        }
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.lines().next().unwrap().starts_with("scheme,outliers,spearman,pearson,n,removed"));
        assert!(report.to_table().contains("excluding 2 outliers"));
    }

    #[test]
    fn duplicate_respondents_rejected() {
        let cohort = [entry(1001, 0.5, [-2; 7]), entry(1001, -0.5, [2; 7])];
        assert!(matches!(
            run_report(&cohort, &[WeightScheme::uniform(&ids()).unwrap()], 0),
            Err(AnalysisError::DuplicateRespondent(_))
        ));
    }
}
