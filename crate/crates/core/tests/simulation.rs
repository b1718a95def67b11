//! Statistical checks that the pipeline recovers the simulator's latent truth.

use iatpoll_core::analysis::{fractional_rank, spearman, Direction};
use iatpoll_core::pipeline::{analyze_sessions, AnalysisRequest, SchemeSpec};
use iatpoll_core::questionnaire::{total_score, WeightScheme};
use iatpoll_core::simulator::{generate_cohort, CohortConfig, SyntheticCohort};
use iatpoll_core::OutlierPolicy;

fn cohort(n: usize, prevalence: f64, seed: u64) -> SyntheticCohort {
    generate_cohort(&CohortConfig {
        n,
        sdr_prevalence: prevalence,
        seed,
        ..CohortConfig::default()
    })
    .unwrap()
}

/// Uniform-weight Spearman over all respondents.
fn pipeline_spearman(c: &SyntheticCohort) -> f64 {
    let request = AnalysisRequest {
        schemes: vec![SchemeSpec::Uniform],
        ..AnalysisRequest::default()
    };
    let out = analyze_sessions(&c.bank, c.sessions(), &request).unwrap();
    out.report.rows[0].spearman.unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

#[test]
fn honest_answers_track_theta() {
    let c = cohort(200, 0.0, 7);
    let uniform = WeightScheme::uniform(&c.bank.analysed_ids()).unwrap();
    let theta: Vec<f64> = c.respondents.iter().map(|r| r.latent.theta).collect();
    let totals: Vec<f64> = c
        .respondents
        .iter()
        .map(|r| total_score(&r.response, &uniform).unwrap())
        .collect();
    let rho = spearman(
        &fractional_rank(&theta, Direction::Descending),
        &fractional_rank(&totals, Direction::Descending),
    )
    .unwrap();
    assert!(rho >= 0.9, "rho {rho}");
}

#[test]
fn zero_bias_report_in_expected_range() {
    let rho = pipeline_spearman(&cohort(25, 0.0, 3));
    assert!((0.8..=1.0).contains(&rho), "rho {rho}");
}

#[test]
fn misreporting_lowers_agreement() {
    let seeds = 0..10u64;
    let honest = median(seeds.clone().map(|s| pipeline_spearman(&cohort(25, 0.0, s))).collect());
    let shy = median(seeds.map(|s| pipeline_spearman(&cohort(25, 0.5, s))).collect());
    assert!(honest - shy >= 0.2, "honest {honest}, shy {shy}");
}

#[test]
fn median_agreement_falls_with_prevalence() {
    let medians: Vec<f64> = [0.0, 0.2, 0.4, 0.6, 0.8]
        .iter()
        .map(|&p| median((0..20u64).map(|s| pipeline_spearman(&cohort(25, p, s))).collect()))
        .collect();
    for w in medians.windows(2) {
        assert!(w[1] < w[0], "medians {medians:?}");
    }
}

#[test]
fn outlier_removal_helps_in_most_seeds() {
    let request = AnalysisRequest {
        schemes: vec![SchemeSpec::Uniform],
        ..AnalysisRequest::default()
    };
    let improved = (0..20u64)
        .filter(|&s| {
            let c = cohort(25, 0.15, s);
            let rows = analyze_sessions(&c.bank, c.sessions(), &request).unwrap().report.rows;
            assert_eq!(rows[0].outliers, OutlierPolicy::AllRespondents);
            rows[1].spearman.unwrap() > rows[0].spearman.unwrap()
        })
        .count();
    assert!(improved >= 16, "{improved}/20");
}

#[test]
fn balanced_cohort_spreads_across_bands() {
    use iatpoll_core::scoring::score_distribution;
    use iatpoll_core::ScoringPolicy;
    let c = cohort(300, 0.0, 11);
    let policy = ScoringPolicy::default();
    let scores: Vec<_> = c
        .respondents
        .iter()
        .map(|r| iatpoll_core::scoring::score_session(&r.plan, &r.trials, &policy).unwrap())
        .collect();
    let dist = score_distribution(&scores, policy.neutral_band, 0.25).unwrap();
    let b = dist.bands;
    assert_eq!(b.pro_a + b.neutral + b.pro_b, 300);
    // both poles well represented, and the neutral band non-empty
    assert!(b.pro_a > 60 && b.pro_b > 60 && b.neutral > 10, "{b:?}");
}
