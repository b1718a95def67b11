//! Shared fixtures for the benchmarks in `benches/`.

use iatpoll_core::analysis::CohortEntry;
use iatpoll_core::questionnaire::{derive_weight_scheme, question_stats, SchemeKind};
use iatpoll_core::simulator::{generate_cohort, CohortConfig, SyntheticCohort};
use iatpoll_core::{ScoringPolicy, WeightScheme};

/// Default synthetic cohort of size `n`.
pub fn cohort(n: usize, seed: u64) -> SyntheticCohort {
    generate_cohort(&CohortConfig {
        n,
        seed,
        ..CohortConfig::default()
    })
    .expect("valid cohort config")
}

/// Scored entries plus the three statistical starting schemes.
pub fn search_inputs(n: usize, seed: u64) -> (Vec<CohortEntry>, Vec<WeightScheme>) {
    let c = cohort(n, seed);
    let entries = c.entries(&ScoringPolicy::default());
    let responses: Vec<_> = entries.iter().map(|e| e.response.clone()).collect();
    let stats = question_stats(&c.bank, &responses).expect("complete responses");
    let starts = vec![
        WeightScheme::uniform(&c.bank.analysed_ids()).expect("non-empty bank"),
        derive_weight_scheme(&stats, SchemeKind::VarianceRank).expect("variance scheme"),
        derive_weight_scheme(&stats, SchemeKind::ReverseDeviationRank).expect("deviation scheme"),
    ];
    (entries, starts)
}

/// Deterministic pseudo-random series with ties every few values.
pub fn series(n: usize, salt: u64) -> Vec<f64> {
    (0..n as u64)
        .map(|i| {
            let h = (i ^ salt).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
            (h % 1000) as f64 / 10.0
        })
        .collect()
}
