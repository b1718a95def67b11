#![allow(dead_code)]

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use iatpoll_core::questionnaire::decode_answers;
use iatpoll_core::simulator::{generate_cohort, simulate_iat, CohortConfig, ResponseModel, SyntheticCohort};
use iatpoll_service::store::{Clock, NewStudy};
use iatpoll_service::Store;

/// A clock that advances one second per reading.
pub fn ticking_clock(start: u64) -> Clock {
    let t = Arc::new(AtomicU64::new(start));
    Arc::new(move || t.fetch_add(1000, Ordering::SeqCst))
}

pub fn cohort(n: usize, prevalence: f64, seed: u64) -> SyntheticCohort {
    generate_cohort(&CohortConfig {
        n,
        sdr_prevalence: prevalence,
        seed,
        ..CohortConfig::default()
    })
    .unwrap()
}

pub fn new_study(store: &Store, id: &str) {
    store
        .create_study(NewStudy {
            id: Some(id.into()),
            ..NewStudy::default()
        })
        .unwrap();
}

/// Runs every simulated respondent through the live operations: session,
/// one trial batch per block, then the questionnaire as option texts.
/// Returns the session tokens in cohort order.
pub fn populate(store: &Store, study: &str, cohort: &SyntheticCohort) -> Vec<String> {
    let model = ResponseModel::default();
    cohort
        .respondents
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let ticket = store.create_session(study, Some(r.latent.id)).unwrap();
            let trials = simulate_iat(&r.latent, &ticket.plan, &model, 10_000 + i as u64);
            for block in 1..=5u8 {
                let batch: Vec<_> = trials.iter().filter(|t| t.block_index == block).cloned().collect();
                store.submit_trials(&ticket.token, batch).unwrap();
            }
            let raw = decode_answers(&cohort.bank, &r.response).unwrap();
            store.submit_questionnaire(&ticket.token, &raw).unwrap();
            ticket.token
        })
        .collect()
}
