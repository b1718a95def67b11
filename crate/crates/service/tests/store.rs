mod common;

use std::collections::{BTreeMap, BTreeSet};

use iatpoll_core::pipeline::{analyze_sessions, AnalysisRequest, PipelineError, SchemeSpec};
use iatpoll_core::questionnaire::decode_answers;
use iatpoll_core::simulator::{simulate_iat, ResponseModel};
use iatpoll_core::{PairingOrder, RespondentCode};
use iatpoll_service::bundle::{bundle_from_cohort, SimulatedTimeline};
use iatpoll_service::store::{BatchStatus, NewStudy};
use iatpoll_service::{ServiceError, StudyId, StudySettings, Store};

use common::*;

fn code(c: u16) -> RespondentCode {
    RespondentCode::new(c).unwrap()
}

fn memory_store() -> Store {
    Store::in_memory(StudySettings::default()).with_clock(ticking_clock(1_000_000))
}

#[test]
fn auto_generated_codes_are_distinct() {
    let store = memory_store();
    new_study(&store, "s");
    let a = store.create_session("s", None).unwrap();
    let b = store.create_session("s", None).unwrap();
    assert_ne!(a.respondent, b.respondent);
    assert_ne!(a.token, b.token);
    assert_eq!(a.plan.pairing_order, PairingOrder::AGoodFirst);
    assert_eq!(b.plan.pairing_order, PairingOrder::BGoodFirst);
}

#[test]
fn explicit_code_reuse_conflicts() {
    let store = memory_store();
    new_study(&store, "s");
    store.create_session("s", Some(code(1980))).unwrap();
    let err = store.create_session("s", Some(code(1980))).unwrap_err();
    assert!(matches!(err, ServiceError::DuplicateCode(c) if c == code(1980)));
}

#[test]
fn code_space_fills_exactly() {
    let store = Store::in_memory(StudySettings {
        trial_counts: [4, 4, 4, 4, 4],
        ..StudySettings::default()
    });
    new_study(&store, "big");
    let codes: BTreeSet<u16> = (0..9000)
        .map(|_| store.create_session("big", None).unwrap().respondent.get())
        .collect();
    assert_eq!(codes.len(), 9000);
    assert!(codes.iter().all(|c| (1000..=9999).contains(c)));
    assert!(matches!(
        store.create_session("big", None),
        Err(ServiceError::CodeSpaceExhausted)
    ));
}

#[test]
fn unknown_study_and_token() {
    let store = memory_store();
    assert!(matches!(store.create_session("nope", None), Err(ServiceError::StudyNotFound(_))));
    assert!(matches!(store.session_plan("nope"), Err(ServiceError::UnknownToken)));
    assert!(matches!(
        store.create_study(NewStudy { id: Some("../x".into()), ..NewStudy::default() }),
        Err(ServiceError::InvalidField { .. })
    ));
}

#[test]
fn trial_ingestion_is_idempotent_and_exact() {
    let c = cohort(3, 0.0, 1);
    let store = memory_store();
    new_study(&store, "s");
    let ticket = store.create_session("s", Some(c.respondents[0].latent.id)).unwrap();
    let trials = simulate_iat(&c.respondents[0].latent, &ticket.plan, &ResponseModel::default(), 5);

    let half = trials.len() / 2;
    let ack = store.submit_trials(&ticket.token, trials[..half].to_vec()).unwrap();
    assert_eq!(ack.status, BatchStatus::Appended);
    assert!(!ack.validation.ok);

    let ack = store.submit_trials(&ticket.token, trials.clone()).unwrap();
    assert_eq!((ack.accepted, ack.duplicates), (trials.len() - half, half));
    assert!(ack.validation.ok, "{:?}", ack.validation.issues);
    assert_eq!(ack.received_total, 160);

    let again = store.submit_trials(&ticket.token, trials.clone()).unwrap();
    assert_eq!(again.status, BatchStatus::DuplicateNoOp);
    assert_eq!(serde_json::to_value(again.status).unwrap(), "duplicate, no-op");

    let stored = &store.snapshot("s").unwrap().respondents[&ticket.respondent].trials;
    assert_eq!(stored, &trials, "latencies stored exactly as sent");

    let mut changed = trials[3].clone();
    changed.latency_ms += 1.0;
    assert!(matches!(
        store.submit_trials(&ticket.token, vec![changed]),
        Err(ServiceError::Conflict(_))
    ));
}

#[test]
fn negative_latency_names_field() {
    let c = cohort(2, 0.0, 2);
    let store = memory_store();
    new_study(&store, "s");
    let ticket = store.create_session("s", None).unwrap();
    let mut trials = simulate_iat(&c.respondents[0].latent, &ticket.plan, &ResponseModel::default(), 1);
    trials[2].latency_ms = -5.0;
    let err = store.submit_trials(&ticket.token, trials[..4].to_vec()).unwrap_err();
    match err {
        ServiceError::InvalidField { field, .. } => assert_eq!(field, "trials[2].latency_ms"),
        other => panic!("{other}"),
    }
    assert!(store.snapshot("s").unwrap().respondents[&ticket.respondent].trials.is_empty());

    trials[2].latency_ms = 500.0;
    trials[1].trial_index = 999;
    let err = store.submit_trials(&ticket.token, trials[..4].to_vec()).unwrap_err();
    assert!(err.to_string().contains("trials[1].trial_index"), "{err}");
}

#[test]
fn questionnaire_coding_and_lifecycle() {
    let c = cohort(2, 0.0, 3);
    let store = memory_store();
    new_study(&store, "s");
    let ticket = store.create_session("s", None).unwrap();
    let raw = decode_answers(&c.bank, &c.respondents[0].response).unwrap();
    let ack = store.submit_questionnaire(&ticket.token, &raw).unwrap();
    assert!(!ack.replaced);
    assert_eq!(ack.response.answers, c.respondents[0].response.answers);

    let mut bad = raw.clone();
    bad.insert("Q2".into(), "Maybe".into());
    let err = store.submit_questionnaire(&ticket.token, &bad).unwrap_err();
    assert!(err.to_string().contains("Q2"), "{err}");

    let other = decode_answers(&c.bank, &c.respondents[1].response).unwrap();
    assert!(store.submit_questionnaire(&ticket.token, &other).unwrap().replaced);

    store.lock_study("s").unwrap();
    assert!(matches!(
        store.submit_questionnaire(&ticket.token, &raw),
        Err(ServiceError::Locked(_))
    ));
    assert!(matches!(store.create_session("s", None), Err(ServiceError::Locked(_))));
    assert!(matches!(store.lock_study("s"), Err(ServiceError::Locked(_))));
}

#[test]
fn minimum_gap_is_enforced_when_configured() {
    let c = cohort(2, 0.0, 4);
    let store = memory_store();
    store
        .create_study(NewStudy {
            id: Some("gap".into()),
            settings: Some(StudySettings {
                min_gap_ms: Some(5_000),
                ..StudySettings::default()
            }),
            ..NewStudy::default()
        })
        .unwrap();
    let ticket = store.create_session("gap", None).unwrap();
    let raw = decode_answers(&c.bank, &c.respondents[0].response).unwrap();
    assert!(matches!(
        store.submit_questionnaire(&ticket.token, &raw),
        Err(ServiceError::GapNotElapsed { .. })
    ));
    let trials = simulate_iat(&c.respondents[0].latent, &ticket.plan, &ResponseModel::default(), 1);
    store.submit_trials(&ticket.token, trials).unwrap();
    // the ticking clock advances 1 s per reading
    let err = store.submit_questionnaire(&ticket.token, &raw).unwrap_err();
    assert!(matches!(err, ServiceError::GapNotElapsed { remaining_ms: 4000 }), "{err}");
    for _ in 0..3 {
        let _ = store.submit_questionnaire(&ticket.token, &raw);
    }
    store.submit_questionnaire(&ticket.token, &raw).unwrap();
}

#[test]
fn analysis_needs_three_complete_respondents() {
    let c = cohort(3, 0.0, 5);
    let store = memory_store();
    new_study(&store, "s");
    let tokens = populate(&store, "s", &c);
    // a third session without a questionnaire does not count
    let extra = store.create_session("s", None).unwrap();
    let _ = (tokens, extra);
    let short = cohort(2, 0.0, 6);
    let store2 = memory_store();
    new_study(&store2, "two");
    populate(&store2, "two", &short);
    store2.create_session("two", None).unwrap();
    let err = store2.run_analysis("two", None).unwrap_err();
    assert!(
        matches!(err, ServiceError::Pipeline(PipelineError::InsufficientRespondents { needed: 3, got: 2 })),
        "{err}"
    );
    let ok = store.run_analysis("s", None).unwrap();
    assert_eq!(ok.outcome.skipped.len(), 1);
    assert!(ok.outcome.skipped[0].reason.contains("IAT incomplete"));
}

#[test]
fn analysis_is_persisted_and_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let c = cohort(12, 0.15, 7);
    let store = Store::open(dir.path(), StudySettings::default())
        .unwrap()
        .with_clock(ticking_clock(0));
    new_study(&store, "s");
    populate(&store, "s", &c);
    let request = AnalysisRequest {
        k_outliers: 2,
        ..AnalysisRequest::default()
    };
    let first = store.run_analysis("s", Some(request.clone())).unwrap();
    let second = store.run_analysis("s", Some(request)).unwrap();
    assert_eq!(first.outcome, second.outcome);
    assert_eq!(first.outcome.report.to_csv(), second.outcome.report.to_csv());
    let before = store.snapshot("s").unwrap();
    drop(store);

    let reopened = Store::open(dir.path(), StudySettings::default()).unwrap();
    let after = reopened.snapshot("s").unwrap();
    assert_eq!(*before, *after);
    assert_eq!(reopened.report("s").unwrap().unwrap().outcome, second.outcome);
}

#[test]
fn export_import_export_is_byte_identical() {
    let c = cohort(8, 0.2, 8);
    let store = memory_store();
    new_study(&store, "s");
    populate(&store, "s", &c);
    store.create_session("s", None).unwrap();
    let first = store.export("s").unwrap();

    let dir = tempfile::tempdir().unwrap();
    let disk = Store::open(dir.path(), StudySettings::default()).unwrap();
    disk.import(None, &first).unwrap();
    let second = disk.export("s").unwrap();
    assert_eq!(first, second);

    // and through files on disk
    let out = dir.path().join("bundle");
    second.write_dir(&out).unwrap();
    let third = iatpoll_service::Bundle::read_dir(&out).unwrap();
    assert_eq!(first, third);

    let original = store.snapshot("s").unwrap();
    let copy = disk.snapshot("s").unwrap();
    assert_eq!(original.respondents, copy.respondents);
    assert_eq!(original.settings, copy.settings);
}

#[test]
fn import_rejects_duplicate_tokens_and_ids() {
    let c = cohort(3, 0.0, 9);
    let bundle = bundle_from_cohort(&c, StudyId::new("sim").unwrap(), SimulatedTimeline::default(), 1).unwrap();
    let store = memory_store();
    store.import(None, &bundle).unwrap();
    assert!(matches!(store.import(None, &bundle), Err(ServiceError::Conflict(_))));
    let fresh = memory_store();
    fresh.import(Some("a"), &bundle).unwrap();
    new_study(&fresh, "b");
    let other = bundle_from_cohort(&c, StudyId::new("sim").unwrap(), SimulatedTimeline::default(), 2).unwrap();
    assert!(matches!(fresh.import(Some("b"), &other), Err(ServiceError::StudyExists(_))));
}

#[test]
fn malformed_bundles_report_lines_and_columns() {
    let c = cohort(3, 0.0, 10);
    let bundle = bundle_from_cohort(&c, StudyId::new("sim").unwrap(), SimulatedTimeline::default(), 1).unwrap();

    let mut missing_q9 = bundle.clone();
    missing_q9.answers_csv = bundle
        .answers_csv
        .lines()
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            // columns: respondent, Q1..Q5, Q9, Q10
            let kept: Vec<&str> = cells.iter().enumerate().filter(|(i, _)| *i != 6).map(|(_, c)| *c).collect();
            kept.join(",") + "\n"
        })
        .collect();
    assert!(missing_q9.answers_csv.starts_with("respondent,Q1,Q2,Q3,Q4,Q5,Q10"));
    let err = memory_store().import(None, &missing_q9).unwrap_err();
    assert!(err.to_string().contains("Q9"), "{err}");

    let mut bad_trial = bundle.clone();
    let mut lines: Vec<String> = bundle.trials_jsonl.lines().map(String::from).collect();
    lines[4] = lines[4].replace("\"latency_ms\"", "\"latency\"");
    bad_trial.trials_jsonl = lines.join("\n") + "\n";
    let err = memory_store().import(None, &bad_trial).unwrap_err();
    assert!(matches!(err, ServiceError::Bundle { file: "trials.jsonl", line: 5, .. }), "{err}");

    let mut bad_row = bundle.clone();
    bad_row.answers_csv.push_str("1234,1,1\n");
    let err = memory_store().import(None, &bad_row).unwrap_err();
    assert!(matches!(err, ServiceError::Bundle { file: "answers.csv", line: 5, .. }), "{err}");
}

#[test]
fn imported_simulation_matches_in_process_pipeline() {
    let c = cohort(25, 0.15, 11);
    let bundle = bundle_from_cohort(&c, StudyId::new("sim").unwrap(), SimulatedTimeline::default(), 3).unwrap();
    let store = memory_store();
    store.import(None, &bundle).unwrap();
    let request = AnalysisRequest {
        schemes: vec![
            SchemeSpec::Uniform,
            SchemeSpec::VarianceRank,
            SchemeSpec::ReverseDeviationRank,
            SchemeSpec::Manual,
            SchemeSpec::Optimized { objective: iatpoll_core::Objective::Spearman },
        ],
        ..AnalysisRequest::default()
    };
    let served = store.run_analysis("sim", Some(request.clone())).unwrap();
    let direct = analyze_sessions(&c.bank, c.sessions(), &request).unwrap();
    assert_eq!(served.outcome, direct);
    let bits = |o: &iatpoll_core::pipeline::AnalysisOutcome| -> Vec<Option<u64>> {
        o.report.rows.iter().map(|r| r.spearman.map(f64::to_bits)).collect()
    };
    assert_eq!(bits(&served.outcome), bits(&direct));
}

#[test]
fn missing_answer_names_question() {
    let c = cohort(2, 0.0, 12);
    let store = memory_store();
    new_study(&store, "s");
    let ticket = store.create_session("s", None).unwrap();
    let mut raw: BTreeMap<String, String> = decode_answers(&c.bank, &c.respondents[0].response).unwrap();
    raw.remove("Q2");
    let err = store.submit_questionnaire(&ticket.token, &raw).unwrap_err();
    assert_eq!(err.to_string(), "Q2: no answer given");
}
