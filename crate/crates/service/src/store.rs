//! Study registry: validates requests, appends events, serves snapshots.
//!
//! Writes to one study are serialised by that study's mutex; readers take
//! an `Arc` snapshot and never hold a lock while working.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};

use iatpoll_core::pipeline::{
    analyze_entries, score_cohort, AnalysisOutcome, AnalysisRequest, SessionInput,
    SkippedRespondent,
};
use iatpoll_core::protocol::{validate_response_log, ValidationReport};
use iatpoll_core::questionnaire::code_answers;
use iatpoll_core::{
    build_session_plan, CodedResponse, PairingOrder, PlanConfig, QuestionBank, RespondentCode,
    SessionPlan, StimulusSet, TrialRecord,
};

use crate::bundle::Bundle;
use crate::error::ServiceError;
use crate::log::EventLog;
use crate::record::{Event, LogEntry, Millis, StoredAnalysis, StudyId, StudyRecord, StudySettings};

pub type Clock = Arc<dyn Fn() -> Millis + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as Millis)
    })
}

struct StudyHandle {
    record: Arc<StudyRecord>,
    log: Option<EventLog>,
}

#[derive(Default)]
struct Registry {
    studies: HashMap<StudyId, Arc<Mutex<StudyHandle>>>,
    tokens: HashMap<String, StudyId>,
}

pub struct Store {
    root: Option<PathBuf>,
    defaults: StudySettings,
    clock: Clock,
    registry: RwLock<Registry>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewStudy {
    pub id: Option<String>,
    pub name: Option<String>,
    pub stimulus_set: Option<StimulusSet>,
    pub bank: Option<QuestionBank>,
    pub settings: Option<StudySettings>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionTicket {
    pub study: StudyId,
    pub token: String,
    pub respondent: RespondentCode,
    pub plan: SessionPlan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchStatus {
    Appended,
    #[serde(rename = "duplicate, no-op")]
    DuplicateNoOp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialsAck {
    pub respondent: RespondentCode,
    pub status: BatchStatus,
    pub accepted: usize,
    pub duplicates: usize,
    pub received_total: usize,
    pub expected_total: usize,
    pub validation: ValidationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireAck {
    pub respondent: RespondentCode,
    pub replaced: bool,
    pub response: CodedResponse,
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

const LOG_FILE: &str = "events.jsonl";

impl Store {
    /// Volatile store for tests and one-off offline analysis.
    pub fn in_memory(defaults: StudySettings) -> Self {
        Self {
            root: None,
            defaults,
            clock: system_clock(),
            registry: RwLock::default(),
        }
    }

    /// Opens a data directory, replaying every study log found in it.
    pub fn open(root: &Path, defaults: StudySettings) -> Result<Self, ServiceError> {
        let studies_dir = root.join("studies");
        std::fs::create_dir_all(&studies_dir)?;
        let mut registry = Registry::default();
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(&studies_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(LOG_FILE).is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            let (log, parsed) = EventLog::open(&dir.join(LOG_FILE))?;
            if parsed.entries.is_empty() {
                tracing::warn!(path = %dir.display(), "skipping empty study log");
                continue;
            }
            let record = StudyRecord::replay(&parsed.entries)?;
            for r in record.respondents.values() {
                registry.tokens.insert(r.token.clone(), record.id.clone());
            }
            tracing::info!(study = %record.id, entries = parsed.entries.len(), "replayed study");
            registry.studies.insert(
                record.id.clone(),
                Arc::new(Mutex::new(StudyHandle {
                    record: Arc::new(record),
                    log: Some(log),
                })),
            );
        }
        Ok(Self {
            root: Some(root.to_path_buf()),
            defaults,
            clock: system_clock(),
            registry: RwLock::new(registry),
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn defaults(&self) -> &StudySettings {
        &self.defaults
    }

    fn now(&self) -> Millis {
        (self.clock)()
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<StudyHandle>>, ServiceError> {
        let registry = self.registry.read().unwrap_or_else(|p| p.into_inner());
        StudyId::new(id)
            .ok()
            .and_then(|id| registry.studies.get(&id).cloned())
            .ok_or_else(|| ServiceError::StudyNotFound(id.to_string()))
    }

    fn token_study(&self, token: &str) -> Result<Arc<Mutex<StudyHandle>>, ServiceError> {
        let registry = self.registry.read().unwrap_or_else(|p| p.into_inner());
        let id = registry.tokens.get(token).ok_or(ServiceError::UnknownToken)?;
        Ok(registry.studies[id].clone())
    }

    pub fn snapshot(&self, id: &str) -> Result<Arc<StudyRecord>, ServiceError> {
        let handle = self.handle(id)?;
        let record = lock(&handle).record.clone();
        Ok(record)
    }

    pub fn study_ids(&self) -> Vec<StudyId> {
        let registry = self.registry.read().unwrap_or_else(|p| p.into_inner());
        let mut ids: Vec<StudyId> = registry.studies.keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Checks, persists, then applies one event.
    fn commit(&self, handle: &mut StudyHandle, at: Millis, event: Event) -> Result<(), ServiceError> {
        let entry = LogEntry {
            seq: handle.record.last_seq + 1,
            at,
            event,
        };
        handle.record.check(&entry)?;
        if let Some(log) = handle.log.as_mut() {
            log.append(&entry)?;
        }
        if let Event::SessionCreated { token, .. } = &entry.event {
            let mut registry = self.registry.write().unwrap_or_else(|p| p.into_inner());
            registry.tokens.insert(token.clone(), handle.record.id.clone());
        }
        Arc::make_mut(&mut handle.record).apply_checked(&entry);
        Ok(())
    }

    fn insert_study(
        &self,
        id: StudyId,
        name: String,
        stimulus_set: StimulusSet,
        bank: QuestionBank,
        settings: StudySettings,
        at: Millis,
    ) -> Result<Arc<Mutex<StudyHandle>>, ServiceError> {
        let entry = LogEntry {
            seq: 1,
            at,
            event: Event::StudyCreated {
                id: id.clone(),
                name,
                stimulus_set,
                bank,
                settings,
            },
        };
        let record = StudyRecord::from_first(&entry)?;
        let mut registry = self.registry.write().unwrap_or_else(|p| p.into_inner());
        if registry.studies.contains_key(&id) {
            return Err(ServiceError::StudyExists(id.to_string()));
        }
        let log = match &self.root {
            Some(root) => {
                let path = root.join("studies").join(id.as_str()).join(LOG_FILE);
                if path.exists() {
                    return Err(ServiceError::StudyExists(id.to_string()));
                }
                let mut log = EventLog::create(&path)?;
                log.append(&entry)?;
                Some(log)
            }
            None => None,
        };
        let handle = Arc::new(Mutex::new(StudyHandle {
            record: Arc::new(record),
            log,
        }));
        registry.studies.insert(id, handle.clone());
        Ok(handle)
    }

    pub fn create_study(&self, request: NewStudy) -> Result<Arc<StudyRecord>, ServiceError> {
        let id = match request.id {
            Some(id) => StudyId::new(id)?,
            None => StudyId::generate(),
        };
        let stimulus_set = request.stimulus_set.unwrap_or_else(StimulusSet::uk_ireland);
        let handle = self.insert_study(
            id.clone(),
            request.name.unwrap_or_else(|| stimulus_set.topic.clone()),
            stimulus_set,
            request.bank.unwrap_or_else(QuestionBank::uk_ireland),
            request.settings.unwrap_or_else(|| self.defaults.clone()),
            self.now(),
        )?;
        let record = lock(&handle).record.clone();
        tracing::info!(study = %id, "study created");
        Ok(record)
    }

    /// Issues a session. Without an explicit code a random unused one is drawn.
    pub fn create_session(
        &self,
        study: &str,
        respondent: Option<RespondentCode>,
    ) -> Result<SessionTicket, ServiceError> {
        let handle = self.handle(study)?;
        let mut h = lock(&handle);
        let record = &h.record;
        let mut rng = rand::rng();
        let code = match respondent {
            Some(code) if record.respondents.contains_key(&code) => {
                return Err(ServiceError::DuplicateCode(code))
            }
            Some(code) => code,
            None => {
                let free = RespondentCode::SPACE - record.respondents.len();
                if free == 0 {
                    return Err(ServiceError::CodeSpaceExhausted);
                }
                // rejection sampling while codes are plentiful, uniform pick among the rest otherwise
                let sampled = (free * 8 >= RespondentCode::SPACE)
                    .then(|| {
                        (0..64).find_map(|_| {
                            let c = RespondentCode::new(
                                rng.random_range(RespondentCode::MIN..=RespondentCode::MAX),
                            )
                            .expect("in range");
                            (!record.respondents.contains_key(&c)).then_some(c)
                        })
                    })
                    .flatten();
                match sampled {
                    Some(c) => c,
                    None => {
                        let nth = rng.random_range(0..free);
                        (RespondentCode::MIN..=RespondentCode::MAX)
                            .map(|c| RespondentCode::new(c).expect("in range"))
                            .filter(|c| !record.respondents.contains_key(c))
                            .nth(nth)
                            .expect("free code exists")
                    }
                }
            }
        };
        let plan = build_session_plan(
            &record.stimulus_set,
            code,
            &PlanConfig {
                trial_counts: record.settings.trial_counts,
                pairing_order: PairingOrder::counterbalanced(record.respondents.len()),
                seed: rng.random(),
            },
        )?;
        let token = uuid::Uuid::new_v4().simple().to_string();
        let at = self.now();
        let study_id = h.record.id.clone();
        self.commit(
            &mut h,
            at,
            Event::SessionCreated {
                token: token.clone(),
                plan: plan.clone(),
            },
        )?;
        Ok(SessionTicket {
            study: study_id,
            token,
            respondent: code,
            plan,
        })
    }

    pub fn session_plan(&self, token: &str) -> Result<SessionPlan, ServiceError> {
        let handle = self.token_study(token)?;
        let record = lock(&handle).record.clone();
        record
            .respondent_by_token(token)
            .map(|r| r.plan.clone())
            .ok_or(ServiceError::UnknownToken)
    }

    /// Stores new records; identical resubmissions are no-ops, conflicting ones are refused.
    pub fn submit_trials(&self, token: &str, batch: Vec<TrialRecord>) -> Result<TrialsAck, ServiceError> {
        let handle = self.token_study(token)?;
        let mut h = lock(&handle);
        let r = h
            .record
            .respondent_by_token(token)
            .ok_or(ServiceError::UnknownToken)?;
        let code = r.respondent;

        let mut fresh: BTreeMap<(u8, u32), TrialRecord> = BTreeMap::new();
        let mut duplicates = 0;
        for (i, t) in batch.into_iter().enumerate() {
            crate::record::check_trial(&r.plan, &t, i)?;
            let key = (t.block_index, t.trial_index);
            let existing = r.trial(key.0, key.1).or_else(|| fresh.get(&key));
            match existing {
                Some(prev) if *prev == t => duplicates += 1,
                Some(_) => {
                    return Err(ServiceError::Conflict(format!(
                        "trial ({}, {}) was already recorded with different values",
                        key.0, key.1
                    )))
                }
                None => {
                    fresh.insert(key, t);
                }
            }
        }
        let accepted = fresh.len();
        if accepted > 0 {
            let at = self.now();
            self.commit(
                &mut h,
                at,
                Event::TrialsAppended {
                    respondent: code,
                    records: fresh.into_values().collect(),
                },
            )?;
        }
        let r = &h.record.respondents[&code];
        Ok(TrialsAck {
            respondent: code,
            status: if accepted > 0 {
                BatchStatus::Appended
            } else {
                BatchStatus::DuplicateNoOp
            },
            accepted,
            duplicates,
            received_total: r.trials.len(),
            expected_total: r.plan.total_trials(),
            validation: validate_response_log(&r.plan, &r.trials),
        })
    }

    pub fn submit_questionnaire(
        &self,
        token: &str,
        raw: &BTreeMap<String, String>,
    ) -> Result<QuestionnaireAck, ServiceError> {
        let handle = self.token_study(token)?;
        let mut h = lock(&handle);
        let r = h
            .record
            .respondent_by_token(token)
            .ok_or(ServiceError::UnknownToken)?;
        let response = code_answers(&h.record.bank, r.respondent, raw)?;
        let replaced = r.response.is_some();
        let at = self.now();
        if let Some(gap) = h.record.settings.min_gap_ms {
            let earliest = r.iat_at.map(|t| t + gap);
            match earliest {
                Some(e) if at >= e => {}
                Some(e) => return Err(ServiceError::GapNotElapsed { remaining_ms: e - at }),
                None => return Err(ServiceError::GapNotElapsed { remaining_ms: gap }),
            }
        }
        let code = r.respondent;
        self.commit(
            &mut h,
            at,
            Event::QuestionnaireSubmitted {
                response: response.clone(),
            },
        )?;
        Ok(QuestionnaireAck {
            respondent: code,
            replaced,
            response,
        })
    }

    pub fn lock_study(&self, study: &str) -> Result<Arc<StudyRecord>, ServiceError> {
        let handle = self.handle(study)?;
        let mut h = lock(&handle);
        let at = self.now();
        self.commit(&mut h, at, Event::StudyLocked)?;
        Ok(h.record.clone())
    }

    /// Analyses a snapshot, then records the outcome.
    pub fn run_analysis(
        &self,
        study: &str,
        request: Option<AnalysisRequest>,
    ) -> Result<StoredAnalysis, ServiceError> {
        let snapshot = self.snapshot(study)?;
        let request = request.unwrap_or_else(|| AnalysisRequest {
            k_outliers: snapshot.settings.k_outliers,
            ..AnalysisRequest::default()
        });
        let outcome = analyze_record(&snapshot, &request)?;

        let handle = self.handle(study)?;
        let mut h = lock(&handle);
        let at = self.now();
        self.commit(
            &mut h,
            at,
            Event::AnalysisRun {
                request: request.clone(),
                outcome: outcome.clone(),
            },
        )?;
        Ok(StoredAnalysis {
            at,
            request,
            outcome,
        })
    }

    pub fn report(&self, study: &str) -> Result<Option<StoredAnalysis>, ServiceError> {
        Ok(self.snapshot(study)?.last_analysis.clone())
    }

    pub fn export(&self, study: &str) -> Result<Bundle, ServiceError> {
        Ok(Bundle::from_record(&*self.snapshot(study)?))
    }

    /// Recreates a study from a bundle; `id` overrides the bundled id.
    pub fn import(&self, id: Option<&str>, bundle: &Bundle) -> Result<Arc<StudyRecord>, ServiceError> {
        let contents = bundle.parse()?;
        let id = match id {
            Some(id) => StudyId::new(id)?,
            None => contents.manifest.id.clone(),
        };
        {
            let registry = self.registry.read().unwrap_or_else(|p| p.into_inner());
            if let Some(r) = contents
                .manifest
                .respondents
                .iter()
                .find(|r| registry.tokens.contains_key(&r.token))
            {
                return Err(ServiceError::Conflict(format!(
                    "session token of respondent {} is already in use",
                    r.respondent
                )));
            }
        }
        let m = &contents.manifest;
        let handle = self.insert_study(
            id,
            m.name.clone(),
            m.stimulus_set.clone(),
            m.bank.clone(),
            m.settings.clone(),
            m.created_at,
        )?;
        let mut h = lock(&handle);
        for (at, event) in contents.events() {
            self.commit(&mut h, at, event)?;
        }
        tracing::info!(study = %h.record.id, respondents = h.record.respondents.len(), "study imported");
        Ok(h.record.clone())
    }
}

/// Runs the pipeline over every respondent with both instruments complete.
pub fn analyze_record(
    record: &StudyRecord,
    request: &AnalysisRequest,
) -> Result<AnalysisOutcome, ServiceError> {
    let mut skipped = Vec::new();
    let mut sessions = Vec::new();
    for r in record.respondents.values() {
        if !r.iat_complete() {
            skipped.push(SkippedRespondent {
                respondent: r.respondent,
                reason: format!(
                    "IAT incomplete: {} of {} trials",
                    r.trials.len(),
                    r.plan.total_trials()
                ),
            });
            continue;
        }
        sessions.push(SessionInput {
            plan: &r.plan,
            trials: &r.trials,
            response: r.response.as_ref(),
        });
    }
    let (entries, more) = score_cohort(&record.bank, sessions, &request.scoring);
    skipped.extend(more);
    skipped.sort_by_key(|s| s.respondent);
    let (stats, report, optimized) = analyze_entries(&record.bank, &entries, request)?;
    Ok(AnalysisOutcome {
        stats,
        report,
        optimized,
        skipped,
    })
}
