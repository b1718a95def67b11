//! Study export format: `study.json`, `trials.jsonl` and `answers.csv`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use iatpoll_core::questionnaire::{read_cohort_csv, write_cohort_csv, QuestionnaireError};
use iatpoll_core::simulator::SyntheticCohort;
use iatpoll_core::{
    CodedResponse, QuestionBank, RespondentCode, SessionPlan, Side, StimulusSet, TrialRecord,
};

use crate::error::ServiceError;
use crate::record::{Event, Lifecycle, LogEntry, Millis, StudyId, StudyRecord, StudySettings};

pub const STUDY_FILE: &str = "study.json";
pub const TRIALS_FILE: &str = "trials.jsonl";
pub const ANSWERS_FILE: &str = "answers.csv";

const FORMAT_VERSION: u32 = 1;

/// The three export files as text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bundle {
    #[serde(rename = "study.json")]
    pub study_json: String,
    #[serde(rename = "trials.jsonl")]
    pub trials_jsonl: String,
    #[serde(rename = "answers.csv")]
    pub answers_csv: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub id: StudyId,
    pub name: String,
    pub lifecycle: Lifecycle,
    pub created_at: Millis,
    pub settings: StudySettings,
    pub stimulus_set: StimulusSet,
    pub bank: QuestionBank,
    pub respondents: Vec<ManifestRespondent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRespondent {
    pub respondent: RespondentCode,
    pub token: String,
    pub created_at: Millis,
    pub iat_at: Option<Millis>,
    pub questionnaire_at: Option<Millis>,
    pub plan: SessionPlan,
}

/// One line of `trials.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialLine {
    respondent: RespondentCode,
    block_index: u8,
    trial_index: u32,
    stimulus: String,
    presented_at_ms: f64,
    response: Side,
    latency_ms: f64,
    correct: bool,
}

impl TrialLine {
    fn new(respondent: RespondentCode, t: &TrialRecord) -> Self {
        Self {
            respondent,
            block_index: t.block_index,
            trial_index: t.trial_index,
            stimulus: t.stimulus.clone(),
            presented_at_ms: t.presented_at_ms,
            response: t.response,
            latency_ms: t.latency_ms,
            correct: t.correct,
        }
    }

    fn into_record(self) -> TrialRecord {
        TrialRecord {
            block_index: self.block_index,
            trial_index: self.trial_index,
            stimulus: self.stimulus,
            presented_at_ms: self.presented_at_ms,
            response: self.response,
            latency_ms: self.latency_ms,
            correct: self.correct,
        }
    }
}

/// A parsed bundle, checked for internal consistency.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleContents {
    pub manifest: Manifest,
    pub trials: BTreeMap<RespondentCode, Vec<TrialRecord>>,
    pub responses: BTreeMap<RespondentCode, CodedResponse>,
}

fn bundle_err(file: &'static str, line: usize, message: impl Into<String>) -> ServiceError {
    ServiceError::Bundle {
        file,
        line,
        message: message.into(),
    }
}

impl Bundle {
    pub fn from_record(record: &StudyRecord) -> Self {
        let manifest = Manifest {
            format: FORMAT_VERSION,
            id: record.id.clone(),
            name: record.name.clone(),
            lifecycle: record.lifecycle,
            created_at: record.created_at,
            settings: record.settings.clone(),
            stimulus_set: record.stimulus_set.clone(),
            bank: record.bank.clone(),
            respondents: record
                .respondents
                .values()
                .map(|r| ManifestRespondent {
                    respondent: r.respondent,
                    token: r.token.clone(),
                    created_at: r.created_at,
                    iat_at: r.iat_at,
                    questionnaire_at: r.questionnaire_at,
                    plan: r.plan.clone(),
                })
                .collect(),
        };
        let mut study_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        study_json.push('\n');

        let mut trials_jsonl = String::new();
        for r in record.respondents.values() {
            for t in &r.trials {
                trials_jsonl.push_str(
                    &serde_json::to_string(&TrialLine::new(r.respondent, t)).expect("serializes"),
                );
                trials_jsonl.push('\n');
            }
        }

        let responses: Vec<CodedResponse> = record
            .respondents
            .values()
            .filter_map(|r| r.response.clone())
            .collect();
        let mut csv = Vec::new();
        write_cohort_csv(&record.bank, &responses, &mut csv).expect("in-memory write");
        Self {
            study_json,
            trials_jsonl,
            answers_csv: String::from_utf8(csv).expect("csv is utf-8"),
        }
    }

    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(STUDY_FILE), &self.study_json)?;
        std::fs::write(dir.join(TRIALS_FILE), &self.trials_jsonl)?;
        std::fs::write(dir.join(ANSWERS_FILE), &self.answers_csv)
    }

    pub fn read_dir(dir: &Path) -> std::io::Result<Self> {
        Ok(Self {
            study_json: std::fs::read_to_string(dir.join(STUDY_FILE))?,
            trials_jsonl: std::fs::read_to_string(dir.join(TRIALS_FILE))?,
            answers_csv: std::fs::read_to_string(dir.join(ANSWERS_FILE))?,
        })
    }

    pub fn parse(&self) -> Result<BundleContents, ServiceError> {
        let manifest: Manifest = serde_json::from_str(&self.study_json)
            .map_err(|e| bundle_err(STUDY_FILE, e.line(), e.to_string()))?;
        if manifest.format != FORMAT_VERSION {
            return Err(bundle_err(
                STUDY_FILE,
                0,
                format!("unsupported format {}", manifest.format),
            ));
        }
        let mut codes = BTreeSet::new();
        let mut tokens = BTreeSet::new();
        for r in &manifest.respondents {
            if !codes.insert(r.respondent) {
                return Err(ServiceError::DuplicateCode(r.respondent));
            }
            if !tokens.insert(r.token.as_str()) {
                return Err(bundle_err(STUDY_FILE, 0, format!("token of {} repeated", r.respondent)));
            }
            if r.plan.respondent != r.respondent {
                return Err(bundle_err(
                    STUDY_FILE,
                    0,
                    format!("plan of {} belongs to {}", r.respondent, r.plan.respondent),
                ));
            }
        }

        let mut trials: BTreeMap<RespondentCode, Vec<TrialRecord>> = BTreeMap::new();
        for (i, line) in self.trials_jsonl.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let t: TrialLine =
                serde_json::from_str(line).map_err(|e| bundle_err(TRIALS_FILE, i + 1, e.to_string()))?;
            if !codes.contains(&t.respondent) {
                return Err(bundle_err(
                    TRIALS_FILE,
                    i + 1,
                    format!("respondent {} has no session", t.respondent),
                ));
            }
            trials.entry(t.respondent).or_default().push(t.into_record());
        }

        let cohort = read_cohort_csv(&manifest.bank, self.answers_csv.as_bytes()).map_err(|e| match e {
            QuestionnaireError::Csv { line, message } => bundle_err(ANSWERS_FILE, line as usize, message),
            other => other.into(),
        })?;
        let mut responses = BTreeMap::new();
        for response in cohort {
            if !codes.contains(&response.respondent) {
                return Err(bundle_err(
                    ANSWERS_FILE,
                    0,
                    format!("respondent {} has no session", response.respondent),
                ));
            }
            if responses.insert(response.respondent, response.clone()).is_some() {
                return Err(ServiceError::DuplicateCode(response.respondent));
            }
        }

        for r in &manifest.respondents {
            if trials.contains_key(&r.respondent) != r.iat_at.is_some() {
                return Err(bundle_err(
                    STUDY_FILE,
                    0,
                    format!("iat_at of {} disagrees with trials.jsonl", r.respondent),
                ));
            }
            if responses.contains_key(&r.respondent) != r.questionnaire_at.is_some() {
                return Err(bundle_err(
                    STUDY_FILE,
                    0,
                    format!("questionnaire_at of {} disagrees with answers.csv", r.respondent),
                ));
            }
        }
        Ok(BundleContents {
            manifest,
            trials,
            responses,
        })
    }
}

impl BundleContents {
    /// Events that rebuild the study after its creation entry.
    pub fn events(&self) -> Vec<(Millis, Event)> {
        let mut events = Vec::new();
        let mut latest = self.manifest.created_at;
        for r in &self.manifest.respondents {
            events.push((
                r.created_at,
                Event::SessionCreated {
                    token: r.token.clone(),
                    plan: r.plan.clone(),
                },
            ));
            latest = latest.max(r.created_at);
            if let (Some(at), Some(records)) = (r.iat_at, self.trials.get(&r.respondent)) {
                events.push((
                    at,
                    Event::TrialsAppended {
                        respondent: r.respondent,
                        records: records.clone(),
                    },
                ));
                latest = latest.max(at);
            }
            if let (Some(at), Some(response)) = (r.questionnaire_at, self.responses.get(&r.respondent)) {
                events.push((
                    at,
                    Event::QuestionnaireSubmitted {
                        response: response.clone(),
                    },
                ));
                latest = latest.max(at);
            }
        }
        if self.manifest.lifecycle == Lifecycle::Locked {
            events.push((latest, Event::StudyLocked));
        }
        events
    }

    /// Replays the bundle into a record without touching a store.
    pub fn to_record(&self) -> Result<StudyRecord, ServiceError> {
        let m = &self.manifest;
        let mut record = StudyRecord::from_first(&LogEntry {
            seq: 1,
            at: m.created_at,
            event: Event::StudyCreated {
                id: m.id.clone(),
                name: m.name.clone(),
                stimulus_set: m.stimulus_set.clone(),
                bank: m.bank.clone(),
                settings: m.settings.clone(),
            },
        })?;
        for (at, event) in self.events() {
            let seq = record.last_seq + 1;
            record.apply(&LogEntry { seq, at, event })?;
        }
        Ok(record)
    }
}

/// Fixed timeline for simulated studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimulatedTimeline {
    pub start: Millis,
    /// Delay between consecutive sessions.
    pub session_spacing: Millis,
    /// Delay between opening a session and finishing the IAT.
    pub iat_duration: Millis,
    /// Delay between the IAT and the questionnaire.
    pub questionnaire_gap: Millis,
}

impl Default for SimulatedTimeline {
    fn default() -> Self {
        Self {
            start: 1_700_000_000_000,
            session_spacing: 60_000,
            iat_duration: 600_000,
            questionnaire_gap: 14 * 24 * 3_600_000,
        }
    }
}

/// Packages a simulated cohort as an importable bundle. Tokens come from
/// `seed`, so the bundle is a pure function of its inputs.
pub fn bundle_from_cohort(
    cohort: &SyntheticCohort,
    id: StudyId,
    timeline: SimulatedTimeline,
    seed: u64,
) -> Result<Bundle, ServiceError> {
    let first = cohort
        .respondents
        .first()
        .ok_or_else(|| ServiceError::invalid("cohort", "no respondents"))?;
    let trial_counts: [u32; 5] = first
        .plan
        .blocks
        .iter()
        .map(|b| b.trial_count)
        .collect::<Vec<_>>()
        .try_into()
        .map_err(|_| ServiceError::invalid("cohort", "plans must have five blocks"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let manifest = Manifest {
        format: FORMAT_VERSION,
        name: format!("simulated {} (n = {})", cohort.stimulus_set.topic, cohort.respondents.len()),
        id,
        lifecycle: Lifecycle::Open,
        created_at: timeline.start,
        settings: StudySettings {
            trial_counts,
            ..StudySettings::default()
        },
        stimulus_set: cohort.stimulus_set.clone(),
        bank: cohort.bank.clone(),
        respondents: cohort
            .respondents
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let created_at = timeline.start + (i as Millis + 1) * timeline.session_spacing;
                let iat_at = created_at + timeline.iat_duration;
                ManifestRespondent {
                    respondent: r.latent.id,
                    token: uuid::Builder::from_random_bytes(rng.random())
                        .into_uuid()
                        .simple()
                        .to_string(),
                    created_at,
                    iat_at: Some(iat_at),
                    questionnaire_at: Some(iat_at + timeline.questionnaire_gap),
                    plan: r.plan.clone(),
                }
            })
            .collect(),
    };
    let contents = BundleContents {
        manifest,
        trials: cohort
            .respondents
            .iter()
            .map(|r| (r.latent.id, r.trials.clone()))
            .collect(),
        responses: cohort
            .respondents
            .iter()
            .map(|r| (r.latent.id, r.response.clone()))
            .collect(),
    };
    Ok(Bundle::from_record(&contents.to_record()?))
}
