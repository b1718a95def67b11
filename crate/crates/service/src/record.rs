//! Study state and the events that build it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use iatpoll_core::pipeline::{AnalysisOutcome, AnalysisRequest};
use iatpoll_core::protocol::PlanConfig;
use iatpoll_core::{
    CodedResponse, QuestionBank, RespondentCode, SessionPlan, StimulusSet, TrialRecord,
};

use crate::error::ServiceError;

/// Milliseconds since the Unix epoch.
pub type Millis = u64;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StudyId(String);

impl StudyId {
    /// 1-64 characters from `[A-Za-z0-9_-]`, so ids are safe as directory names.
    pub fn new(id: impl Into<String>) -> Result<Self, ServiceError> {
        let id = id.into();
        let ok = !id.is_empty()
            && id.len() <= 64
            && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
        if ok {
            Ok(Self(id))
        } else {
            Err(ServiceError::invalid(
                "id",
                "study ids use 1-64 characters from A-Z, a-z, 0-9, '-' and '_'",
            ))
        }
    }

    pub fn generate() -> Self {
        Self(uuid::Uuid::new_v4().simple().to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for StudyId {
    type Error = ServiceError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<StudyId> for String {
    fn from(id: StudyId) -> String {
        id.0
    }
}

impl fmt::Display for StudyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySettings {
    pub trial_counts: [u32; 5],
    pub k_outliers: usize,
    /// When set, questionnaires earlier than this after the last IAT batch are refused.
    pub min_gap_ms: Option<u64>,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            trial_counts: PlanConfig::default().trial_counts,
            k_outliers: 4,
            min_gap_ms: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifecycle {
    #[default]
    Open,
    Locked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RespondentRecord {
    pub respondent: RespondentCode,
    pub token: String,
    pub plan: SessionPlan,
    /// Sorted by (block, trial), unique.
    pub trials: Vec<TrialRecord>,
    pub response: Option<CodedResponse>,
    pub created_at: Millis,
    /// Time of the most recent trial batch.
    pub iat_at: Option<Millis>,
    pub questionnaire_at: Option<Millis>,
}

impl RespondentRecord {
    pub fn iat_complete(&self) -> bool {
        self.trials.len() == self.plan.total_trials()
    }

    /// Eligible for analysis.
    pub fn is_complete(&self) -> bool {
        self.iat_complete() && self.response.is_some()
    }

    fn position(&self, block_index: u8, trial_index: u32) -> Result<usize, usize> {
        self.trials
            .binary_search_by_key(&(block_index, trial_index), |t| (t.block_index, t.trial_index))
    }

    pub fn trial(&self, block_index: u8, trial_index: u32) -> Option<&TrialRecord> {
        self.position(block_index, trial_index).ok().map(|i| &self.trials[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredAnalysis {
    pub at: Millis,
    pub request: AnalysisRequest,
    pub outcome: AnalysisOutcome,
}

// Externally tagged: internal tagging buffers the payload, which loses
// integer map keys and float precision on the way back in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    StudyCreated {
        id: StudyId,
        name: String,
        stimulus_set: StimulusSet,
        bank: QuestionBank,
        settings: StudySettings,
    },
    SessionCreated {
        token: String,
        plan: SessionPlan,
    },
    /// Only records not already stored.
    TrialsAppended {
        respondent: RespondentCode,
        records: Vec<TrialRecord>,
    },
    QuestionnaireSubmitted {
        response: CodedResponse,
    },
    StudyLocked,
    AnalysisRun {
        request: AnalysisRequest,
        outcome: AnalysisOutcome,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub at: Millis,
    pub event: Event,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub id: StudyId,
    pub name: String,
    pub stimulus_set: StimulusSet,
    pub bank: QuestionBank,
    pub settings: StudySettings,
    pub lifecycle: Lifecycle,
    pub created_at: Millis,
    pub respondents: BTreeMap<RespondentCode, RespondentRecord>,
    /// Session token to respondent.
    pub tokens: BTreeMap<String, RespondentCode>,
    pub last_analysis: Option<StoredAnalysis>,
    /// Sequence number of the last applied entry.
    pub last_seq: u64,
}

fn corrupt(seq: u64, message: impl Into<String>) -> ServiceError {
    ServiceError::CorruptLog {
        line: seq as usize,
        message: message.into(),
    }
}

impl StudyRecord {
    /// Builds a record from its first entry, which must create the study.
    pub fn from_first(entry: &LogEntry) -> Result<Self, ServiceError> {
        if entry.seq != 1 {
            return Err(corrupt(entry.seq, "log must start at sequence 1"));
        }
        let Event::StudyCreated {
            id,
            name,
            stimulus_set,
            bank,
            settings,
        } = &entry.event
        else {
            return Err(corrupt(entry.seq, "first entry must create the study"));
        };
        stimulus_set.validate()?;
        bank.validate()?;
        PlanConfig {
            trial_counts: settings.trial_counts,
            ..PlanConfig::default()
        }
        .validate()?;
        Ok(Self {
            id: id.clone(),
            name: name.clone(),
            stimulus_set: stimulus_set.clone(),
            bank: bank.clone(),
            settings: settings.clone(),
            lifecycle: Lifecycle::Open,
            created_at: entry.at,
            respondents: BTreeMap::new(),
            tokens: BTreeMap::new(),
            last_analysis: None,
            last_seq: 1,
        })
    }

    pub fn replay<'a>(entries: impl IntoIterator<Item = &'a LogEntry>) -> Result<Self, ServiceError> {
        let mut it = entries.into_iter();
        let first = it.next().ok_or_else(|| corrupt(0, "empty log"))?;
        let mut record = Self::from_first(first)?;
        for entry in it {
            record.apply(entry)?;
        }
        Ok(record)
    }

    pub fn respondent_by_token(&self, token: &str) -> Option<&RespondentRecord> {
        self.tokens.get(token).and_then(|c| self.respondents.get(c))
    }

    pub fn complete_count(&self) -> usize {
        self.respondents.values().filter(|r| r.is_complete()).count()
    }

    fn ensure_open(&self) -> Result<(), ServiceError> {
        match self.lifecycle {
            Lifecycle::Open => Ok(()),
            Lifecycle::Locked => Err(ServiceError::Locked(self.id.to_string())),
        }
    }

    fn respondent(&self, code: RespondentCode) -> Result<&RespondentRecord, ServiceError> {
        self.respondents
            .get(&code)
            .ok_or_else(|| ServiceError::invalid("respondent", format!("no session for {code}")))
    }

    /// Validates an entry against the current state without changing it.
    pub fn check(&self, entry: &LogEntry) -> Result<(), ServiceError> {
        if entry.seq != self.last_seq + 1 {
            return Err(corrupt(
                entry.seq,
                format!("expected sequence {}, found {}", self.last_seq + 1, entry.seq),
            ));
        }
        match &entry.event {
            Event::StudyCreated { .. } => Err(corrupt(entry.seq, "study created twice")),
            Event::SessionCreated { token, plan } => {
                self.ensure_open()?;
                if self.respondents.contains_key(&plan.respondent) {
                    return Err(ServiceError::DuplicateCode(plan.respondent));
                }
                if token.is_empty() || self.tokens.contains_key(token) {
                    return Err(ServiceError::Conflict("session token already issued".into()));
                }
                if plan.stimulus_set != self.stimulus_set {
                    return Err(ServiceError::Conflict(
                        "plan uses a different stimulus set".into(),
                    ));
                }
                Ok(())
            }
            Event::TrialsAppended {
                respondent,
                records,
            } => {
                self.ensure_open()?;
                let r = self.respondent(*respondent)?;
                let mut seen = BTreeSet::new();
                for (i, t) in records.iter().enumerate() {
                    check_trial(&r.plan, t, i)?;
                    if r.trial(t.block_index, t.trial_index).is_some()
                        || !seen.insert((t.block_index, t.trial_index))
                    {
                        return Err(ServiceError::Conflict(format!(
                            "trial ({}, {}) already recorded",
                            t.block_index, t.trial_index
                        )));
                    }
                }
                Ok(())
            }
            Event::QuestionnaireSubmitted { response } => {
                self.ensure_open()?;
                self.respondent(response.respondent)?;
                response.validate(&self.bank)?;
                Ok(())
            }
            Event::StudyLocked => self.ensure_open(),
            Event::AnalysisRun { .. } => Ok(()),
        }
    }

    /// Applies an entry that passed [`check`](Self::check).
    fn mutate(&mut self, entry: &LogEntry) {
        self.last_seq = entry.seq;
        match &entry.event {
            Event::StudyCreated { .. } => unreachable!("rejected by check"),
            Event::SessionCreated { token, plan } => {
                self.tokens.insert(token.clone(), plan.respondent);
                self.respondents.insert(
                    plan.respondent,
                    RespondentRecord {
                        respondent: plan.respondent,
                        token: token.clone(),
                        plan: plan.clone(),
                        trials: Vec::new(),
                        response: None,
                        created_at: entry.at,
                        iat_at: None,
                        questionnaire_at: None,
                    },
                );
            }
            Event::TrialsAppended {
                respondent,
                records,
            } => {
                let r = self.respondents.get_mut(respondent).expect("checked");
                for t in records {
                    let at = r.position(t.block_index, t.trial_index).unwrap_err();
                    r.trials.insert(at, t.clone());
                }
                r.iat_at = Some(entry.at);
            }
            Event::QuestionnaireSubmitted { response } => {
                let r = self.respondents.get_mut(&response.respondent).expect("checked");
                r.response = Some(response.clone());
                r.questionnaire_at = Some(entry.at);
            }
            Event::StudyLocked => self.lifecycle = Lifecycle::Locked,
            Event::AnalysisRun { request, outcome } => {
                self.last_analysis = Some(StoredAnalysis {
                    at: entry.at,
                    request: request.clone(),
                    outcome: outcome.clone(),
                });
            }
        }
    }

    /// Checks and applies; on error the record is unchanged.
    pub fn apply(&mut self, entry: &LogEntry) -> Result<(), ServiceError> {
        self.check(entry)?;
        self.mutate(entry);
        Ok(())
    }

    pub(crate) fn apply_checked(&mut self, entry: &LogEntry) {
        self.mutate(entry);
    }

    /// Structural invariants that must hold after any replay.
    pub fn check_consistency(&self) -> Result<(), String> {
        let mut tokens = BTreeSet::new();
        if self.tokens.len() != self.respondents.len() {
            return Err("token index out of step with respondents".into());
        }
        for (code, r) in &self.respondents {
            if self.tokens.get(&r.token) != Some(code) {
                return Err(format!("token index disagrees for {code}"));
            }
            if *code != r.respondent || r.plan.respondent != *code {
                return Err(format!("respondent {code} filed under the wrong code"));
            }
            if !tokens.insert(r.token.as_str()) {
                return Err(format!("token of {code} is shared"));
            }
            for w in r.trials.windows(2) {
                if (w[0].block_index, w[0].trial_index) >= (w[1].block_index, w[1].trial_index) {
                    return Err(format!("trials of {code} not strictly ordered"));
                }
            }
            for (i, t) in r.trials.iter().enumerate() {
                check_trial(&r.plan, t, i).map_err(|e| format!("{code}: {e}"))?;
            }
            if let Some(resp) = &r.response {
                resp.validate(&self.bank).map_err(|e| format!("{code}: {e}"))?;
            }
            if r.trials.is_empty() != r.iat_at.is_none() {
                return Err(format!("{code}: IAT timestamp out of step with trials"));
            }
        }
        Ok(())
    }
}

/// Plausibility checks on one client-reported record.
pub(crate) fn check_trial(plan: &SessionPlan, t: &TrialRecord, i: usize) -> Result<(), ServiceError> {
    let field = |name: &str| format!("trials[{i}].{name}");
    if !t.latency_ms.is_finite() || t.latency_ms < 0.0 {
        return Err(ServiceError::invalid(
            field("latency_ms"),
            format!("must be a non-negative number, got {}", t.latency_ms),
        ));
    }
    if !t.presented_at_ms.is_finite() || t.presented_at_ms < 0.0 {
        return Err(ServiceError::invalid(
            field("presented_at_ms"),
            format!("must be a non-negative number, got {}", t.presented_at_ms),
        ));
    }
    if plan.block(t.block_index).is_none() {
        return Err(ServiceError::invalid(
            field("block_index"),
            format!("no block {}", t.block_index),
        ));
    }
    let planned = plan.trial(t.block_index, t.trial_index).ok_or_else(|| {
        ServiceError::invalid(
            field("trial_index"),
            format!("block {} has no trial {}", t.block_index, t.trial_index),
        )
    })?;
    if planned.stimulus != t.stimulus {
        return Err(ServiceError::invalid(
            field("stimulus"),
            format!("expected `{}`, got `{}`", planned.stimulus, t.stimulus),
        ));
    }
    Ok(())
}
