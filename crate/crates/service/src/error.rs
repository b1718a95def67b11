use iatpoll_core::pipeline::PipelineError;
use iatpoll_core::protocol::ProtocolError;
use iatpoll_core::questionnaire::QuestionnaireError;
use iatpoll_core::RespondentCode;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("study `{0}` not found")]
    StudyNotFound(String),
    #[error("unknown session token")]
    UnknownToken,
    #[error("study `{0}` already exists")]
    StudyExists(String),
    #[error("respondent code {0} is already in use")]
    DuplicateCode(RespondentCode),
    #[error("all 4-digit respondent codes are in use")]
    CodeSpaceExhausted,
    #[error("study `{0}` is locked")]
    Locked(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid `{field}`: {message}")]
    InvalidField { field: String, message: String },
    #[error("questionnaire submitted before the minimum gap: {remaining_ms} ms remaining")]
    GapNotElapsed { remaining_ms: u64 },
    #[error(transparent)]
    Questionnaire(#[from] QuestionnaireError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{file} line {line}: {message}")]
    Bundle {
        file: &'static str,
        line: usize,
        message: String,
    },
    #[error("event log line {line}: {message}")]
    CorruptLog { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ServiceError::InvalidField {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Stable machine-readable tag used in HTTP error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::StudyNotFound(_) => "study_not_found",
            ServiceError::UnknownToken => "unknown_token",
            ServiceError::StudyExists(_) => "study_exists",
            ServiceError::DuplicateCode(_) => "duplicate_code",
            ServiceError::CodeSpaceExhausted => "code_space_exhausted",
            ServiceError::Locked(_) => "locked",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::InvalidField { .. } => "invalid_field",
            ServiceError::GapNotElapsed { .. } => "gap_not_elapsed",
            ServiceError::Questionnaire(_) => "questionnaire",
            ServiceError::Protocol(_) => "protocol",
            ServiceError::Pipeline(_) => "analysis",
            ServiceError::Bundle { .. } => "bundle",
            ServiceError::CorruptLog { .. } => "corrupt_log",
            ServiceError::Io(_) => "io",
        }
    }
}
