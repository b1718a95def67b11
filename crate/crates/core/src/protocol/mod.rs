//! The five-block IAT protocol.
//!
//! Blocks 1 and 2 practise the concept and evaluation categories on their own,
//! block 3 merges them (one concept shares a key with "good"), block 4 repeats
//! the merged pairing with at least as many trials, and block 5 swaps the
//! concepts to the opposite sides. Blocks 3 and 5 are the scored blocks.

mod plan;
mod stimulus;
mod validate;

use serde::{Deserialize, Serialize};

pub use plan::{
    build_session_plan, BlockSpec, PairingOrder, PlanConfig, PlannedTrial, SessionPlan,
    BLOCK_COUNT, SCORED_BLOCKS,
};
pub use stimulus::{parse_stimulus_sets, Category, CategoryRole, StimulusSet, MIN_ITEMS};
pub use validate::{
    validate_response_log, validate_response_log_with, Issue, ValidationReport,
};

/// Response side. The left key is `e`, the right key is `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// Keyboard key conventionally bound to this side.
    pub fn key(self) -> char {
        match self {
            Side::Left => 'e',
            Side::Right => 'i',
        }
    }
}

/// One presented stimulus and the respondent's first keypress.
///
/// Latency is measured on the client; the server never re-times a trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub block_index: u8,
    pub trial_index: u32,
    pub stimulus: String,
    /// Milliseconds since session start at which the stimulus appeared.
    pub presented_at_ms: f64,
    pub response: Side,
    pub latency_ms: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("category `{category}` has {found} distinct items, at least {MIN_ITEMS} are required")]
    TooFewItems { category: String, found: usize },
    #[error("item `{item}` appears in both `{first}` and `{second}`")]
    SharedItem {
        item: String,
        first: String,
        second: String,
    },
    #[error("category label `{0}` is used more than once")]
    DuplicateLabel(String),
    #[error("category `{0}` has an empty label")]
    EmptyLabel(String),
    #[error("block {block} needs a positive trial count")]
    EmptyBlock { block: u8 },
    #[error("block 4 must repeat block 3 with at least as many trials ({block4} < {block3})")]
    Block4NotIncreased { block3: u32, block4: u32 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
