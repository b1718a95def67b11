use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stimulus::{CategoryRole, StimulusSet};
use super::{ProtocolError, Side};
use crate::RespondentCode;

pub const BLOCK_COUNT: usize = 5;
pub const SCORED_BLOCKS: [u8; 2] = [3, 5];

/// Which concept shares a key with "good" in block 3.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingOrder {
    #[default]
    AGoodFirst,
    BGoodFirst,
}

impl PairingOrder {
    /// Alternates the pairing order by respondent position.
    pub fn counterbalanced(position: usize) -> Self {
        if position.is_multiple_of(2) {
            PairingOrder::AGoodFirst
        } else {
            PairingOrder::BGoodFirst
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            PairingOrder::AGoodFirst => PairingOrder::BGoodFirst,
            PairingOrder::BGoodFirst => PairingOrder::AGoodFirst,
        }
    }

    /// The scored block in which concept A is paired with "good".
    pub fn a_good_block(self) -> u8 {
        match self {
            PairingOrder::AGoodFirst => 3,
            PairingOrder::BGoodFirst => 5,
        }
    }

    fn first_concept(self) -> CategoryRole {
        match self {
            PairingOrder::AGoodFirst => CategoryRole::ConceptA,
            PairingOrder::BGoodFirst => CategoryRole::ConceptB,
        }
    }

    fn second_concept(self) -> CategoryRole {
        match self {
            PairingOrder::AGoodFirst => CategoryRole::ConceptB,
            PairingOrder::BGoodFirst => CategoryRole::ConceptA,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    /// Trials in blocks 1..=5.
    pub trial_counts: [u32; BLOCK_COUNT],
    pub pairing_order: PairingOrder,
    pub seed: u64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            trial_counts: [20, 20, 40, 40, 40],
            pairing_order: PairingOrder::AGoodFirst,
            seed: 0,
        }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        for (i, &count) in self.trial_counts.iter().enumerate() {
            if count == 0 {
                return Err(ProtocolError::EmptyBlock { block: i as u8 + 1 });
            }
        }
        let [_, _, block3, block4, _] = self.trial_counts;
        if block4 < block3 {
            return Err(ProtocolError::Block4NotIncreased { block3, block4 });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub block_index: u8,
    pub left: Vec<CategoryRole>,
    pub right: Vec<CategoryRole>,
    pub trial_count: u32,
    pub is_scored: bool,
}

impl BlockSpec {
    pub fn side_of(&self, role: CategoryRole) -> Option<Side> {
        if self.left.contains(&role) {
            Some(Side::Left)
        } else if self.right.contains(&role) {
            Some(Side::Right)
        } else {
            None
        }
    }

    pub fn categories(&self) -> impl Iterator<Item = CategoryRole> + '_ {
        self.left.iter().chain(self.right.iter()).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedTrial {
    pub stimulus: String,
    pub category: CategoryRole,
    pub correct_side: Side,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub session_id: String,
    pub respondent: RespondentCode,
    pub stimulus_set: StimulusSet,
    pub blocks: Vec<BlockSpec>,
    /// `trials[b]` is the ordered trial list of block `b + 1`.
    pub trials: Vec<Vec<PlannedTrial>>,
    pub pairing_order: PairingOrder,
    pub rng_seed: u64,
}

impl SessionPlan {
    pub fn block(&self, block_index: u8) -> Option<&BlockSpec> {
        self.blocks.get((block_index as usize).checked_sub(1)?)
    }

    pub fn trial(&self, block_index: u8, trial_index: u32) -> Option<&PlannedTrial> {
        self.trials
            .get((block_index as usize).checked_sub(1)?)?
            .get(trial_index as usize)
    }

    pub fn total_trials(&self) -> usize {
        self.trials.iter().map(Vec::len).sum()
    }

    /// Human-readable labels of the categories on each side of a block.
    pub fn labels(&self, block_index: u8) -> Option<(Vec<&str>, Vec<&str>)> {
        let block = self.block(block_index)?;
        let names = |roles: &[CategoryRole]| {
            roles
                .iter()
                .map(|&r| self.stimulus_set.category(r).label.as_str())
                .collect()
        };
        Some((names(&block.left), names(&block.right)))
    }
}

fn block_layout(order: PairingOrder) -> [(Vec<CategoryRole>, Vec<CategoryRole>); BLOCK_COUNT] {
    use CategoryRole::{EvalBad, EvalGood};
    let first = order.first_concept();
    let second = order.second_concept();
    [
        (vec![first], vec![second]),
        (vec![EvalGood], vec![EvalBad]),
        (vec![first, EvalGood], vec![second, EvalBad]),
        (vec![first, EvalGood], vec![second, EvalBad]),
        (vec![second, EvalGood], vec![first, EvalBad]),
    ]
}

/// Builds the five-block schedule for one respondent.
///
/// Each block draws a category multiset whose counts differ by at most one,
/// cycles through a shuffled copy of each category's items, then shuffles the
/// block. The same seed always yields the same plan.
pub fn build_session_plan(
    stimulus_set: &StimulusSet,
    respondent: RespondentCode,
    config: &PlanConfig,
) -> Result<SessionPlan, ProtocolError> {
    stimulus_set.validate()?;
    config.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut blocks = Vec::with_capacity(BLOCK_COUNT);
    let mut trials = Vec::with_capacity(BLOCK_COUNT);

    for (i, (left, right)) in block_layout(config.pairing_order).into_iter().enumerate() {
        let block = BlockSpec {
            block_index: i as u8 + 1,
            left,
            right,
            trial_count: config.trial_counts[i],
            is_scored: SCORED_BLOCKS.contains(&(i as u8 + 1)),
        };
        trials.push(block_trials(stimulus_set, &block, &mut rng));
        blocks.push(block);
    }

    Ok(SessionPlan {
        session_id: format!("{respondent}-{:016x}", config.seed),
        respondent,
        stimulus_set: stimulus_set.clone(),
        blocks,
        trials,
        pairing_order: config.pairing_order,
        rng_seed: config.seed,
    })
}

fn block_trials(set: &StimulusSet, block: &BlockSpec, rng: &mut ChaCha8Rng) -> Vec<PlannedTrial> {
    let mut roles: Vec<CategoryRole> = block.categories().collect();
    let n = block.trial_count as usize;
    let base = n / roles.len();
    let extra = n % roles.len();
    // which categories receive the remainder is itself randomised
    roles.shuffle(rng);

    let mut out = Vec::with_capacity(n);
    for (pos, &role) in roles.iter().enumerate() {
        let count = base + usize::from(pos < extra);
        let side = block.side_of(role).expect("role belongs to block");
        let mut items: Vec<&String> = set
            .category(role)
            .items
            .iter()
            .filter(|s| !s.trim().is_empty())
            .collect();
        let mut seen = HashSet::new();
        items.retain(|s| seen.insert(s.as_str()));
        let mut cycle = Vec::new();
        while cycle.len() < count {
            items.shuffle(rng);
            cycle.extend(items.iter().copied());
        }
        out.extend(cycle.into_iter().take(count).map(|item| PlannedTrial {
            stimulus: item.clone(),
            category: role,
            correct_side: side,
        }));
    }
    out.shuffle(rng);
    out
}
