use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{SessionPlan, TrialRecord};
use crate::scoring::LatencyPolicy;

/// One problem found in a response log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Issue {
    ScoredBlockAbsent { block: u8 },
    MissingTrials { block: u8, missing: usize },
    UnknownTrial { block: u8, trial: u32 },
    DuplicateTrial { block: u8, trial: u32 },
    StimulusMismatch { block: u8, trial: u32 },
    CorrectnessMismatch { block: u8, trial: u32 },
    InvalidLatency { block: u8, trial: u32 },
    NonMonotonePresentation { block: u8, trial: u32 },
    LatencyAboveCeiling { block: u8, trial: u32, latency_ms: f64 },
    FastResponder { fraction: f64, threshold: f64 },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::ScoredBlockAbsent { block } => write!(f, "scored block absent (block {block})"),
            Issue::MissingTrials { block, missing } => {
                write!(f, "block {block}: {missing} trials missing")
            }
            Issue::UnknownTrial { block, trial } => {
                write!(f, "block {block} trial {trial}: not in plan")
            }
            Issue::DuplicateTrial { block, trial } => {
                write!(f, "block {block} trial {trial}: duplicate record")
            }
            Issue::StimulusMismatch { block, trial } => {
                write!(f, "block {block} trial {trial}: stimulus differs from plan")
            }
            Issue::CorrectnessMismatch { block, trial } => {
                write!(f, "block {block} trial {trial}: correct flag disagrees with response side")
            }
            Issue::InvalidLatency { block, trial } => {
                write!(f, "block {block} trial {trial}: latency negative or not finite")
            }
            Issue::NonMonotonePresentation { block, trial } => {
                write!(f, "block {block} trial {trial}: presentation time goes backwards")
            }
            Issue::LatencyAboveCeiling {
                block,
                trial,
                latency_ms,
            } => write!(
                f,
                "block {block} trial {trial}: latency {latency_ms} ms above discard ceiling"
            ),
            Issue::FastResponder {
                fraction,
                threshold,
            } => write!(
                f,
                "fast-responder flag: {:.1}% of latencies below floor (threshold {:.1}%)",
                fraction * 100.0,
                threshold * 100.0
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

/// Checks a response log against its plan with the default latency policy.
pub fn validate_response_log(plan: &SessionPlan, records: &[TrialRecord]) -> ValidationReport {
    validate_response_log_with(plan, records, &LatencyPolicy::default())
}

/// Reports every structural and plausibility problem; never fails.
pub fn validate_response_log_with(
    plan: &SessionPlan,
    records: &[TrialRecord],
    policy: &LatencyPolicy,
) -> ValidationReport {
    let mut issues = Vec::new();
    let mut seen: BTreeMap<u8, BTreeSet<u32>> = BTreeMap::new();
    let mut last_presented: BTreeMap<u8, f64> = BTreeMap::new();
    let mut timed = 0usize;
    let mut fast = 0usize;

    // presentation order is judged in trial-index order, not arrival order
    let mut ordered: Vec<&TrialRecord> = records.iter().collect();
    ordered.sort_by_key(|r| (r.block_index, r.trial_index));

    for rec in ordered {
        let (block, trial) = (rec.block_index, rec.trial_index);
        let Some(planned) = plan.trial(block, trial) else {
            issues.push(Issue::UnknownTrial { block, trial });
            continue;
        };
        if !seen.entry(block).or_default().insert(trial) {
            issues.push(Issue::DuplicateTrial { block, trial });
            continue;
        }
        if planned.stimulus != rec.stimulus {
            issues.push(Issue::StimulusMismatch { block, trial });
        }
        if (rec.response == planned.correct_side) != rec.correct {
            issues.push(Issue::CorrectnessMismatch { block, trial });
        }
        if !rec.latency_ms.is_finite() || rec.latency_ms < 0.0 || !rec.presented_at_ms.is_finite()
        {
            issues.push(Issue::InvalidLatency { block, trial });
            continue;
        }
        if let Some(&prev) = last_presented.get(&block) {
            if rec.presented_at_ms <= prev {
                issues.push(Issue::NonMonotonePresentation { block, trial });
            }
        }
        last_presented.insert(block, rec.presented_at_ms);
        if rec.latency_ms > policy.ceiling_ms {
            issues.push(Issue::LatencyAboveCeiling {
                block,
                trial,
                latency_ms: rec.latency_ms,
            });
        }
        timed += 1;
        if rec.latency_ms < policy.fast_ms {
            fast += 1;
        }
    }

    for spec in &plan.blocks {
        let got = seen.get(&spec.block_index).map_or(0, BTreeSet::len);
        let expected = spec.trial_count as usize;
        if got == 0 && spec.is_scored {
            issues.push(Issue::ScoredBlockAbsent {
                block: spec.block_index,
            });
        } else if got < expected {
            issues.push(Issue::MissingTrials {
                block: spec.block_index,
                missing: expected - got,
            });
        }
    }

    if timed > 0 {
        let fraction = fast as f64 / timed as f64;
        if fraction > policy.fast_fraction {
            issues.push(Issue::FastResponder {
                fraction,
                threshold: policy.fast_fraction,
            });
        }
    }

    ValidationReport {
        ok: issues.is_empty(),
        issues,
    }
}
