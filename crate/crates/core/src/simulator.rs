//! Synthetic cohorts with a known latent attitude.
//!
//! Each respondent has a latent attitude `theta` in [-1, 1] (negative leans
//! to concept A) that drives both instruments. Misreporting (`sdr_delta`)
//! shifts explicit answers towards the socially desirable pole and never
//! touches latencies, so the generated data carries its own ground truth.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::protocol::{
    build_session_plan, CategoryRole, PairingOrder, PlanConfig, ProtocolError, SessionPlan, Side,
    StimulusSet, TrialRecord,
};
use crate::questionnaire::{CodedResponse, QuestionBank};
use crate::RespondentCode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentRespondent {
    pub id: RespondentCode,
    pub theta: f64,
    pub sdr_delta: f64,
    pub base_rt_ms: f64,
    pub rt_noise_sd_ms: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesirablePole {
    ConceptA,
    #[default]
    ConceptB,
}

impl DesirablePole {
    fn sign(self) -> f64 {
        match self {
            DesirablePole::ConceptA => -1.0,
            DesirablePole::ConceptB => 1.0,
        }
    }
}

/// How latent traits turn into latencies, errors and answers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    /// Latency shift per unit theta in the merged blocks.
    pub effect_ms_per_theta: f64,
    /// Error probability approaches this as a pairing gets fully incongruent.
    pub max_error_rate: f64,
    pub error_slope: f64,
    pub floor_ms: f64,
    pub inter_trial_ms: f64,
    /// SD of the per-question noise added to `2 * theta` before coding.
    pub answer_noise_sd: f64,
    pub desirable_pole: DesirablePole,
}

impl Default for ResponseModel {
    fn default() -> Self {
        Self {
            effect_ms_per_theta: 150.0,
            max_error_rate: 0.12,
            error_slope: 3.0,
            floor_ms: 200.0,
            inter_trial_ms: 250.0,
            answer_noise_sd: 0.6,
            desirable_pole: DesirablePole::ConceptB,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaDistribution {
    Uniform { low: f64, high: f64 },
    /// Draws are clamped to [-1, 1].
    Normal { mean: f64, sd: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub n: usize,
    pub theta: ThetaDistribution,
    /// Fraction of respondents who misreport; the count is rounded.
    pub sdr_prevalence: f64,
    /// Misreporting shift, drawn uniformly from this range.
    pub sdr_delta: (f64, f64),
    pub base_rt_ms: (f64, f64),
    pub rt_noise_sd_ms: (f64, f64),
    pub model: ResponseModel,
    /// Trial counts used for every respondent; pairing order is counterbalanced.
    pub trial_counts: [u32; 5],
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n: 25,
            theta: ThetaDistribution::Uniform { low: -1.0, high: 1.0 },
            sdr_prevalence: 0.15,
            sdr_delta: (2.0, 4.0),
            base_rt_ms: (600.0, 900.0),
            rt_noise_sd_ms: (120.0, 200.0),
            model: ResponseModel::default(),
            trial_counts: PlanConfig::default().trial_counts,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRespondent {
    pub latent: LatentRespondent,
    pub shy: bool,
    pub plan: SessionPlan,
    pub trials: Vec<TrialRecord>,
    pub response: CodedResponse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCohort {
    pub stimulus_set: StimulusSet,
    pub bank: QuestionBank,
    pub respondents: Vec<SyntheticRespondent>,
}

impl SyntheticCohort {
    pub fn shy_count(&self) -> usize {
        self.respondents.iter().filter(|r| r.shy).count()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error("cohort needs at least 2 respondents, got {0}")]
    TooSmall(usize),
    #[error("cohort of {0} exceeds the 4-digit code space")]
    TooLarge(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Latency shift of a block for this respondent.
fn block_shift(plan: &SessionPlan, block_index: u8, theta: f64, effect: f64) -> f64 {
    let Some(block) = plan.block(block_index) else {
        return 0.0;
    };
    if block.left.len() < 2 {
        return 0.0;
    }
    let good_side = block.side_of(CategoryRole::EvalGood);
    if block.side_of(CategoryRole::ConceptA) == good_side {
        effect * theta
    } else {
        -effect * theta
    }
}

/// Simulates one respondent's full five-block log.
///
/// Latency = base + congruency shift + centred shifted-lognormal noise,
/// floored. Errors are more likely the more a pairing goes against theta.
pub fn simulate_iat(
    respondent: &LatentRespondent,
    plan: &SessionPlan,
    model: &ResponseModel,
    seed: u64,
) -> Vec<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = respondent.rt_noise_sd_ms.max(1e-9);
    // lognormal with mean 2·sd and SD sd, re-centred to mean zero
    let sigma2 = (1.0f64 + 0.25).ln();
    let mu = (2.0 * sd).ln() - sigma2 / 2.0;
    let noise = LogNormal::new(mu, sigma2.sqrt()).expect("valid lognormal");

    let mut clock = 0.0;
    let mut out = Vec::with_capacity(plan.total_trials());
    for (b, trials) in plan.trials.iter().enumerate() {
        let block_index = b as u8 + 1;
        let shift = block_shift(plan, block_index, respondent.theta, model.effect_ms_per_theta);
        let incongruency = if model.effect_ms_per_theta > 0.0 {
            shift / model.effect_ms_per_theta
        } else {
            0.0
        };
        let p_error = model.max_error_rate * sigmoid(model.error_slope * incongruency);
        for (t, planned) in trials.iter().enumerate() {
            let raw = respondent.base_rt_ms + shift + noise.sample(&mut rng) - 2.0 * sd;
            let latency = (raw.max(model.floor_ms) * 1000.0).round() / 1000.0;
            let correct = !rng.random_bool(p_error.clamp(0.0, 1.0));
            let response: Side = if correct {
                planned.correct_side
            } else {
                planned.correct_side.opposite()
            };
            out.push(TrialRecord {
                block_index,
                trial_index: t as u32,
                stimulus: planned.stimulus.clone(),
                presented_at_ms: clock,
                response,
                latency_ms: latency,
                correct,
            });
            clock += latency + model.inter_trial_ms;
        }
    }
    out
}

/// Draws explicit answers for the analysed questions.
///
/// The honest answer is the legal code nearest `2 * theta + noise`; the
/// reported answer moves `round(sdr_delta)` towards the desirable pole and is
/// clamped to the question's legal codes.
pub fn simulate_answers(
    respondent: &LatentRespondent,
    bank: &QuestionBank,
    model: &ResponseModel,
    seed: u64,
) -> CodedResponse {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, model.answer_noise_sd.max(0.0)).expect("valid normal");
    let pole = model.desirable_pole.sign();
    let shift = respondent.sdr_delta.round() * pole;

    let answers = bank
        .analysed()
        .map(|q| {
            let codes: Vec<i8> = q.codes().collect();
            let latent = 2.0 * respondent.theta + noise.sample(&mut rng);
            let honest = nearest_code(&codes, latent, 0.0);
            let reported = if shift == 0.0 {
                honest
            } else {
                let lo = f64::from(*codes.iter().min().unwrap());
                let hi = f64::from(*codes.iter().max().unwrap());
                nearest_code(&codes, (f64::from(honest) + shift).clamp(lo, hi), pole)
            };
            (q.id.clone(), reported)
        })
        .collect();
    CodedResponse {
        respondent: respondent.id,
        answers,
    }
}

/// Nearest legal code; exact ties go towards `lean` (or the smaller magnitude
/// when `lean` is 0).
fn nearest_code(codes: &[i8], value: f64, lean: f64) -> i8 {
    *codes
        .iter()
        .min_by(|&&a, &&b| {
            let (da, db) = ((f64::from(a) - value).abs(), (f64::from(b) - value).abs());
            da.total_cmp(&db).then_with(|| {
                if lean > 0.0 {
                    b.cmp(&a)
                } else if lean < 0.0 {
                    a.cmp(&b)
                } else {
                    a.abs().cmp(&b.abs()).then(a.cmp(&b))
                }
            })
        })
        .expect("coded question has codes")
}

fn uniform_in(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Generates a complete paired dataset; identical configs give identical cohorts.
pub fn generate_cohort(config: &CohortConfig) -> Result<SyntheticCohort, SimulationError> {
    if config.n < 2 {
        return Err(SimulationError::TooSmall(config.n));
    }
    if config.n > RespondentCode::SPACE {
        return Err(SimulationError::TooLarge(config.n));
    }
    if !(0.0..=1.0).contains(&config.sdr_prevalence) {
        return Err(SimulationError::Config("sdr_prevalence must lie in [0, 1]".into()));
    }
    if config.sdr_delta.0 < 0.0 || config.sdr_delta.1 < config.sdr_delta.0 {
        return Err(SimulationError::Config("sdr_delta range must be non-negative".into()));
    }
    if config.base_rt_ms.0 <= 0.0 || config.rt_noise_sd_ms.0 <= 0.0 {
        return Err(SimulationError::Config("latency parameters must be positive".into()));
    }
    let theta_normal = match config.theta {
        ThetaDistribution::Normal { mean, sd } => Some(
            Normal::new(mean, sd).map_err(|e| SimulationError::Config(e.to_string()))?,
        ),
        ThetaDistribution::Uniform { low, high } => {
            if !(low <= high && low >= -1.0 && high <= 1.0) {
                return Err(SimulationError::Config("theta range must lie in [-1, 1]".into()));
            }
            None
        }
    };

    let stimulus_set = StimulusSet::uk_ireland();
    let bank = QuestionBank::uk_ireland();
    let mut cohort_rng = ChaCha8Rng::seed_from_u64(config.seed);

    let codes: Vec<u16> = rand::seq::index::sample(&mut cohort_rng, RespondentCode::SPACE, config.n)
        .into_iter()
        .map(|i| RespondentCode::MIN + i as u16)
        .collect();
    let n_shy = (config.sdr_prevalence * config.n as f64).round() as usize;
    let shy: Vec<usize> = rand::seq::index::sample(&mut cohort_rng, config.n, n_shy).into_vec();

    let mut respondents = Vec::with_capacity(config.n);
    for (i, &code) in codes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64 + 1);
        let theta = match (&config.theta, &theta_normal) {
            (_, Some(normal)) => normal.sample(&mut rng).clamp(-1.0, 1.0),
            (ThetaDistribution::Uniform { low, high }, None) => uniform_in(&mut rng, (*low, *high)),
            _ => unreachable!(),
        };
        let is_shy = shy.contains(&i);
        let sdr_delta = uniform_in(&mut rng, config.sdr_delta);
        let latent = LatentRespondent {
            id: RespondentCode::new(code).expect("sampled inside code space"),
            theta,
            sdr_delta: if is_shy { sdr_delta } else { 0.0 },
            base_rt_ms: uniform_in(&mut rng, config.base_rt_ms),
            rt_noise_sd_ms: uniform_in(&mut rng, config.rt_noise_sd_ms),
        };
        let plan = build_session_plan(
            &stimulus_set,
            latent.id,
            &PlanConfig {
                trial_counts: config.trial_counts,
                pairing_order: PairingOrder::counterbalanced(i),
                seed: rng.next_u64(),
            },
        )?;
        let trials = simulate_iat(&latent, &plan, &config.model, rng.next_u64());
        let response = simulate_answers(&latent, &bank, &config.model, rng.next_u64());
        respondents.push(SyntheticRespondent {
            latent,
            shy: is_shy,
            plan,
            trials,
            response,
        });
    }

    Ok(SyntheticCohort {
        stimulus_set,
        bank,
        respondents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{score_session, ScoringPolicy};

    fn respondent(theta: f64, sdr_delta: f64) -> LatentRespondent {
        LatentRespondent {
            id: RespondentCode::new(1234).unwrap(),
            theta,
            sdr_delta,
            base_rt_ms: 750.0,
            rt_noise_sd_ms: 150.0,
        }
    }

    fn plan(order: PairingOrder, seed: u64) -> SessionPlan {
        build_session_plan(
            &StimulusSet::uk_ireland(),
            RespondentCode::new(1234).unwrap(),
            &PlanConfig {
                pairing_order: order,
                seed,
                ..PlanConfig::default()
            },
        )
        .unwrap()
    }

    fn block_mean(records: &[TrialRecord], block: u8) -> f64 {
        let v: Vec<f64> = records
            .iter()
            .filter(|r| r.block_index == block)
            .map(|r| r.latency_ms)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn same_seed_same_records() {
        let p = plan(PairingOrder::AGoodFirst, 3);
        let r = respondent(0.4, 0.0);
        let model = ResponseModel::default();
        assert_eq!(simulate_iat(&r, &p, &model, 9), simulate_iat(&r, &p, &model, 9));
        assert_ne!(simulate_iat(&r, &p, &model, 9), simulate_iat(&r, &p, &model, 10));
    }

    #[test]
    fn neutral_respondent_scores_zero_on_average() {
        let model = ResponseModel::default();
        let policy = ScoringPolicy::default();
        let r = respondent(0.0, 0.0);
        let mean_d: f64 = (0..100u64)
            .map(|s| {
                let p = plan(PairingOrder::counterbalanced(s as usize), s);
                score_session(&p, &simulate_iat(&r, &p, &model, 1000 + s), &policy)
                    .unwrap()
                    .value
            })
            .sum::<f64>()
            / 100.0;
        assert!(mean_d.abs() < 0.1, "mean D {mean_d}");
    }

    #[test]
    fn full_theta_gives_three_hundred_ms_gap() {
        // E[gap] = 2 · effect · theta = 300 ms
        let model = ResponseModel::default();
        let r = respondent(1.0, 0.0);
        let gap: f64 = (0..100u64)
            .map(|s| {
                let p = plan(PairingOrder::AGoodFirst, s);
                let records = simulate_iat(&r, &p, &model, 500 + s);
                block_mean(&records, 3) - block_mean(&records, 5)
            })
            .sum::<f64>()
            / 100.0;
        assert!((gap - 300.0).abs() < 50.0, "gap {gap}");
    }

    #[test]
    fn latencies_ignore_misreporting() {
        let p = plan(PairingOrder::BGoodFirst, 5);
        let model = ResponseModel::default();
        assert_eq!(
            simulate_iat(&respondent(-0.3, 0.0), &p, &model, 1),
            simulate_iat(&respondent(-0.3, 3.0), &p, &model, 1)
        );
    }

    #[test]
    fn log_is_well_formed() {
        let p = plan(PairingOrder::AGoodFirst, 8);
        let records = simulate_iat(&respondent(0.7, 0.0), &p, &ResponseModel::default(), 2);
        let report = crate::protocol::validate_response_log(&p, &records);
        assert!(report.ok, "{:?}", report.issues);
        assert!(records.iter().all(|r| r.latency_ms >= 200.0));
    }

    #[test]
    fn honest_answers_unchanged_without_misreporting() {
        let bank = QuestionBank::uk_ireland();
        let model = ResponseModel::default();
        let honest = simulate_answers(&respondent(-0.5, 0.0), &bank, &model, 4);
        let shy = simulate_answers(&respondent(-0.5, 0.4), &bank, &model, 4);
        assert_eq!(honest, shy, "round(0.4) = 0 shifts nothing");
        honest.validate(&bank).unwrap();
    }

    #[test]
    fn large_shift_clamps_to_desirable_extreme() {
        let bank = QuestionBank::uk_ireland();
        let model = ResponseModel::default();
        for theta in [1.0, -1.0] {
            let r = simulate_answers(&respondent(theta, 10.0), &bank, &model, 11);
            assert!(r.answers.values().all(|&c| c == 2), "{r:?}");
        }
        let pro_a = ResponseModel {
            desirable_pole: DesirablePole::ConceptA,
            ..model
        };
        let r = simulate_answers(&respondent(1.0, 10.0), &bank, &pro_a, 11);
        assert!(r.answers.values().all(|&c| c == -2));
    }

    #[test]
    fn nearest_code_tie_breaks() {
        assert_eq!(nearest_code(&[-2, 2], 0.0, 1.0), 2);
        assert_eq!(nearest_code(&[-2, 2], 0.0, -1.0), -2);
        assert_eq!(nearest_code(&[-2, 0, 2], 1.0, 0.0), 0);
        assert_eq!(nearest_code(&[-2, -1, 0, 1, 2], 1.4, 0.0), 1);
    }

    #[test]
    fn cohort_is_deterministic_with_rounded_shy_count() {
        let config = CohortConfig {
            n: 25,
            sdr_prevalence: 0.3,
            seed: 42,
            ..CohortConfig::default()
        };
        let a = generate_cohort(&config).unwrap();
        assert_eq!(a.respondents.len(), 25);
        // round(0.3 · 25) = round(7.5) = 8
        assert_eq!(a.shy_count(), 8);
        assert_eq!(a, generate_cohort(&config).unwrap());
        let mut codes: Vec<_> = a.respondents.iter().map(|r| r.latent.id).collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), 25);
        for r in &a.respondents {
            assert_eq!(r.shy, r.latent.sdr_delta > 0.0);
        }
    }

    #[test]
    fn tiny_cohort_rejected() {
        let config = CohortConfig {
            n: 1,
            ..CohortConfig::default()
        };
        assert_eq!(generate_cohort(&config), Err(SimulationError::TooSmall(1)));
    }
}
