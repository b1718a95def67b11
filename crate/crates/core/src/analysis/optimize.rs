//! Coordinate ascent over per-question weights on a fixed grid.
//!
//! The search starts from the best of the supplied schemes, then repeatedly
//! sweeps the questions, moving each weight to the grid value that most
//! improves the objective, until a full sweep changes nothing. Optional
//! restarts begin from random grid points drawn from a seeded generator.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::correlation::pearson;
use super::rank::{fractional_rank, Direction};
use super::report::{check_unique, cohort_questions, uniform_outliers, CohortEntry};
use super::AnalysisError;
use crate::questionnaire::{QuestionId, WeightScheme};
use crate::RespondentCode;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Spearman,
    Pearson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub grid: Vec<f64>,
    pub max_sweeps: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid: vec![0.1, 0.2, 0.5, 1.0, 1.5, 2.0, 5.0, 11.0],
            max_sweeps: 50,
            restarts: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizedWeights {
    pub scheme: WeightScheme,
    pub objective: Objective,
    pub achieved: f64,
    /// Objective of each starting scheme, in the order given.
    pub start_values: Vec<Option<f64>>,
    pub removed: Vec<RespondentCode>,
    pub evaluations: usize,
}

/// Codes and D-scores laid out for fast repeated evaluation.
struct Evaluator {
    codes: Vec<Vec<f64>>,
    iat_orient: Vec<f64>,
    iat_ranks: Vec<f64>,
    objective: Objective,
    evaluations: usize,
}

impl Evaluator {
    fn eval(&mut self, weights: &[f64]) -> Option<f64> {
        self.evaluations += 1;
        let totals: Vec<f64> = self
            .codes
            .iter()
            .map(|row| row.iter().zip(weights).map(|(c, w)| c * w).sum())
            .collect();
        let value = match self.objective {
            Objective::Spearman => {
                pearson(&self.iat_ranks, &fractional_rank(&totals, Direction::Descending))
            }
            Objective::Pearson => pearson(&self.iat_orient, &totals),
        };
        value.ok()
    }
}

fn better(candidate: Option<f64>, incumbent: Option<f64>) -> bool {
    match (candidate, incumbent) {
        (Some(c), Some(i)) => c > i + 1e-12,
        (Some(_), None) => true,
        _ => false,
    }
}

/// Searches question weights that maximise agreement between the rankings
/// on the cohort with outliers (from the uniform pairing) removed.
pub fn optimize_weights(
    cohort: &[CohortEntry],
    objective: Objective,
    k_outliers: usize,
    starts: &[WeightScheme],
    config: &SearchConfig,
) -> Result<OptimizedWeights, AnalysisError> {
    if config.grid.is_empty() || config.grid.iter().any(|g| !g.is_finite() || *g <= 0.0) {
        return Err(AnalysisError::InvalidSearch(
            "grid values must be finite and positive".into(),
        ));
    }
    check_unique(cohort)?;
    let removed = if cohort.is_empty() {
        Vec::new()
    } else {
        uniform_outliers(cohort, k_outliers)?
    };
    let kept: Vec<&CohortEntry> = cohort
        .iter()
        .filter(|e| !removed.contains(&e.respondent))
        .collect();
    if kept.len() < 3 {
        return Err(AnalysisError::InsufficientRespondents {
            needed: 3,
            got: kept.len(),
        });
    }

    let questions: Vec<QuestionId> = match starts.first() {
        Some(s) => s.questions().cloned().collect(),
        None => cohort_questions(cohort),
    };
    let mut codes = Vec::with_capacity(kept.len());
    for e in &kept {
        let row = questions
            .iter()
            .map(|q| {
                e.response.answers.get(q).map(|&c| f64::from(c)).ok_or_else(|| {
                    crate::questionnaire::QuestionnaireError::MissingAnswer { question: q.clone() }
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        codes.push(row);
    }
    let d: Vec<f64> = kept.iter().map(|e| e.d_score).collect();
    let mut eval = Evaluator {
        codes,
        iat_orient: d.iter().map(|x| -x).collect(),
        iat_ranks: fractional_rank(&d, Direction::Ascending),
        objective,
        evaluations: 0,
    };

    let mut start_points: Vec<Vec<f64>> = Vec::new();
    let mut start_values = Vec::new();
    for s in starts {
        let w = questions
            .iter()
            .map(|q| s.weight(q).ok_or_else(|| crate::questionnaire::QuestionnaireError::MissingWeight(q.clone())))
            .collect::<Result<Vec<f64>, _>>()?;
        start_values.push(eval.eval(&w));
        start_points.push(w);
    }
    if start_points.is_empty() {
        start_points.push(vec![1.0; questions.len()]);
        start_values.push(eval.eval(&start_points[0]));
    }

    let (mut best_w, mut best_v) = (start_points[0].clone(), start_values[0]);
    for (w, v) in start_points.iter().zip(&start_values).skip(1) {
        if better(*v, best_v) {
            best_w = w.clone();
            best_v = *v;
        }
    }
    let (w, v) = ascend(&mut eval, best_w, best_v, config);
    best_w = w;
    best_v = v;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.restarts {
        let init: Vec<f64> = questions
            .iter()
            .map(|_| *config.grid.choose(&mut rng).expect("non-empty grid"))
            .collect();
        let init_v = eval.eval(&init);
        let (w, v) = ascend(&mut eval, init, init_v, config);
        if better(v, best_v) {
            best_w = w;
            best_v = v;
        }
    }

    let achieved = best_v.ok_or(AnalysisError::NoSignal)?;
    let scheme = WeightScheme::custom(questions.into_iter().zip(best_w).collect())?;
    Ok(OptimizedWeights {
        scheme,
        objective,
        achieved,
        start_values,
        removed,
        evaluations: eval.evaluations,
    })
}

fn ascend(
    eval: &mut Evaluator,
    mut weights: Vec<f64>,
    mut value: Option<f64>,
    config: &SearchConfig,
) -> (Vec<f64>, Option<f64>) {
    for _ in 0..config.max_sweeps {
        let mut moved = false;
        for q in 0..weights.len() {
            let current = weights[q];
            let mut best_g = current;
            for &g in &config.grid {
                if g == current {
                    continue;
                }
                weights[q] = g;
                let v = eval.eval(&weights);
                if better(v, value) {
                    value = v;
                    best_g = g;
                }
            }
            weights[q] = best_g;
            moved |= best_g != current;
        }
        if !moved {
            break;
        }
    }
    (weights, value)
}
