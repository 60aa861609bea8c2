//! Exercise sessions, question generation and what-if verdicts.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tsfl_core::evaluation::derive_seed;
use tsfl_core::surrogate::{
    explain, surrogate_predict, ExplainConfig, FeatureContribution, SIGN_RULE,
};
use tsfl_core::{Forecaster, Series, SurrogateModel};

use crate::error::ApiError;

pub const ROUNDS: usize = 4;
pub const QUESTIONS_PER_ROUND: usize = 2;
/// Displayed history; the forecast is for the month after.
pub const WINDOW: usize = 12;
/// Relative band around `f(original)` treated as "remain stable".
pub const STABILITY_BAND: f64 = 0.005;
/// Default what-if magnitude as a fraction of the window's value range.
pub const DEFAULT_DELTA_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    #[serde(alias = "control")]
    Control,
    #[serde(alias = "treatment")]
    Treatment,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Control => "Control",
            Group::Treatment => "Treatment",
        })
    }
}

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "control" => Ok(Group::Control),
            "treatment" => Ok(Group::Treatment),
            _ => Err(format!("unknown group `{s}`")),
        }
    }
}

/// Self-declared participant background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Background {
    #[serde(rename = "CS", alias = "cs")]
    Cs,
    #[serde(rename = "NonCS", alias = "noncs", alias = "non_cs")]
    NonCs,
}

impl fmt::Display for Background {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Background::Cs => "CS",
            Background::NonCs => "NonCS",
        })
    }
}

impl FromStr for Background {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cs" => Ok(Background::Cs),
            "noncs" | "non_cs" => Ok(Background::NonCs),
            _ => Err(format!("unknown background `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[serde(alias = "Increase")]
    Increase,
    #[serde(alias = "Decrease")]
    Decrease,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    #[serde(alias = "GoUp")]
    GoUp,
    #[serde(alias = "RemainStable")]
    RemainStable,
    #[serde(alias = "GoDown")]
    GoDown,
}

impl Verdict {
    pub fn from_delta(delta_f: f64, epsilon: f64) -> Self {
        if delta_f > epsilon {
            Verdict::GoUp
        } else if delta_f < -epsilon {
            Verdict::GoDown
        } else {
            Verdict::RemainStable
        }
    }
}

/// "If month `month` were moved by `delta` in `direction`, what happens to the forecast?"
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Question {
    /// 1-based position inside the displayed window.
    pub month: usize,
    pub direction: Direction,
    pub delta: f64,
}

/// Coefficients shown to the treatment group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationPayload {
    pub features: Vec<FeatureContribution>,
    pub intercept: f64,
    pub rule: String,
    pub surrogate: SurrogateModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    /// Index of the first displayed observation in the service series.
    pub window_start: usize,
    pub questions: Vec<Question>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<ExplanationPayload>,
}

/// Immutable part of a session, written once at creation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub group: Group,
    pub participant: String,
    #[serde(default)]
    pub background: Option<Background>,
    pub seed: u64,
    pub created_at: DateTime<Utc>,
    pub rounds: Vec<Round>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub round: usize,
    pub question: usize,
    pub choice: Verdict,
    pub verdict: Verdict,
    pub correct: bool,
    pub answered_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub record: SessionRecord,
    pub answers: Vec<AnswerRecord>,
}

impl SessionState {
    pub fn new(record: SessionRecord) -> Self {
        Self {
            record,
            answers: Vec::new(),
        }
    }

    /// Always recomputed from the stored answers.
    pub fn score(&self) -> usize {
        self.answers.iter().filter(|a| a.correct).count()
    }

    pub fn answer_for(&self, round: usize, question: usize) -> Option<&AnswerRecord> {
        self.answers
            .iter()
            .find(|a| a.round == round && a.question == question)
    }

    /// Seconds from creation to the last answer; 0 before any answer.
    pub fn duration_seconds(&self) -> f64 {
        self.answers
            .iter()
            .map(|a| a.answered_at)
            .max()
            .map(|last| (last - self.record.created_at).num_milliseconds() as f64 / 1000.0)
            .unwrap_or(0.0)
            .max(0.0)
    }

    pub fn round(&self, r: usize) -> Result<&Round, ApiError> {
        check_round(r)?;
        Ok(&self.record.rounds[r - 1])
    }
}

pub fn check_round(r: usize) -> Result<(), ApiError> {
    if (1..=ROUNDS).contains(&r) {
        Ok(())
    } else {
        Err(ApiError::validation(format!(
            "round must be in 1..={ROUNDS}, got {r}"
        )))
    }
}

pub fn check_question(q: usize) -> Result<(), ApiError> {
    if (1..=QUESTIONS_PER_ROUND).contains(&q) {
        Ok(())
    } else {
        Err(ApiError::validation(format!(
            "question must be in 1..={QUESTIONS_PER_ROUND}, got {q}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WhatIfOutcome {
    pub verdict: Verdict,
    pub black_box_original: f64,
    pub black_box_perturbed: f64,
    pub black_box_delta: f64,
    pub epsilon: f64,
    pub surrogate_delta: Option<f64>,
}

/// Shifts `window[month - 1]` by `±delta` and compares forecasts.
pub fn whatif(
    f: &dyn Forecaster,
    surrogate: Option<&SurrogateModel>,
    window: &[f64],
    month: usize,
    direction: Direction,
    delta: f64,
) -> Result<WhatIfOutcome, ApiError> {
    if !(1..=window.len()).contains(&month) {
        return Err(ApiError::validation(format!(
            "month must be in 1..={}, got {month}",
            window.len()
        )));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ApiError::validation(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let mut perturbed = window.to_vec();
    perturbed[month - 1] += match direction {
        Direction::Increase => delta,
        Direction::Decrease => -delta,
    };
    let f0 = f.predict(window)?;
    let f1 = f.predict(&perturbed)?;
    let epsilon = STABILITY_BAND * f0.abs();
    let surrogate_delta = match surrogate {
        Some(g) => Some(surrogate_predict(g, &perturbed)? - surrogate_predict(g, window)?),
        None => None,
    };
    Ok(WhatIfOutcome {
        verdict: Verdict::from_delta(f1 - f0, epsilon),
        black_box_original: f0,
        black_box_perturbed: f1,
        black_box_delta: f1 - f0,
        epsilon,
        surrogate_delta,
    })
}

pub fn default_delta(window: &[f64]) -> f64 {
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
            (l.min(*v), h.max(*v))
        });
    let range = hi - lo;
    if range > 0.0 {
        DEFAULT_DELTA_FRACTION * range
    } else {
        DEFAULT_DELTA_FRACTION
    }
}

/// Draws the four rounds of a session. Questions depend only on `seed` and
/// the series length; treatment rounds also carry a fitted explanation.
pub fn generate_rounds(
    series: &Series,
    f: &dyn Forecaster,
    explain_cfg: &ExplainConfig,
    group: Group,
    seed: u64,
) -> tsfl_core::Result<Vec<Round>> {
    let n = series.len();
    if n < WINDOW {
        return Err(tsfl_core::Error::InsufficientHistory {
            needed: WINDOW,
            available: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rounds = Vec::with_capacity(ROUNDS);
    for r in 0..ROUNDS {
        let window_start = rng.gen_range(0..=n - WINDOW);
        let window = &series.values()[window_start..window_start + WINDOW];
        let delta = default_delta(window);
        let mut months: Vec<usize> = sample(&mut rng, WINDOW, QUESTIONS_PER_ROUND)
            .into_iter()
            .map(|m| m + 1)
            .collect();
        months.sort_unstable();
        let questions = months
            .into_iter()
            .map(|month| Question {
                month,
                direction: if rng.gen_bool(0.5) {
                    Direction::Increase
                } else {
                    Direction::Decrease
                },
                delta,
            })
            .collect();
        let explanation = match group {
            Group::Control => None,
            Group::Treatment => {
                let mut cfg = explain_cfg.clone();
                cfg.perturbation.seed = derive_seed(seed, r, 0);
                let (g, e) = explain(window, f, &cfg)?;
                Some(ExplanationPayload {
                    features: e.features,
                    intercept: e.intercept,
                    rule: SIGN_RULE.to_string(),
                    surrogate: g,
                })
            }
        };
        rounds.push(Round {
            window_start,
            questions,
            explanation,
        });
    }
    Ok(rounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tsfl_core::forecasters::LinearFeatureForecaster;

    #[test]
    fn verdict_band_is_strict() {
        assert_eq!(Verdict::from_delta(0.0, 0.0), Verdict::RemainStable);
        assert_eq!(Verdict::from_delta(0.5, 0.5), Verdict::RemainStable);
        assert_eq!(Verdict::from_delta(0.51, 0.5), Verdict::GoUp);
        assert_eq!(Verdict::from_delta(-0.51, 0.5), Verdict::GoDown);
    }

    #[test]
    fn last_value_whatif() {
        let f = LinearFeatureForecaster::last_value();
        let w: Vec<f64> = (1..=12).map(f64::from).collect();
        let up = whatif(&f, None, &w, 12, Direction::Increase, 1.0).unwrap();
        assert_eq!(up.verdict, Verdict::GoUp);
        assert_eq!(up.black_box_delta, 1.0);
        let down = whatif(&f, None, &w, 12, Direction::Decrease, 1.0).unwrap();
        assert_eq!(down.verdict, Verdict::GoDown);
        let flat = whatif(&f, None, &w, 1, Direction::Increase, 1.0).unwrap();
        assert_eq!(flat.verdict, Verdict::RemainStable);
        assert!(whatif(&f, None, &w, 0, Direction::Increase, 1.0).is_err());
        assert!(whatif(&f, None, &w, 13, Direction::Increase, 1.0).is_err());
        assert!(whatif(&f, None, &w, 3, Direction::Increase, 0.0).is_err());
    }

    #[test]
    fn default_delta_is_tenth_of_range() {
        assert!((default_delta(&[2.0, 7.0, 4.0]) - 0.5).abs() < 1e-15);
        assert_eq!(default_delta(&[3.0; 4]), DEFAULT_DELTA_FRACTION);
    }
}
