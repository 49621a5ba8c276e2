//! Newline-delimited JSON records for scenarios and prediction sets.
//!
//! One scenario per line with the fields `id`, `history` (16×6), `intent`
//! (1/2/3), `visual`, optional `aux_a` / `aux_b`, `future` (20×2), `raters`
//! (list of `{waypoints, score, initial_speed}`) and `category`. Floats are
//! written in shortest round-trip form, so a write/read cycle is lossless.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::{
    validate_scenario, CoreError, EgoState, EgoStateSequence, Intent, PredictionSet,
    RaterTrajectory, Scenario, Trajectory, VisualFeature,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaterRecord {
    pub waypoints: Vec<[f64; 2]>,
    pub score: f64,
    pub initial_speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub id: String,
    pub history: Vec<[f64; 6]>,
    pub intent: i64,
    pub visual: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_b: Option<Vec<f64>>,
    pub future: Vec<[f64; 2]>,
    pub raters: Vec<RaterRecord>,
    pub category: String,
}

impl From<&Scenario> for ScenarioRecord {
    fn from(s: &Scenario) -> Self {
        Self {
            id: s.id.clone(),
            history: s.history.steps.iter().map(EgoState::to_array).collect(),
            intent: s.intent.code(),
            visual: s.visual.embedding.clone(),
            aux_a: s.visual.aux_a.clone(),
            aux_b: s.visual.aux_b.clone(),
            future: s.driven_future.waypoints.clone(),
            raters: s
                .raters
                .iter()
                .map(|r| RaterRecord {
                    waypoints: r.trajectory.waypoints.clone(),
                    score: r.score,
                    initial_speed: r.initial_speed,
                })
                .collect(),
            category: s.category.clone(),
        }
    }
}

impl ScenarioRecord {
    /// Converts without checking scenario invariants.
    pub fn into_scenario_unchecked(self) -> Result<Scenario, CoreError> {
        Ok(Scenario {
            id: self.id,
            history: EgoStateSequence {
                steps: self.history.into_iter().map(EgoState::from_array).collect(),
            },
            intent: Intent::try_from(self.intent)?,
            visual: VisualFeature { embedding: self.visual, aux_a: self.aux_a, aux_b: self.aux_b },
            driven_future: Trajectory { waypoints: self.future },
            raters: self
                .raters
                .into_iter()
                .map(|r| RaterTrajectory {
                    trajectory: Trajectory { waypoints: r.waypoints },
                    score: r.score,
                    initial_speed: r.initial_speed,
                })
                .collect(),
            category: self.category,
        })
    }
}

pub fn serialize_scenario(s: &Scenario) -> String {
    serde_json::to_string(&ScenarioRecord::from(s)).expect("scenario records always serialize")
}

/// Parses one record line and validates it. `line` is only used in errors.
pub fn parse_scenario_line(text: &str, line: usize) -> Result<Scenario, CoreError> {
    let rec: ScenarioRecord =
        serde_json::from_str(text).map_err(|source| CoreError::Parse { line, source })?;
    let id = rec.id.clone();
    let s = rec.into_scenario_unchecked()?;
    let violations = validate_scenario(&s);
    if violations.is_empty() {
        Ok(s)
    } else {
        Err(CoreError::InvalidRecord { line, id, violations })
    }
}

pub fn write_scenarios<W: Write>(mut w: W, scenarios: &[Scenario]) -> Result<(), CoreError> {
    for s in scenarios {
        writeln!(w, "{}", serialize_scenario(s))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads every non-blank line as a scenario. Line numbers in errors are 1-based.
pub fn read_scenarios<R: BufRead>(r: R) -> Result<Vec<Scenario>, CoreError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_scenario_line(&line, i + 1)?);
    }
    Ok(out)
}

/// Model output for one scenario, keyed by scenario id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub modes: Vec<Vec<[f64; 2]>>,
    pub probs: Vec<f64>,
}

impl PredictionRecord {
    pub fn new(id: impl Into<String>, p: &PredictionSet) -> Self {
        Self {
            id: id.into(),
            modes: p.modes.iter().map(|m| m.waypoints.clone()).collect(),
            probs: p.probs.clone(),
        }
    }

    pub fn to_prediction_set(&self) -> Result<PredictionSet, CoreError> {
        PredictionSet::new(
            self.modes.iter().map(|m| Trajectory { waypoints: m.clone() }).collect(),
            self.probs.clone(),
        )
    }
}

pub fn serialize_prediction(p: &PredictionRecord) -> String {
    serde_json::to_string(p).expect("prediction records always serialize")
}

pub fn parse_prediction_line(text: &str, line: usize) -> Result<PredictionRecord, CoreError> {
    let rec: PredictionRecord =
        serde_json::from_str(text).map_err(|source| CoreError::Parse { line, source })?;
    if let Err(CoreError::Invalid { violations, .. }) = rec.to_prediction_set() {
        return Err(CoreError::InvalidRecord { line, id: rec.id, violations });
    }
    Ok(rec)
}

pub fn write_predictions<W: Write>(mut w: W, preds: &[PredictionRecord]) -> Result<(), CoreError> {
    for p in preds {
        writeln!(w, "{}", serialize_prediction(p))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions<R: BufRead>(r: R) -> Result<Vec<PredictionRecord>, CoreError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_prediction_line(&line, i + 1)?);
    }
    Ok(out)
}
