use trajplan_core::{Scenario, HISTORY_STEPS, STATE_DIM};
use trajplan_diffmath::Tensor;

use crate::{ModelError, Normalizer};

/// Model inputs for a batch of scenarios.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// Normalized states `[B, 16, 6]`.
    pub states: Tensor,
    /// Visual tokens `[B, 1, d_vis]`.
    pub visual: Tensor,
    /// One-hot intents `[B, 1, 3]`.
    pub intent: Tensor,
    /// `[B, 1, d]` each, present when every scenario carries them.
    pub aux_a: Option<Tensor>,
    pub aux_b: Option<Tensor>,
}

impl Batch {
    pub fn new(scenarios: &[&Scenario], norm: &Normalizer) -> Result<Self, ModelError> {
        let b = scenarios.len();
        if b == 0 {
            return Err(ModelError::EmptyBatch);
        }
        let d_vis = scenarios[0].visual.dim();
        let mut states = Vec::with_capacity(b * HISTORY_STEPS * STATE_DIM);
        let mut visual = Vec::with_capacity(b * d_vis);
        let mut intent = vec![0.0; b * 3];
        for (i, s) in scenarios.iter().enumerate() {
            if s.history.steps.len() != HISTORY_STEPS {
                return Err(ModelError::Dim { what: "history length", expected: HISTORY_STEPS, got: s.history.steps.len() });
            }
            for st in &s.history.steps {
                states.extend(norm.apply(st.to_array()));
            }
            if s.visual.dim() != d_vis {
                return Err(ModelError::Dim { what: "visual dimension", expected: d_vis, got: s.visual.dim() });
            }
            visual.extend_from_slice(&s.visual.embedding);
            intent[i * 3 + s.intent.index()] = 1.0;
        }
        let aux = |get: fn(&Scenario) -> Option<&Vec<f64>>| -> Result<Option<Tensor>, ModelError> {
            let Some(first) = get(scenarios[0]) else { return Ok(None) };
            let d = first.len();
            let mut data = Vec::with_capacity(b * d);
            for s in scenarios {
                match get(s) {
                    Some(v) if v.len() == d => data.extend_from_slice(v),
                    Some(v) => return Err(ModelError::Dim { what: "aux dimension", expected: d, got: v.len() }),
                    None => return Ok(None),
                }
            }
            Ok(Some(Tensor::new([b, 1, d], data)?))
        };
        Ok(Self {
            states: Tensor::new([b, HISTORY_STEPS, STATE_DIM], states)?,
            visual: Tensor::new([b, 1, d_vis], visual)?,
            intent: Tensor::new([b, 1, 3], intent)?,
            aux_a: aux(|s| s.visual.aux_a.as_ref())?,
            aux_b: aux(|s| s.visual.aux_b.as_ref())?,
        })
    }

    pub fn len(&self) -> usize {
        self.states.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
