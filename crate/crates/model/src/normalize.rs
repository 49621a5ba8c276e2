use serde::{Deserialize, Serialize};
use trajplan_core::{Scenario, STATE_DIM};

/// Per-channel standardization of the 6-D ego states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: [f64; STATE_DIM],
    pub std: [f64; STATE_DIM],
}

impl Default for Normalizer {
    fn default() -> Self {
        Self { mean: [0.0; STATE_DIM], std: [1.0; STATE_DIM] }
    }
}

impl Normalizer {
    /// Mean and population std of every history state in `scenarios`.
    /// Channels with (near) zero spread keep a unit std.
    pub fn fit<'a>(scenarios: impl IntoIterator<Item = &'a Scenario>) -> Self {
        let mut n = 0usize;
        let mut sum = [0.0; STATE_DIM];
        let mut sq = [0.0; STATE_DIM];
        for s in scenarios {
            for st in &s.history.steps {
                for (c, x) in st.to_array().into_iter().enumerate() {
                    sum[c] += x;
                    sq[c] += x * x;
                }
                n += 1;
            }
        }
        if n == 0 {
            return Self::default();
        }
        let mut out = Self::default();
        for c in 0..STATE_DIM {
            let m = sum[c] / n as f64;
            let var = (sq[c] / n as f64 - m * m).max(0.0);
            out.mean[c] = m;
            out.std[c] = if var.sqrt() > 1e-6 { var.sqrt() } else { 1.0 };
        }
        out
    }

    pub fn apply(&self, x: [f64; STATE_DIM]) -> [f64; STATE_DIM] {
        let mut out = [0.0; STATE_DIM];
        for c in 0..STATE_DIM {
            out[c] = (x[c] - self.mean[c]) / self.std[c];
        }
        out
    }
}
