use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use trajplan_core::{PredictionSet, Scenario};

use crate::ade::ade_topk;
use crate::rfs::rfs_sample;
use crate::MetricError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfsReport {
    pub overall: f64,
    pub per_category: BTreeMap<String, f64>,
    #[serde(rename = "rfs@3s")]
    pub at_3s: f64,
    #[serde(rename = "rfs@5s")]
    pub at_5s: f64,
    pub n_samples: usize,
}

/// Scores the most probable mode of each prediction set against its
/// scenario's raters. A sample's score is the mean of its 3 s and 5 s scores;
/// the overall score and each category's score are means over samples.
pub fn rfs_batch(preds: &[PredictionSet], scenarios: &[Scenario]) -> Result<RfsReport, MetricError> {
    if preds.len() != scenarios.len() {
        return Err(MetricError::LengthMismatch { preds: preds.len(), scenarios: scenarios.len() });
    }
    let mut sums = [0.0; 2];
    let mut total = 0.0;
    let mut cats: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (p, s) in preds.iter().zip(scenarios) {
        let [a, b] = rfs_sample(p.top1(), &s.raters)?;
        sums[0] += a;
        sums[1] += b;
        let sample = (a + b) / 2.0;
        total += sample;
        let e = cats.entry(s.category.as_str()).or_insert((0.0, 0));
        e.0 += sample;
        e.1 += 1;
    }
    let n = preds.len();
    let mean = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
    Ok(RfsReport {
        overall: mean(total),
        per_category: cats.into_iter().map(|(c, (s, k))| (c.to_string(), s / k as f64)).collect(),
        at_3s: mean(sums[0]),
        at_5s: mean(sums[1]),
        n_samples: n,
    })
}

/// Everything reported for one evaluation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub overall_rfs: f64,
    #[serde(rename = "rfs@3")]
    pub rfs_3s: f64,
    #[serde(rename = "rfs@5")]
    pub rfs_5s: f64,
    pub per_category: BTreeMap<String, f64>,
    #[serde(rename = "ade1@3s")]
    pub ade1_3s: f64,
    #[serde(rename = "ade1@5s")]
    pub ade1_5s: f64,
    #[serde(rename = "ade_top5@3s")]
    pub ade5_3s: f64,
    #[serde(rename = "ade_top5@5s")]
    pub ade5_5s: f64,
    #[serde(rename = "ade_top10@3s")]
    pub ade10_3s: f64,
    #[serde(rename = "ade_top10@5s")]
    pub ade10_5s: f64,
    /// Top-1 ADE at 5 s per category.
    pub per_category_ade: BTreeMap<String, f64>,
    pub n: usize,
}

/// RFS plus top-1/5/10 ADE at 3 s and 5 s. When a prediction set has fewer
/// than 5 or 10 modes the top-k figures use all of its modes.
pub fn evaluate(preds: &[PredictionSet], scenarios: &[Scenario]) -> Result<MetricReport, MetricError> {
    let rfs = rfs_batch(preds, scenarios)?;
    // [k=1, 5, 10] × [3 s, 5 s]
    let mut sums = [[0.0f64; 2]; 3];
    let mut cat_ade: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (p, s) in preds.iter().zip(scenarios) {
        for (row, k) in [1usize, 5, 10].into_iter().enumerate() {
            let k = k.min(p.k());
            sums[row][0] += ade_topk(p, &s.driven_future, k, 3.0)?;
            sums[row][1] += ade_topk(p, &s.driven_future, k, 5.0)?;
        }
        let e = cat_ade.entry(s.category.as_str()).or_insert((0.0, 0));
        e.0 += ade_topk(p, &s.driven_future, 1, 5.0)?;
        e.1 += 1;
    }
    let n = preds.len();
    let mean = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
    Ok(MetricReport {
        overall_rfs: rfs.overall,
        rfs_3s: rfs.at_3s,
        rfs_5s: rfs.at_5s,
        per_category: rfs.per_category,
        ade1_3s: mean(sums[0][0]),
        ade1_5s: mean(sums[0][1]),
        ade5_3s: mean(sums[1][0]),
        ade5_5s: mean(sums[1][1]),
        ade10_3s: mean(sums[2][0]),
        ade10_5s: mean(sums[2][1]),
        per_category_ade: cat_ade.into_iter().map(|(c, (s, k))| (c.to_string(), s / k as f64)).collect(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use trajplan_core::{EgoStateSequence, Intent, RaterTrajectory, Trajectory, VisualFeature, HORIZON};

    fn straight(v: f64) -> Trajectory {
        Trajectory { waypoints: (1..=HORIZON).map(|i| [v * 0.25 * i as f64, 0.0]).collect() }
    }

    fn scenario(cat: &str, best: f64) -> Scenario {
        let f = straight(10.0);
        Scenario::new(
            format!("{cat}-{best}"),
            EgoStateSequence::zeros(),
            Intent::Straight,
            VisualFeature::new(vec![0.0]),
            f.clone(),
            vec![
                RaterTrajectory { trajectory: f.clone(), score: best, initial_speed: 10.0 },
                RaterTrajectory { trajectory: f.translated(0.0, 30.0), score: 2.0, initial_speed: 10.0 },
            ],
            cat,
        )
        .unwrap()
    }

    #[test]
    fn perfect_predictions_score_best_rater() {
        let scen = vec![scenario("a", 10.0), scenario("a", 8.0), scenario("b", 7.0)];
        let preds: Vec<_> = scen.iter().map(|s| PredictionSet::single(s.driven_future.clone())).collect();
        let r = rfs_batch(&preds, &scen).unwrap();
        assert!((r.overall - 25.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.per_category["a"], 9.0);
        assert_eq!(r.per_category["b"], 7.0);
        let m = evaluate(&preds, &scen).unwrap();
        assert_eq!(m.ade1_5s, 0.0);
        assert_eq!(m.ade10_3s, 0.0);
        assert_eq!(m.n, 3);
    }

    #[test]
    fn sample_is_mean_of_both_times() {
        // in region at 3 s (score 10), far away at 5 s (floored to 4)
        let s = scenario("a", 10.0);
        let mut p = s.driven_future.clone();
        p.waypoints[19][1] += 20.0;
        let r = rfs_batch(&[PredictionSet::single(p)], &[s]).unwrap();
        assert_eq!((r.at_3s, r.at_5s, r.overall), (10.0, 4.0, 7.0));
    }

    #[test]
    fn category_grouping() {
        let scen = vec![scenario("x", 8.0), scenario("x", 8.0), scenario("y", 10.0)];
        let mut preds: Vec<_> = scen.iter().map(|s| PredictionSet::single(s.driven_future.clone())).collect();
        // push the "y" sample far out of every region so it floors at 4
        preds[2] = PredictionSet::single(scen[2].driven_future.translated(0.0, 15.0));
        let r = rfs_batch(&preds, &scen).unwrap();
        assert_eq!(r.per_category["x"], 8.0);
        assert_eq!(r.per_category["y"], 4.0);
        assert!((r.overall - 20.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        let s = scenario("a", 9.0);
        assert!(matches!(rfs_batch(&[], &[s]), Err(MetricError::LengthMismatch { .. })));
    }

    #[test]
    fn report_keys() {
        let s = scenario("a", 9.0);
        let p = PredictionSet::single(s.driven_future.clone());
        let v = serde_json::to_value(evaluate(&[p], &[s]).unwrap()).unwrap();
        for key in [
            "overall_rfs", "rfs@3", "rfs@5", "per_category", "ade1@3s", "ade1@5s", "ade_top5@3s",
            "ade_top5@5s", "ade_top10@3s", "ade_top10@5s", "n",
        ] {
            assert!(v.get(key).is_some(), "missing {key} in {v}");
        }
    }
}
