use proptest::prelude::*;
use trajplan_core::{
    parse_scenario_line, serialize_scenario, EgoState, EgoStateSequence, Intent, RaterTrajectory,
    Scenario, Trajectory, VisualFeature, HISTORY_STEPS, HORIZON,
};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(0.0),
        Just(-0.0),
    ]
}

fn trajectory() -> impl Strategy<Value = Trajectory> {
    prop::collection::vec((finite(), finite()).prop_map(|(x, y)| [x, y]), HORIZON)
        .prop_map(|waypoints| Trajectory { waypoints })
}

fn scenario() -> impl Strategy<Value = Scenario> {
    (
        prop::collection::vec(prop::array::uniform6(finite()), HISTORY_STEPS),
        1i64..=3,
        prop::collection::vec(finite(), 1..16),
        prop::option::of(prop::collection::vec(finite(), 1..8)),
        trajectory(),
        prop::collection::vec((trajectory(), 0.0..=10.0f64, 0.0..40.0f64), 0..3),
        "[a-z_]{1,12}",
    )
        .prop_map(|(hist, intent, vis, aux, future, extra, cat)| {
            let mut raters = vec![RaterTrajectory {
                trajectory: future.clone(),
                score: 10.0,
                initial_speed: 4.2,
            }];
            raters.extend(extra.into_iter().map(|(t, s, v)| RaterTrajectory {
                trajectory: t,
                score: s,
                initial_speed: v,
            }));
            Scenario::new(
                "prop",
                EgoStateSequence::new(hist.into_iter().map(EgoState::from_array).collect()).unwrap(),
                Intent::try_from(intent).unwrap(),
                VisualFeature { embedding: vis, aux_a: None, aux_b: aux },
                future,
                raters,
                cat,
            )
            .unwrap()
        })
}

proptest! {
    #[test]
    fn record_round_trip_is_exact(s in scenario()) {
        let line = serialize_scenario(&s);
        prop_assert!(!line.contains('\n'));
        let back = parse_scenario_line(&line, 1).unwrap();
        // bitwise comparison, so -0.0 vs 0.0 would be caught too
        let bits = |s: &Scenario| serialize_scenario(s);
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(bits(&back), line);
        for (a, b) in back.history.steps.iter().zip(&s.history.steps) {
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
