use std::path::Path;

use proptest::prelude::*;

use intake_core::chew::FeatureMatrix;
use intake_core::io;
use intake_core::{EventSet, InertialRecording, Interval, IntervalSet, Label, ScoreSeries};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e3f64..1e3,
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
    ]
}

fn recordings() -> impl Strategy<Value = InertialRecording> {
    (1usize..30, 0.1f64..1000.0, -2e9f64..2e9).prop_flat_map(|(n, rate, start)| {
        let row = || [finite(), finite(), finite()];
        (
            prop::collection::vec(row(), n),
            prop::collection::vec(row(), n),
        )
            .prop_map(move |(a, g)| InertialRecording::new("p", start, rate, a, g).unwrap())
    })
}

fn interval_sets() -> impl Strategy<Value = IntervalSet> {
    let label = prop_oneof![
        Just(Label::Meal),
        Just(Label::Snack),
        Just(Label::Activity),
        Just(Label::Other)
    ];
    (
        -1e9f64..1e9,
        prop::collection::vec((0.001f64..1e4, 0.0f64..1e4, label), 0..15),
    )
        .prop_map(|(mut t, parts)| {
            let mut ivs = Vec::new();
            for (len, gap, label) in parts {
                ivs.push(Interval::new(t, t + len, label).unwrap());
                t += len + gap;
            }
            IntervalSet::new(ivs).unwrap()
        })
}

fn p() -> &'static Path {
    Path::new("prop")
}

proptest! {
    #[test]
    fn inertial_files_round_trip(rec in recordings()) {
        let text = io::format_inertial(&rec);
        let back = io::parse_inertial(&text, p()).unwrap();
        prop_assert_eq!(&back, &rec);
        prop_assert_eq!(io::format_inertial(&back), text);
    }

    #[test]
    fn event_files_round_trip(mut ts in prop::collection::vec(finite(), 0..40)) {
        let shuffled: String = ts.iter().rev().map(|t| format!("{{\"t\":{t}}}\n")).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let ev = EventSet::new(ts).unwrap();
        let text = io::format_events(&ev);
        prop_assert_eq!(io::parse_events(&text, p()).unwrap(), ev.clone());
        // Any order in, canonical order out.
        if let Ok(parsed) = io::parse_events(&shuffled, p()) {
            prop_assert_eq!(io::format_events(&parsed), text);
        }
    }

    #[test]
    fn interval_files_round_trip(set in interval_sets()) {
        let text = io::format_intervals(&set);
        let back = io::parse_intervals(&text, p()).unwrap();
        prop_assert_eq!(&back, &set);
        prop_assert_eq!(io::format_intervals(&back), text);
    }

    #[test]
    fn score_and_feature_files_round_trip(
        start in -1e6f64..1e6,
        step in 0.001f64..10.0,
        values in prop::collection::vec(0.0f64..=1.0, 1..50),
    ) {
        let s = ScoreSeries::probability(start, step, values.clone()).unwrap();
        let text = io::format_score_series(&s, "score");
        prop_assert_eq!(io::format_score_series(&io::parse_score_series(&text, p()).unwrap(), "score"), text);

        let fm = FeatureMatrix {
            start_time: start,
            step,
            names: vec!["a".into(), "b".into()],
            rows: values.iter().map(|v| vec![*v, -v]).collect(),
        };
        let text = io::format_feature_matrix(&fm);
        prop_assert_eq!(io::parse_feature_matrix(&text, p()).unwrap(), fm);
    }

    #[test]
    fn readers_never_panic(text in "[-#0-9a-z.,=\n ]{0,200}") {
        let _ = io::parse_inertial(&text, p());
        let _ = io::parse_events(&text, p());
        let _ = io::parse_intervals(&text, p());
        let _ = io::parse_metrics(&text, p());
    }
}
