//! Properties of the feature catalogue.

use hawkes_core::features::{build_user_history, extract_features, FeatureSchema, FeatureVector, UserHistory};
use hawkes_core::model::{Cascade, Event, UserMeta};
use proptest::prelude::*;

fn event(i: usize, t: f64, followers: u64, start: f64) -> Event {
    Event::new(t, followers.max(1) as f64).with_user(UserMeta {
        followers,
        friends: followers / 3 + i as u64,
        statuses: 10 * followers + 1,
        account_created: start - 1000.0 * (i as f64 + 1.0),
        user_key: format!("u{}", i % 4),
    })
}

/// Events in the given order of original indices.
fn cascade_in_order(times: &[f64], followers: &[u64], start: f64, order: &[usize]) -> Cascade {
    let events = order.iter().map(|&k| event(k, times[k], followers[k], start)).collect();
    Cascade::until_last_event("f", events).unwrap().with_start_time(start)
}

fn cascade_from(times: &[f64], followers: &[u64], start: f64) -> Cascade {
    let order: Vec<usize> = (0..times.len()).collect();
    cascade_in_order(times, followers, start, &order)
}

fn arb_cascade() -> impl Strategy<Value = (Vec<f64>, Vec<u64>)> {
    (2usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..500.0, n - 1),
            prop::collection::vec(0u64..100_000, n),
        )
            .prop_map(|(mut gaps, followers)| {
                // Whole-second gaps with some exact ties.
                for g in &mut gaps {
                    *g = if *g < 50.0 { 0.0 } else { g.floor() };
                }
                let mut times = vec![0.0];
                for g in gaps {
                    times.push(times.last().unwrap() + g);
                }
                (times, followers)
            })
    })
}

fn history() -> UserHistory {
    build_user_history([("u0", 10.0), ("u0", 30.0), ("u1", 5.0), ("u2", 8.0), ("u2", 2.0)])
}

const TIME_SCALED: [&str; 7] = [
    "first_half_rate",
    "second_half_rate",
    "wait_min",
    "wait_p25",
    "wait_median",
    "wait_p75",
    "wait_max",
];

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(128) })]

    #[test]
    fn time_scaling_only_touches_temporal_summaries(
        (times, followers) in arb_cascade(), power in -4i32..7, classification in any::<bool>(),
    ) {
        let schema = if classification { FeatureSchema::Classification } else { FeatureSchema::Regression };
        let s = 2f64.powi(power);
        let base = extract_features(&cascade_from(&times, &followers, 1.6e9), &history(), schema).unwrap();
        let scaled_times: Vec<f64> = times.iter().map(|t| t * s).collect();
        let scaled = extract_features(&cascade_from(&scaled_times, &followers, 1.6e9), &history(), schema).unwrap();
        for (i, name) in schema.names().iter().enumerate() {
            let expected = if TIME_SCALED.contains(&name.as_str()) { base.values()[i] * s } else { base.values()[i] };
            prop_assert_eq!(scaled.values()[i], expected, "{}", name);
        }
    }

    #[test]
    fn permuting_simultaneous_events_changes_nothing((times, followers) in arb_cascade(), classification in any::<bool>()) {
        let schema = if classification { FeatureSchema::Classification } else { FeatureSchema::Regression };
        let base = extract_features(&cascade_from(&times, &followers, 0.0), &history(), schema).unwrap();
        // Reverse every run of equal times after the seed.
        let mut order: Vec<usize> = (0..times.len()).collect();
        let mut i = 1;
        while i < times.len() {
            let mut j = i;
            while j + 1 < times.len() && times[j + 1] == times[i] {
                j += 1;
            }
            order[i..=j].reverse();
            i = j + 1;
        }
        let permuted = extract_features(&cascade_in_order(&times, &followers, 0.0, &order), &history(), schema).unwrap();
        prop_assert_eq!(permuted, base);
    }

    #[test]
    fn csv_rows_round_trip((times, followers) in arb_cascade(), classification in any::<bool>()) {
        let schema = if classification { FeatureSchema::Classification } else { FeatureSchema::Regression };
        let v = extract_features(&cascade_from(&times, &followers, 1.5e9), &history(), schema).unwrap();
        let back = FeatureVector::parse_csv_row(schema, &v.to_csv_row()).unwrap();
        prop_assert_eq!(back, v);
        prop_assert_eq!(FeatureVector::header(schema).split(',').count(), schema.len());
    }
}
