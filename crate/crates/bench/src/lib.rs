//! Deterministic fixtures shared by the benchmarks.

use hawkes_core::model::{Cascade, Event, HawkesParams, InfluenceDistribution};
use hawkes_core::seed;

pub fn reference_params() -> HawkesParams {
    HawkesParams::new(0.8, 0.3, 10.0, 0.6)
}

/// Cascade of `events` events with exponential gaps of mean 30 s and
/// Pareto magnitudes drawn from the default influence distribution.
pub fn cascade_with(events: usize) -> Cascade {
    let dist = InfluenceDistribution::default();
    let mut t = 0.0;
    let list = (0..events as u64)
        .map(|i| {
            if i > 0 {
                t += -30.0 * (1.0 - unit(1000, i)).ln();
            }
            let m = dist.m_min * (1.0 - unit(2000, i)).powf(-1.0 / (dist.alpha - 1.0));
            Event::new(t, m.min(1e7))
        })
        .collect();
    Cascade::until_last_event("bench", list).expect("valid synthetic cascade")
}

/// Uniform value in `[0, 1)` from the seed mixer.
fn unit(stream: u64, i: u64) -> f64 {
    (seed::derive(stream, "bench", i) >> 11) as f64 / (1u64 << 53) as f64
}

/// `rows x d` matrix with a smooth nonlinear target.
pub fn regression_data(rows: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let x: Vec<Vec<f64>> = (0..rows)
        .map(|r| (0..d).map(|j| unit(j as u64, r as u64)).collect())
        .collect();
    let y = x.iter().map(|row| (6.0 * row[0]).sin() + row[d - 1] * row[d - 1]).collect();
    (x, y)
}

pub fn feature_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}
