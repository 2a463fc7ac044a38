//! Oracles and properties of the final-size predictor and its layer.

use hawkes_core::fitting::FitResult;
use hawkes_core::forest::ForestConfig;
use hawkes_core::model::{intensity, Cascade, Event, HawkesParams, InfluenceDistribution};
use hawkes_core::prediction::{
    build_layer_features, expected_first_generation, omega_target, predict_raw, LayerSample, PercentileMap,
    PredictiveLayer,
};
use hawkes_core::quadrature::{integrate, QuadratureConfig};
use hawkes_core::simulation::sample_magnitude;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cascade(rng: &mut impl Rng, n: usize) -> (Cascade, f64) {
    let dist = InfluenceDistribution::default();
    let mut t = 0.0;
    let mut events = vec![Event::new(0.0, sample_magnitude(&dist, rng).min(1e7))];
    for _ in 1..n {
        t += rng.random_range(0.0..60.0f64);
        events.push(Event::new(t, sample_magnitude(&dist, rng).min(1e7)));
    }
    let horizon = t + rng.random_range(0.0..120.0);
    (Cascade::new("p", events, horizon).unwrap(), horizon)
}

fn subcritical(rng: &mut impl Rng) -> (HawkesParams, f64) {
    let dist = InfluenceDistribution::default();
    loop {
        let p = HawkesParams::new(
            rng.random_range(0.01..1.0),
            rng.random_range(0.05..0.8),
            rng.random_range(0.5..100.0),
            rng.random_range(0.3..1.5),
        );
        let n = hawkes_core::model::branching_factor(&p, &dist).unwrap();
        if n < 0.95 {
            return (p, n);
        }
    }
}

fn fit_result(params: HawkesParams, n_star: f64) -> FitResult {
    FitResult {
        params,
        log_likelihood: 0.0,
        n_star,
        converged: true,
        active_constraints: Vec::new(),
        starts_tried: 1,
    }
}

/// `A1` as the integral of the intensity over `[T, inf)`, mapped onto
/// `s in (0, 1]` by `t = T + c (1 - s^q) / s^q`.
fn numeric_a1(p: &HawkesParams, cascade: &Cascade, horizon: f64) -> f64 {
    let q = 16.0;
    let cfg = QuadratureConfig {
        abs_tol: 1e-11,
        ..QuadratureConfig::default()
    };
    let f = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let sq = s.powf(q);
        let x = p.c * (1.0 - sq) / sq;
        let dx_ds = p.c * q / (s * sq);
        intensity(p, cascade, horizon + x).unwrap() * dx_ds
    };
    integrate(f, 0.0, 1.0, &cfg).unwrap()
}

#[test]
fn first_generation_matches_integrated_intensity() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for case in 0..30 {
        let n = rng.random_range(1..30);
        let (cascade, horizon) = random_cascade(&mut rng, n);
        let (p, _) = subcritical(&mut rng);
        let closed = expected_first_generation(&p, &cascade, horizon).unwrap();
        let numeric = numeric_a1(&p, &cascade, horizon);
        let rel = (numeric - closed).abs() / closed;
        assert!(rel <= 1e-6, "case {case}: closed {closed} numeric {numeric} rel {rel}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn generation_partial_sums_approach_the_closed_form(seed in 0u64..100_000, n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cascade, horizon) = random_cascade(&mut rng, n);
        let (p, n_star) = subcritical(&mut rng);
        let raw = predict_raw(&p, &cascade, horizon, &InfluenceDistribution::default()).unwrap();
        let mut partial = cascade.len() as f64;
        let mut term = raw.a1;
        for _ in 0..=64 {
            let next = partial + term;
            prop_assert!(next >= partial);
            prop_assert!(next <= raw.n_inf_raw * (1.0 + 1e-12));
            partial = next;
            term *= n_star;
        }
        let tol = n_star.powi(65) * raw.a1 / (1.0 - n_star);
        prop_assert!((raw.n_inf_raw - partial).abs() <= tol + 1e-9 * raw.n_inf_raw);
    }

    #[test]
    fn percentile_ranks_are_monotone(
        mut sample in prop::collection::vec(0.0f64..5.0, 1..60), a in -1.0f64..6.0, b in -1.0f64..6.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        sample.push(0.5);
        let pmap = PercentileMap::new(sample.clone(), sample).unwrap();
        let (r_lo, r_hi) = (pmap.theta_rank(lo), pmap.theta_rank(hi));
        prop_assert!(r_lo <= r_hi);
        prop_assert!((0.0..=1.0).contains(&r_lo) && (0.0..=1.0).contains(&r_hi));
        prop_assert!(pmap.n_star_rank(lo) <= pmap.n_star_rank(hi));
    }

    #[test]
    fn corrected_size_is_invariant_to_trading_a1_against_omega(
        seed in 0u64..100_000, scale in 0.01f64..100.0, omega in 0.01f64..10.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cascade, horizon) = random_cascade(&mut rng, 10);
        let (p, _) = subcritical(&mut rng);
        let raw = predict_raw(&p, &cascade, horizon, &InfluenceDistribution::default()).unwrap();
        let base = raw.clone().with_omega(omega).n_inf_corrected.unwrap();
        let scaled = hawkes_core::prediction::PredictionOutcome { a1: raw.a1 * scale, ..raw }
            .with_omega(omega / scale)
            .n_inf_corrected
            .unwrap();
        prop_assert!((base - scaled).abs() <= 1e-9 * base);
    }
}

/// Layer samples with distinct features and a known omega per sample.
fn samples(rng: &mut impl Rng, count: usize, omega_of: impl Fn(f64) -> f64) -> Vec<(LayerSample, f64)> {
    (0..count)
        .map(|_| {
            let n_star = rng.random_range(0.0..0.9);
            let params = HawkesParams::new(0.5, 0.3, rng.random_range(1.0..100.0), rng.random_range(0.2..1.2));
            let a1 = rng.random_range(0.5..50.0);
            let n_observed = rng.random_range(5..100);
            let omega = omega_of(n_star);
            let n_real = n_observed as f64 + omega * a1 / (1.0 - n_star);
            (
                LayerSample {
                    fit: fit_result(params, n_star),
                    a1,
                    n_observed,
                    n_real,
                },
                omega,
            )
        })
        .collect()
}

#[test]
fn single_tree_layer_reproduces_training_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data = samples(&mut rng, 120, |n| 0.2 + 3.0 * n);
    let train: Vec<LayerSample> = data.iter().map(|(s, _)| s.clone()).collect();
    let layer = PredictiveLayer::train(&train, &ForestConfig::single_tree()).unwrap();
    for s in &train {
        let target = omega_target(s.n_real, s.n_observed, s.a1, s.fit.n_star).unwrap();
        let features = build_layer_features(&s.fit, s.a1, layer.percentiles());
        let omega = layer.omega(&features).unwrap();
        assert!((omega / target - 1.0).abs() <= 1e-12, "{omega} vs {target}");
    }
    let restored = PredictiveLayer::load(&layer.save()).unwrap();
    assert_eq!(restored, layer);
}

#[test]
fn layer_learns_a_smooth_omega_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let truth = |n_star: f64| 0.5 + 1.5 * n_star / 0.9;
    let train: Vec<LayerSample> = samples(&mut rng, 600, truth).into_iter().map(|(s, _)| s).collect();
    let layer = PredictiveLayer::train(&train, &ForestConfig::regression().with_seed(12)).unwrap();
    let held_out = samples(&mut rng, 200, truth);
    let mae = held_out
        .iter()
        .map(|(s, omega)| {
            let features = build_layer_features(&s.fit, s.a1, layer.percentiles());
            (layer.omega(&features).unwrap() - omega).abs()
        })
        .sum::<f64>()
        / held_out.len() as f64;
    assert!(mae <= 0.1, "held-out MAE {mae}");
}
