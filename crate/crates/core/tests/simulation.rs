//! Monte-Carlo checks of the simulators against closed-form moments.

use hawkes_core::model::{branching_factor, Cascade, HawkesParams, InfluenceDistribution};
use hawkes_core::prediction::{expected_first_generation, predict_raw};
use hawkes_core::simulation::{continue_cascade, simulate, simulate_thinning, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED_MAGNITUDE: f64 = 1e6;

fn params_for(n_star: f64) -> HawkesParams {
    let unit = HawkesParams::new(1.0, 0.3, 10.0, 0.5);
    let per_kappa = branching_factor(&unit, &InfluenceDistribution::default()).unwrap();
    HawkesParams { kappa: n_star / per_kappa, ..unit }
}

fn seed_only() -> Cascade {
    Cascade::new("seed", vec![hawkes_core::model::Event::new(0.0, SEED_MAGNITUDE)], 0.0).unwrap()
}

#[test]
fn size_and_offspring_moments() {
    let dist = InfluenceDistribution::default();
    for (k, n_star) in [0.3, 0.6, 0.9].into_iter().enumerate() {
        let p = params_for(n_star);
        let a1 = expected_first_generation(&p, &seed_only(), 0.0).unwrap();
        let runs = 1000;
        let (mut total, mut children, mut parents) = (0usize, 0usize, 0usize);
        for r in 0..runs {
            let sim = simulate(&SimConfig::new(p, dist, SEED_MAGNITUDE, 1000 * k as u64 + r)).unwrap();
            assert!(!sim.truncated);
            total += sim.cascade.len();
            let counts = sim.offspring_counts();
            children += counts[1..].iter().sum::<usize>();
            parents += counts.len() - 1;
        }
        let mean_size = total as f64 / runs as f64;
        let expected = 1.0 + a1 / (1.0 - n_star);
        assert!((mean_size / expected - 1.0).abs() <= 0.1, "n*={n_star}: {mean_size} vs {expected}");
        let offspring = children as f64 / parents as f64;
        assert!((offspring / n_star - 1.0).abs() <= 0.05, "n*={n_star}: offspring {offspring}");
    }
}

/// Asymptotic Kolmogorov distribution tail `P(K > x)`.
fn kolmogorov_tail(x: f64) -> f64 {
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        sum += (-1f64).powf(j - 1.0) * (-2.0 * j * j * x * x).exp();
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[test]
fn first_generation_delays_follow_the_kernel() {
    let p = params_for(0.5);
    let dist = InfluenceDistribution::default();
    let mut delays = Vec::new();
    for r in 0..300 {
        let sim = simulate(&SimConfig::new(p, dist, SEED_MAGNITUDE, r)).unwrap();
        for (i, e) in sim.cascade.events().iter().enumerate() {
            if sim.parent[i] == Some(0) {
                delays.push(e.time);
            }
        }
    }
    delays.sort_by(f64::total_cmp);
    let n = delays.len() as f64;
    let cdf = |t: f64| 1.0 - (p.c / (t + p.c)).powf(p.theta);
    let d = delays
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = cdf(t);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let p_value = kolmogorov_tail(d * n.sqrt());
    assert!(p_value > 0.01, "KS D={d} over {n} delays, p={p_value}");
}

#[test]
fn thinning_agrees_with_branching_sampler() {
    let p = params_for(0.6);
    let dist = InfluenceDistribution::default();
    let horizon = 3600.0;
    let runs = 400;
    let mean = |f: &dyn Fn(u64) -> usize| (0..runs).map(|r| f(r) as f64).sum::<f64>() / runs as f64;
    let cluster = mean(&|r| simulate(&SimConfig::new(p, dist, 1e4, r).with_horizon(horizon)).unwrap().cascade.len());
    let thinned = mean(&|r| {
        simulate_thinning(&SimConfig::new(p, dist, 1e4, 10_000 + r).with_horizon(horizon))
            .unwrap()
            .cascade
            .len()
    });
    assert!((cluster / thinned - 1.0).abs() < 0.1, "cluster {cluster} thinning {thinned}");
}

#[test]
fn continuation_mean_matches_closed_form() {
    let p = params_for(0.7);
    let dist = InfluenceDistribution::default();
    let horizon = 600.0;
    let full = simulate(&SimConfig::new(p, dist, SEED_MAGNITUDE, 42)).unwrap();
    let observed = full.cascade.prefix_until(horizon).unwrap();
    let raw = predict_raw(&p, &observed, horizon, &dist).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let runs = 1000;
    let mut first_gen = 0usize;
    let mut total = 0usize;
    for _ in 0..runs {
        let sim = continue_cascade(&observed, &p, &dist, horizon, &mut rng).unwrap();
        total += sim.cascade.len();
        first_gen += sim.generation.iter().filter(|&&g| g == 1).count();
    }
    let mean_total = total as f64 / runs as f64;
    assert!((mean_total / raw.n_inf_raw - 1.0).abs() <= 0.1, "{mean_total} vs {}", raw.n_inf_raw);
    let mean_first = first_gen as f64 / runs as f64;
    assert!((mean_first / raw.a1 - 1.0).abs() <= 0.1, "{mean_first} vs {}", raw.a1);
}
