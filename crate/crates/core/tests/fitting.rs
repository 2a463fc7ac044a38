//! Maximum-likelihood fits on simulated cascades.

use std::time::Instant;

use hawkes_core::fitting::{fit, Constraint, FitConfig};
use hawkes_core::likelihood::log_likelihood;
use hawkes_core::model::{branching_factor, HawkesParams, InfluenceDistribution};
use hawkes_core::simulation::{simulate, SimConfig};
use proptest::prelude::*;

fn truth() -> HawkesParams {
    HawkesParams::new(0.8, 0.3, 10.0, 0.6)
}

#[test]
fn recovers_branching_factor() {
    let dist = InfluenceDistribution::default();
    let p = truth();
    let n_true = branching_factor(&p, &dist).unwrap();
    let config = FitConfig::new(&dist);
    let started = Instant::now();
    let mut errors = Vec::new();
    let mut seed = 0;
    while errors.len() < 20 {
        seed += 1;
        let sim = simulate(&SimConfig::new(p, dist, 1e9, seed)).unwrap();
        if sim.cascade.len() < 200 {
            continue;
        }
        let f = fit(&sim.cascade, &config, &dist).unwrap();
        assert!(f.n_star <= 1.0 - config.n_star_slack);
        errors.push((f.n_star - n_true).abs() / n_true);
    }
    errors.sort_by(f64::total_cmp);
    let median = errors[errors.len() / 2];
    eprintln!("median rel error {median:.3} in {:?}", started.elapsed());
    assert!(median <= 0.2, "{errors:?}");
}

#[test]
fn supercritical_data_binds_the_constraint() {
    let dist = InfluenceDistribution::default();
    let p = HawkesParams { kappa: 2.5, ..truth() };
    assert!(branching_factor(&p, &dist).unwrap() > 1.0);
    let sim = simulate(&SimConfig::new(p, dist, 1e3, 3).with_horizon(600.0)).unwrap();
    assert!(sim.cascade.len() > 50);
    let config = FitConfig::new(&dist).with_horizon(600.0);
    let f = fit(&sim.cascade, &config, &dist).unwrap();
    assert!(f.n_star <= 1.0 - config.n_star_slack, "{}", f.n_star);
    assert!(f.n_star >= 1.0 - 2.0 * config.n_star_slack, "{}", f.n_star);
    assert!(f.active_constraints.contains(&Constraint::BranchingFactor), "{f:?}");
    assert_eq!(f.active_constraints[0].to_string(), "n_star");
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(16) })]

    #[test]
    fn fits_are_feasible_and_beat_the_truth(
        kappa in 0.2f64..1.5, beta in 0.1f64..0.8, c in 1.0f64..100.0, theta in 0.2f64..1.5, seed in 0u64..1000,
    ) {
        let dist = InfluenceDistribution::default();
        let p = HawkesParams::new(kappa, beta, c, theta);
        let sim = simulate(&SimConfig::new(p, dist, 1e4, seed).with_horizon(1800.0).with_max_events(250)).unwrap();
        prop_assume!(sim.cascade.len() >= 5);
        let config = FitConfig::new(&dist).with_horizon(1800.0);
        let f = fit(&sim.cascade, &config, &dist).unwrap();
        prop_assert!(f.n_star <= 1.0 - config.n_star_slack);
        prop_assert!(f.params.validate_with(&dist).is_ok());
        if branching_factor(&p, &dist).unwrap() <= 1.0 - config.n_star_slack {
            let at_truth = log_likelihood(&p, &sim.cascade, 1800.0).unwrap();
            prop_assert!(f.log_likelihood >= at_truth - 1e-6 * at_truth.abs(), "{} < {}", f.log_likelihood, at_truth);
        }
    }
}
