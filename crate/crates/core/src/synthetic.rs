//! Heterogeneous simulated datasets in the extended format.
//!
//! Each cascade draws its own kernel parameters, is simulated to extinction
//! and then dressed with user metadata. Initiators come from a fixed pool of
//! publishing accounts so that past-user-success features have history to
//! draw on; every retweeter is a fresh account whose follower count is the
//! simulated magnitude rounded down.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::error::{Error, Result};
use crate::io::{write_extended_cascade, DatasetIndex, IndexEntry, Split};
use crate::model::{branching_factor, Cascade, Event, HawkesParams, InfluenceDistribution, UserMeta};
use crate::seed;
use crate::simulation::{simulate, SimConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub n_cascades: usize,
    pub dist: InfluenceDistribution,
    pub n_star: (f64, f64),
    pub beta: (f64, f64),
    /// Log-uniform range.
    pub c: (f64, f64),
    pub theta: (f64, f64),
    /// Log-uniform range of initiator follower counts.
    pub initiator_followers: (f64, f64),
    pub n_initiators: usize,
    /// Cascades reaching this size are redrawn.
    pub max_events: usize,
    pub first_start: f64,
    pub start_spacing: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_cascades: 500,
            dist: InfluenceDistribution::default(),
            n_star: (0.2, 0.85),
            beta: (0.1, 0.5),
            c: (1.0, 300.0),
            theta: (0.2, 1.0),
            initiator_followers: (1e4, 1e7),
            n_initiators: 150,
            max_events: 5000,
            first_start: 1.5e9,
            start_spacing: 900.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCascade {
    pub cascade: Cascade,
    pub params: HawkesParams,
    pub initiator: String,
}

const MAX_ATTEMPTS: usize = 100;

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn log_uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    uniform(rng, (lo.ln(), hi.ln())).exp()
}

struct Initiator {
    key: String,
    meta: UserMeta,
}

fn user(rng: &mut impl Rng, key: String, followers: u64, start: f64) -> UserMeta {
    let activity = LogNormal::<f64>::new(6.0, 1.5).expect("valid lognormal");
    UserMeta {
        followers,
        friends: (followers as f64).sqrt().mul_add(rng.random_range(0.5..3.0), 1.0).floor() as u64,
        statuses: activity.sample(rng).floor() as u64,
        account_created: (start - rng.random_range(86_400.0..2.5e8)).max(0.0),
        user_key: key,
    }
}

pub fn generate_corpus(config: &CorpusConfig) -> Result<Vec<SyntheticCascade>> {
    if config.n_cascades == 0 || config.n_initiators == 0 {
        return Err(Error::Config("corpus needs at least one cascade and one initiator".into()));
    }
    if !(config.n_star.0 > 0.0 && config.n_star.1 < 1.0 && config.n_star.0 <= config.n_star.1) {
        return Err(Error::Config("n_star range must lie inside (0, 1)".into()));
    }
    let mut pool_rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, "initiators", 0));
    let initiators: Vec<Initiator> = (0..config.n_initiators)
        .map(|i| {
            let key = format!("publisher{i:04}");
            let followers = log_uniform(&mut pool_rng, config.initiator_followers).floor().max(1.0) as u64;
            let meta = user(&mut pool_rng, key.clone(), followers, config.first_start);
            Initiator { key, meta }
        })
        .collect();

    (0..config.n_cascades)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, "corpus", i as u64));
            let start = config.first_start + i as f64 * config.start_spacing;
            let initiator = &initiators[rng.random_range(0..initiators.len())];
            for attempt in 0..MAX_ATTEMPTS {
                let unit = HawkesParams::new(
                    1.0,
                    uniform(&mut rng, config.beta),
                    log_uniform(&mut rng, config.c),
                    uniform(&mut rng, config.theta),
                );
                let target = uniform(&mut rng, config.n_star);
                let params = HawkesParams {
                    kappa: target / branching_factor(&unit, &config.dist)?,
                    ..unit
                };
                let sim_seed = seed::derive(config.seed, "cascade", (i * MAX_ATTEMPTS + attempt) as u64);
                let sim_config = SimConfig::new(params, config.dist, initiator.meta.followers as f64, sim_seed)
                    .with_max_events(config.max_events);
                let sim = simulate(&sim_config)?;
                if sim.truncated {
                    continue;
                }
                let events = sim
                    .cascade
                    .events()
                    .iter()
                    .enumerate()
                    .map(|(j, e)| {
                        let meta = if j == 0 {
                            initiator.meta.clone()
                        } else {
                            let followers = e.magnitude.floor() as u64;
                            user(&mut rng, format!("user{i:05}_{j:04}"), followers, start)
                        };
                        Event::new(e.time, meta.followers.max(1) as f64).with_user(meta)
                    })
                    .collect();
                let cascade = Cascade::until_last_event(format!("c{i:05}"), events)?.with_start_time(start);
                return Ok(SyntheticCascade {
                    cascade,
                    params,
                    initiator: initiator.key.clone(),
                });
            }
            Err(Error::Config(format!(
                "cascade {i} reached max_events in {MAX_ATTEMPTS} attempts"
            )))
        })
        .collect()
}

/// Writes each cascade as `<id>.csv` in the extended format plus
/// `index.csv`. The first `history_fraction` of cascades (by start time) is
/// labelled as history; the rest are left for a random split.
pub fn write_dataset(dir: &Path, corpus: &[SyntheticCascade], history_fraction: f64) -> Result<DatasetIndex> {
    std::fs::create_dir_all(dir)?;
    let n_history = (history_fraction.clamp(0.0, 1.0) * corpus.len() as f64).round() as usize;
    let mut entries = Vec::with_capacity(corpus.len());
    for (i, item) in corpus.iter().enumerate() {
        let file = format!("{}.csv", item.cascade.id());
        std::fs::write(dir.join(&file), write_extended_cascade(&item.cascade)?)?;
        entries.push(IndexEntry {
            id: item.cascade.id().to_string(),
            path: file.into(),
            final_size: item.cascade.len() as u64,
            initiator: item.initiator.clone(),
            start_time: item.cascade.start_time(),
            split: if i < n_history { Split::History } else { Split::Unassigned },
        });
    }
    let index = DatasetIndex {
        entries,
        base_dir: dir.to_path_buf(),
    };
    std::fs::write(dir.join("index.csv"), index.write())?;
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_valid() {
        let config = CorpusConfig {
            n_cascades: 12,
            seed: 5,
            ..CorpusConfig::default()
        };
        let a = generate_corpus(&config).unwrap();
        assert_eq!(a, generate_corpus(&config).unwrap());
        for item in &a {
            assert!(item.cascade.has_metadata());
            let n = branching_factor(&item.params, &config.dist).unwrap();
            assert!((0.2..=0.85 + 1e-12).contains(&n));
            let seed_user = item.cascade.events()[0].user.as_ref().unwrap();
            assert_eq!(seed_user.user_key, item.initiator);
        }
    }
}
