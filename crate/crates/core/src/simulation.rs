//! Sampling marked Hawkes cascades.
//!
//! The primary sampler uses the cluster representation: every event spawns
//! its own inhomogeneous Poisson stream of children with rate `phi_m(tau)`.
//! A child count is drawn from the Poisson law with mean equal to the
//! integrated kernel and each delay by inverting
//! `Lambda(tau) = kappa m^beta / theta * (c^-theta - (tau + c)^-theta)`,
//! which yields parent links and generation labels directly.
//! [`simulate_thinning`] samples the same process by Ogata thinning of the
//! aggregate rate and serves as a cross-check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{Error, Result};
use crate::model::{branching_factor, Cascade, Event, HawkesParams, InfluenceDistribution};

pub const DEFAULT_MAX_EVENTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: HawkesParams,
    pub dist: InfluenceDistribution,
    pub seed_magnitude: f64,
    /// `None` runs until extinction, which requires `n* < 1`.
    pub horizon: Option<f64>,
    pub max_events: usize,
    pub rng_seed: u64,
}

impl SimConfig {
    pub fn new(params: HawkesParams, dist: InfluenceDistribution, seed_magnitude: f64, rng_seed: u64) -> Self {
        SimConfig {
            params,
            dist,
            seed_magnitude,
            horizon: None,
            max_events: DEFAULT_MAX_EVENTS,
            rng_seed,
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_max_events(mut self, max_events: usize) -> Self {
        self.max_events = max_events;
        self
    }

    fn validate(&self) -> Result<()> {
        validate_sim_params(&self.params)?;
        if self.max_events == 0 {
            return Err(Error::Config("max_events must be at least 1".into()));
        }
        if !(self.seed_magnitude.is_finite() && self.seed_magnitude >= 1.0) {
            return Err(Error::Config(format!(
                "seed magnitude {} must be >= 1",
                self.seed_magnitude
            )));
        }
        match self.horizon {
            Some(h) if !(h.is_finite() && h >= 0.0) => {
                Err(Error::Config(format!("horizon {h} must be finite and >= 0")))
            }
            None => require_subcritical(&self.params, &self.dist),
            _ => Ok(()),
        }
    }
}

/// A simulated cascade with its branching structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SimCascade {
    pub cascade: Cascade,
    /// Generation of each event; seed (or observed) events are generation 0.
    pub generation: Vec<u32>,
    /// Index of each event's parent in `cascade.events()`.
    pub parent: Vec<Option<usize>>,
    /// Set when `max_events` stopped the simulation early.
    pub truncated: bool,
}

impl SimCascade {
    /// Number of direct children of each event.
    pub fn offspring_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.parent.len()];
        for p in self.parent.iter().flatten() {
            counts[*p] += 1;
        }
        counts
    }
}

/// Simulation tolerates `kappa = 0` (no offspring at all).
fn validate_sim_params(p: &HawkesParams) -> Result<()> {
    let ok = p.kappa.is_finite() && p.kappa >= 0.0 && p.beta.is_finite() && p.beta >= 0.0;
    if !ok || !(p.c > 0.0 && p.c.is_finite()) || !(p.theta > 0.0 && p.theta.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "simulation needs kappa >= 0, beta >= 0, c > 0, theta > 0 (got {p:?})"
        )));
    }
    Ok(())
}

fn require_subcritical(params: &HawkesParams, dist: &InfluenceDistribution) -> Result<()> {
    if params.kappa == 0.0 {
        return Ok(());
    }
    let n_star = branching_factor(params, dist)?;
    if n_star >= 1.0 {
        return Err(Error::Supercritical { n_star });
    }
    Ok(())
}

/// Magnitude at CDF level `u` in `[0, 1)`: `m_min (1 - u)^(-1 / (alpha - 1))`.
pub fn magnitude_at(dist: &InfluenceDistribution, u: f64) -> f64 {
    dist.m_min * (1.0 - u).powf(-1.0 / (dist.alpha - 1.0))
}

/// Inverse-CDF draw from the influence power law.
pub fn sample_magnitude<R: Rng + ?Sized>(dist: &InfluenceDistribution, rng: &mut R) -> f64 {
    magnitude_at(dist, rng.random::<f64>())
}

#[derive(Debug, Clone, Copy)]
struct Node {
    time: f64,
    magnitude: f64,
    generation: u32,
    parent: Option<usize>,
    /// Children are only sampled at delays beyond this.
    min_delay: f64,
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(p) => p.sample(rng) as u64,
        Err(_) => 0,
    }
}

/// Expands every node breadth-first, appending offspring to `nodes`.
/// Returns `true` if the event cap stopped the expansion.
fn grow<R: Rng + ?Sized>(
    nodes: &mut Vec<Node>,
    params: &HawkesParams,
    dist: &InfluenceDistribution,
    horizon: Option<f64>,
    max_events: usize,
    rng: &mut R,
) -> bool {
    let mut next = 0;
    while next < nodes.len() {
        let node = nodes[next];
        let shifted = node.min_delay + params.c;
        let mean = params.tail_mass(node.magnitude, node.min_delay);
        let children = poisson_count(mean, rng);
        for _ in 0..children {
            let u: f64 = rng.random();
            let delay = shifted * (1.0 - u).powf(-1.0 / params.theta) - params.c;
            let time = node.time + delay;
            let magnitude = sample_magnitude(dist, rng);
            if horizon.is_some_and(|h| time > h) || !time.is_finite() {
                continue;
            }
            if nodes.len() >= max_events {
                return true;
            }
            nodes.push(Node {
                time,
                magnitude,
                generation: node.generation + 1,
                parent: Some(next),
                min_delay: 0.0,
            });
        }
        next += 1;
    }
    false
}

/// Sorts nodes by time (ties by creation order) and assembles the cascade.
fn assemble(
    id: &str,
    nodes: Vec<Node>,
    mut events_in: Vec<Event>,
    horizon: Option<f64>,
    truncated: bool,
) -> Result<SimCascade> {
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| nodes[a].time.total_cmp(&nodes[b].time).then(a.cmp(&b)));
    let mut position = vec![0; nodes.len()];
    for (pos, &idx) in order.iter().enumerate() {
        position[idx] = pos;
    }
    // Observed events keep their metadata; simulated ones have none.
    events_in.resize(nodes.len(), Event::new(0.0, 1.0));
    let mut events = Vec::with_capacity(nodes.len());
    let mut generation = Vec::with_capacity(nodes.len());
    let mut parent = Vec::with_capacity(nodes.len());
    for &idx in &order {
        let n = &nodes[idx];
        let mut e = std::mem::replace(&mut events_in[idx], Event::new(0.0, 1.0));
        e.time = n.time;
        e.magnitude = n.magnitude;
        events.push(e);
        generation.push(n.generation);
        parent.push(n.parent.map(|p| position[p]));
    }
    let last = events.last().map_or(0.0, |e| e.time);
    let cascade = Cascade::new(id, events, horizon.unwrap_or(last).max(last))?;
    Ok(SimCascade {
        cascade,
        generation,
        parent,
        truncated,
    })
}

/// Samples a cascade from a single seed event at time 0.
pub fn simulate(config: &SimConfig) -> Result<SimCascade> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut nodes = vec![Node {
        time: 0.0,
        magnitude: config.seed_magnitude,
        generation: 0,
        parent: None,
        min_delay: 0.0,
    }];
    let truncated = grow(
        &mut nodes,
        &config.params,
        &config.dist,
        config.horizon,
        config.max_events,
        &mut rng,
    );
    assemble("sim", nodes, Vec::new(), config.horizon, truncated)
}

/// Samples a cascade by thinning the aggregate rate on a finite horizon.
///
/// Between events the rate is non-increasing (every kernel decays), so its
/// right limit at the current time bounds it until the next acceptance.
/// Parents of accepted events are drawn in proportion to their kernel
/// contribution at the acceptance time.
pub fn simulate_thinning(config: &SimConfig) -> Result<SimCascade> {
    config.validate()?;
    let horizon = config
        .horizon
        .ok_or_else(|| Error::Config("thinning requires a finite horizon".into()))?;
    let p = &config.params;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut nodes = vec![Node {
        time: 0.0,
        magnitude: config.seed_magnitude,
        generation: 0,
        parent: None,
        min_delay: 0.0,
    }];
    let rate_at = |nodes: &[Node], t: f64| -> f64 {
        nodes
            .iter()
            .map(|n| p.kappa * n.magnitude.powf(p.beta) * (t - n.time + p.c).powf(-(1.0 + p.theta)))
            .sum()
    };
    let mut truncated = false;
    let mut now = 0.0;
    let mut contributions = Vec::new();
    loop {
        let bound = rate_at(&nodes, now);
        if !(bound > 0.0) {
            break;
        }
        now += Exp::new(bound).expect("positive rate").sample(&mut rng);
        if now > horizon {
            break;
        }
        contributions.clear();
        contributions.extend(nodes.iter().map(|n| {
            p.kappa * n.magnitude.powf(p.beta) * (now - n.time + p.c).powf(-(1.0 + p.theta))
        }));
        let rate: f64 = contributions.iter().sum();
        if rng.random::<f64>() * bound > rate {
            continue;
        }
        let mut pick = rng.random::<f64>() * rate;
        let mut parent = contributions.len() - 1;
        for (j, w) in contributions.iter().enumerate() {
            if pick < *w {
                parent = j;
                break;
            }
            pick -= w;
        }
        if nodes.len() >= config.max_events {
            truncated = true;
            break;
        }
        let magnitude = sample_magnitude(&config.dist, &mut rng);
        nodes.push(Node {
            time: now,
            magnitude,
            generation: nodes[parent].generation + 1,
            parent: Some(parent),
            min_delay: 0.0,
        });
    }
    assemble("sim", nodes, Vec::new(), Some(horizon), truncated)
}

/// Samples one continuation of `cascade` past `horizon` until extinction.
///
/// Events observed by `horizon` act as generation-0 parents whose children
/// can only fall after the horizon.
pub fn continue_cascade<R: Rng + ?Sized>(
    cascade: &Cascade,
    params: &HawkesParams,
    dist: &InfluenceDistribution,
    horizon: f64,
    rng: &mut R,
) -> Result<SimCascade> {
    continue_cascade_capped(cascade, params, dist, horizon, DEFAULT_MAX_EVENTS, rng)
}

pub fn continue_cascade_capped<R: Rng + ?Sized>(
    cascade: &Cascade,
    params: &HawkesParams,
    dist: &InfluenceDistribution,
    horizon: f64,
    max_events: usize,
    rng: &mut R,
) -> Result<SimCascade> {
    validate_sim_params(params)?;
    require_subcritical(params, dist)?;
    let observed = &cascade.events()[..cascade.count_until(horizon)];
    if observed.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut nodes: Vec<Node> = observed
        .iter()
        .map(|e| Node {
            time: e.time,
            magnitude: e.magnitude,
            generation: 0,
            parent: None,
            min_delay: horizon - e.time,
        })
        .collect();
    let truncated = grow(&mut nodes, params, dist, None, max_events.max(observed.len()), rng);
    assemble(cascade.id(), nodes, observed.to_vec(), None, truncated)
}
