//! Domain types of the marked Hawkes cascade model and its closed-form
//! quantities.
//!
//! An event of magnitude `m` at time `t_i` raises the event rate at a later
//! time `t` by the power-law kernel
//!
//! ```text
//! phi_m(tau) = kappa * m^beta * (tau + c)^-(1 + theta),   tau = t - t_i
//! ```
//!
//! and the rate is the sum of the kernels of every earlier event. Event
//! magnitudes (follower counts) are modelled as draws from a continuous power
//! law `P(m) = (alpha - 1) m_min^(alpha-1) m^-alpha` on `[m_min, inf)`.

use crate::error::{Error, Result};

/// Influence exponent fitted to follower counts of a large Twitter sample.
pub const DEFAULT_ALPHA: f64 = 2.016;

/// Per-user metadata carried by the extended cascade format.
#[derive(Debug, Clone, PartialEq)]
pub struct UserMeta {
    pub followers: u64,
    pub friends: u64,
    pub statuses: u64,
    /// Seconds since the Unix epoch.
    pub account_created: f64,
    pub user_key: String,
}

/// One (re)tweet.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Seconds since the cascade's first event.
    pub time: f64,
    /// User influence, at least 1.
    pub magnitude: f64,
    pub user: Option<UserMeta>,
}

impl Event {
    pub fn new(time: f64, magnitude: f64) -> Self {
        Event {
            time,
            magnitude,
            user: None,
        }
    }

    /// Builds an event from a raw follower count, clamping counts below one
    /// to one. The flag reports whether the clamp fired.
    pub fn from_followers(time: f64, followers: f64) -> (Self, bool) {
        let clamped = followers < 1.0;
        (Event::new(time, followers.max(1.0)), clamped)
    }

    pub fn with_user(mut self, user: UserMeta) -> Self {
        self.user = Some(user);
        self
    }
}

/// A time-ordered sequence of events observed up to a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    id: String,
    events: Vec<Event>,
    observed_until: f64,
    start_time: Option<f64>,
}

impl Cascade {
    /// Validates and wraps an event sequence.
    ///
    /// The first event must sit at time 0, times must be non-decreasing and
    /// no later than `observed_until`, and magnitudes must be at least 1.
    pub fn new(id: impl Into<String>, events: Vec<Event>, observed_until: f64) -> Result<Self> {
        let first = events.first().ok_or(Error::EmptyInput)?;
        if first.time != 0.0 {
            return Err(Error::Domain(format!(
                "first event must be at time 0, found {}",
                first.time
            )));
        }
        let mut prev = 0.0;
        for (i, e) in events.iter().enumerate() {
            if !e.time.is_finite() || e.time < prev {
                return Err(Error::Domain(format!(
                    "event {i} at time {} breaks time ordering",
                    e.time
                )));
            }
            if !e.magnitude.is_finite() || e.magnitude < 1.0 {
                return Err(Error::Domain(format!(
                    "event {i} has magnitude {} (< 1)",
                    e.magnitude
                )));
            }
            prev = e.time;
        }
        if !observed_until.is_finite() || observed_until < prev {
            return Err(Error::Domain(format!(
                "observation horizon {observed_until} precedes last event at {prev}"
            )));
        }
        Ok(Cascade {
            id: id.into(),
            events,
            observed_until,
            start_time: None,
        })
    }

    /// Cascade observed until its last event (`T = max t_i`).
    pub fn until_last_event(id: impl Into<String>, events: Vec<Event>) -> Result<Self> {
        let last = events.last().map_or(0.0, |e| e.time);
        Cascade::new(id, events, last)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Absolute wall-clock start (seconds since epoch), when known.
    pub fn with_start_time(mut self, start: f64) -> Self {
        self.start_time = Some(start);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn observed_until(&self) -> f64 {
        self.observed_until
    }

    pub fn start_time(&self) -> Option<f64> {
        self.start_time
    }

    pub fn has_metadata(&self) -> bool {
        self.events.iter().all(|e| e.user.is_some())
    }

    /// Number of events with `time <= horizon`.
    pub fn count_until(&self, horizon: f64) -> usize {
        self.events.partition_point(|e| e.time <= horizon)
    }

    /// The observed prefix up to `horizon`, with the horizon as its
    /// observation window.
    pub fn prefix_until(&self, horizon: f64) -> Result<Cascade> {
        let k = self.count_until(horizon);
        let mut c = Cascade::new(self.id.clone(), self.events[..k].to_vec(), horizon)?;
        c.start_time = self.start_time;
        Ok(c)
    }

    /// The first `count` events, observed until the last of them.
    pub fn first_events(&self, count: usize) -> Result<Cascade> {
        if count == 0 || count > self.events.len() {
            return Err(Error::InsufficientEvents {
                needed: count.max(1),
                got: self.events.len(),
            });
        }
        let mut c = Cascade::until_last_event(self.id.clone(), self.events[..count].to_vec())?;
        c.start_time = self.start_time;
        Ok(c)
    }
}

/// Kernel parameters `{kappa, beta, c, theta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HawkesParams {
    /// Content virality.
    pub kappa: f64,
    /// Warping exponent applied to user influence.
    pub beta: f64,
    /// Temporal shift (seconds) keeping the kernel bounded at zero delay.
    pub c: f64,
    /// Memory decay exponent.
    pub theta: f64,
}

impl HawkesParams {
    pub const fn new(kappa: f64, beta: f64, c: f64, theta: f64) -> Self {
        HawkesParams {
            kappa,
            beta,
            c,
            theta,
        }
    }

    /// Positivity checks that do not depend on the influence distribution.
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.kappa) && ok(self.beta) && ok(self.c) && ok(self.theta)) {
            return Err(Error::ParameterDomain(format!(
                "kappa, beta, c and theta must be finite and > 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    /// Full validation, including `beta < alpha - 1`.
    pub fn validate_with(&self, dist: &InfluenceDistribution) -> Result<()> {
        self.validate()?;
        if self.beta >= dist.alpha - 1.0 {
            return Err(Error::ParameterDomain(format!(
                "beta={} must be below alpha-1={}",
                self.beta,
                dist.alpha - 1.0
            )));
        }
        Ok(())
    }

    /// Kernel without validation; callers guarantee the domain.
    #[inline]
    pub(crate) fn phi(&self, magnitude: f64, tau: f64) -> f64 {
        self.kappa * magnitude.powf(self.beta) * (tau + self.c).powf(-(1.0 + self.theta))
    }

    /// Integral of the kernel of a magnitude-`m` event over `(tau_lo, inf)`.
    #[inline]
    pub(crate) fn tail_mass(&self, magnitude: f64, tau_lo: f64) -> f64 {
        self.kappa * magnitude.powf(self.beta) * (tau_lo + self.c).powf(-self.theta) / self.theta
    }
}

/// Power-law distribution of user influence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluenceDistribution {
    pub alpha: f64,
    pub m_min: f64,
}

impl Default for InfluenceDistribution {
    fn default() -> Self {
        InfluenceDistribution {
            alpha: DEFAULT_ALPHA,
            m_min: 1.0,
        }
    }
}

impl InfluenceDistribution {
    pub fn new(alpha: f64, m_min: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(Error::ParameterDomain(format!("alpha={alpha} must be > 1")));
        }
        if !(m_min.is_finite() && m_min >= 1.0) {
            return Err(Error::ParameterDomain(format!("m_min={m_min} must be >= 1")));
        }
        Ok(InfluenceDistribution { alpha, m_min })
    }

    pub fn with_alpha(alpha: f64) -> Result<Self> {
        InfluenceDistribution::new(alpha, 1.0)
    }

    /// Density `P(m)`; zero below the support.
    pub fn density(&self, m: f64) -> f64 {
        if m < self.m_min {
            return 0.0;
        }
        (self.alpha - 1.0) / self.m_min * (m / self.m_min).powf(-self.alpha)
    }
}

/// Event rate contributed by one event of magnitude `m`, `tau` seconds later.
pub fn kernel_value(params: &HawkesParams, m: f64, tau: f64) -> Result<f64> {
    params.validate()?;
    if !(tau >= 0.0) || !(m >= 1.0) {
        return Err(Error::ParameterDomain(format!(
            "kernel needs tau >= 0 and m >= 1 (tau={tau}, m={m})"
        )));
    }
    Ok(params.phi(m, tau))
}

/// Conditional intensity at `t`: the sum of kernels of all events strictly
/// before `t`.
pub fn intensity(params: &HawkesParams, cascade: &Cascade, t: f64) -> Result<f64> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(Error::ParameterDomain(format!("t={t} must be >= 0")));
    }
    Ok(cascade
        .events()
        .iter()
        .take_while(|e| e.time < t)
        .map(|e| params.phi(e.magnitude, t - e.time))
        .sum())
}

/// `n* / kappa`: the branching factor per unit of virality.
pub(crate) fn branching_per_kappa(beta: f64, c: f64, theta: f64, dist: &InfluenceDistribution) -> f64 {
    let a = dist.alpha;
    (a - 1.0) / (a - beta - 1.0) * dist.m_min.powf(beta) / (theta * c.powf(theta))
}

/// Closed-form branching factor: the expected number of direct children of
/// an event whose magnitude is drawn from `dist`.
pub fn branching_factor(params: &HawkesParams, dist: &InfluenceDistribution) -> Result<f64> {
    let limit = dist.alpha - 1.0;
    if !(params.beta < limit) || !(params.theta > 0.0) {
        return Err(Error::UndefinedBranching {
            beta: params.beta,
            limit,
            theta: params.theta,
        });
    }
    params.validate()?;
    Ok(params.kappa * branching_per_kappa(params.beta, params.c, params.theta, dist))
}

/// Continuous power-law maximum-likelihood estimate of `alpha` above a fixed
/// lower bound `m_min`.
pub fn fit_influence_alpha(magnitudes: &[f64], m_min: f64) -> Result<InfluenceDistribution> {
    const MIN_SAMPLES: usize = 100;
    if !(m_min.is_finite() && m_min >= 1.0) {
        return Err(Error::ParameterDomain(format!("m_min={m_min} must be >= 1")));
    }
    let (count, log_sum) = magnitudes
        .iter()
        .filter(|&&m| m >= m_min)
        .fold((0usize, 0.0f64), |(n, s), &m| (n + 1, s + (m / m_min).ln()));
    if count < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_SAMPLES,
            got: count,
        });
    }
    if log_sum <= 0.0 {
        return Err(Error::Domain(
            "all samples sit at m_min; the exponent is unbounded".into(),
        ));
    }
    InfluenceDistribution::new(1.0 + count as f64 / log_sum, m_min)
}
