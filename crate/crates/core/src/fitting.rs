//! Constrained maximum-likelihood estimation of `{kappa, beta, c, theta}`.
//!
//! The likelihood is concave in `kappa` for fixed `(beta, c, theta)`, with
//! its maximiser at `(n - 1) / C` where `C` is the compensator per unit
//! `kappa`. The branching factor is linear in `kappa`, so the subcriticality
//! constraint `n* <= 1 - eps` is the bound `kappa <= kappa_max(beta, c, theta)`.
//! The fit therefore profiles `kappa` out exactly as
//! `min((n - 1) / C, kappa_max)` and runs BFGS over the remaining three
//! parameters in unconstrained coordinates (`logit` of `beta / (alpha - 1)`,
//! `ln c`, `ln theta`). The profile is C1: at the switch point the
//! `kappa`-derivative of the likelihood is zero.

use std::fmt;

use crate::error::{Error, Result};
use crate::likelihood::{prepare, statistics};
use crate::model::{branching_factor, branching_per_kappa, Cascade, HawkesParams, InfluenceDistribution};
use crate::optim::bfgs;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Observation horizon; `None` uses the cascade's own.
    pub horizon: Option<f64>,
    pub max_iterations: usize,
    /// Infinity-norm bound on the gradient of the per-event negative
    /// log-likelihood in the unconstrained coordinates.
    pub gradient_tolerance: f64,
    /// Subcriticality margin: fits satisfy `n* <= 1 - n_star_slack`.
    pub n_star_slack: f64,
    pub starts: Vec<HawkesParams>,
    /// Cascades with fewer observed events are not fitted.
    pub min_events: usize,
}

impl FitConfig {
    /// Default configuration with the 16-point start grid for `dist`.
    pub fn new(dist: &InfluenceDistribution) -> Self {
        FitConfig {
            horizon: None,
            max_iterations: 200,
            gradient_tolerance: 1e-6,
            n_star_slack: 1e-4,
            starts: default_starts(dist),
            min_events: 5,
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_star_slack > 0.0 && self.n_star_slack <= 0.1) {
            return Err(Error::Config(format!(
                "n_star_slack={} must lie in (0, 0.1]",
                self.n_star_slack
            )));
        }
        if self.starts.is_empty() {
            return Err(Error::Config("at least one start point is required".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::Config("gradient_tolerance must be positive".into()));
        }
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h >= 0.0) {
                return Err(Error::Config(format!("horizon {h} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig::new(&InfluenceDistribution::default())
    }
}

/// Cartesian grid `kappa in {0.1, 1}`, `beta in {0.1, (alpha-1)/2}`,
/// `c in {1, 60}`, `theta in {0.2, 0.8}`.
pub fn default_starts(dist: &InfluenceDistribution) -> Vec<HawkesParams> {
    let mut starts = Vec::with_capacity(16);
    for kappa in [0.1, 1.0] {
        for beta in [0.1, 0.5 * (dist.alpha - 1.0)] {
            for c in [1.0, 60.0] {
                for theta in [0.2, 0.8] {
                    starts.push(HawkesParams::new(kappa, beta, c, theta));
                }
            }
        }
    }
    starts
}

/// Upper end of the `c` search range in seconds.
pub const C_MAX: f64 = 1e6;
/// Upper end of the `theta` search range. Together with `C_MAX` it keeps
/// `c^theta` representable; data favouring an exponential kernel otherwise
/// drive both parameters (and `kappa`) to infinity.
pub const THETA_MAX: f64 = 20.0;
const BOX_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// `n* <= 1 - n_star_slack` holds with equality.
    BranchingFactor,
    /// `c` sits at the top of its search range.
    CUpper,
    /// `theta` sits at the top of its search range.
    ThetaUpper,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::BranchingFactor => f.write_str("n_star"),
            Constraint::CUpper => f.write_str("c_max"),
            Constraint::ThetaUpper => f.write_str("theta_max"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: HawkesParams,
    pub log_likelihood: f64,
    pub n_star: f64,
    pub converged: bool,
    pub active_constraints: Vec<Constraint>,
    pub starts_tried: usize,
}

/// Evaluation of the profiled objective at one point.
struct Profile {
    params: HawkesParams,
    log_likelihood: f64,
    /// Gradient of the profile log-likelihood in the unconstrained coordinates.
    gradient: [f64; 3],
    at_bound: bool,
}

struct Problem<'a> {
    times: Vec<f64>,
    log_m: Vec<f64>,
    horizon: f64,
    dist: &'a InfluenceDistribution,
    headroom: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(frac: f64) -> f64 {
    let frac = frac.clamp(1e-12, 1.0 - 1e-12);
    (frac / (1.0 - frac)).ln()
}

impl Problem<'_> {
    fn beta_span(&self) -> f64 {
        self.dist.alpha - 1.0
    }

    fn to_unconstrained(&self, p: &HawkesParams) -> [f64; 3] {
        [
            logit(p.beta / self.beta_span()),
            logit(p.c / C_MAX),
            logit(p.theta / THETA_MAX),
        ]
    }

    fn evaluate(&self, z: &[f64; 3]) -> Option<Profile> {
        let span = self.beta_span();
        let beta = span * sigmoid(z[0]);
        let c = C_MAX * sigmoid(z[1]);
        let theta = THETA_MAX * sigmoid(z[2]);
        if !(beta > 0.0 && beta < span && c > 0.0 && c.is_finite() && theta > 0.0 && theta.is_finite()) {
            return None;
        }
        let st = statistics(beta, c, theta, &self.times, &self.log_m, self.horizon, true);
        if st.underflow.is_some() || !(st.compensator > 0.0) {
            return None;
        }
        let kappa_free = (st.n as f64 - 1.0) / st.compensator;
        let kappa_max = self.headroom / branching_per_kappa(beta, c, theta, self.dist);
        let at_bound = kappa_free >= kappa_max;
        let kappa = kappa_free.min(kappa_max);
        if !(kappa > 0.0 && kappa.is_finite()) {
            return None;
        }

        let ll = st.log_likelihood(kappa);
        let full = st.gradient(kappa);
        let mut d = [full[1], full[2], full[3]];
        if at_bound {
            let d_kappa = [
                -kappa_max * (1.0 / (self.dist.alpha - beta - 1.0) + self.dist.m_min.ln()),
                kappa_max * theta / c,
                kappa_max * (1.0 / theta + c.ln()),
            ];
            for k in 0..3 {
                d[k] += full[0] * d_kappa[k];
            }
        }
        let gradient = [
            d[0] * beta * (1.0 - beta / span),
            d[1] * c * (1.0 - c / C_MAX),
            d[2] * theta * (1.0 - theta / THETA_MAX),
        ];
        if !ll.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
            return None;
        }
        Some(Profile {
            params: HawkesParams::new(kappa, beta, c, theta),
            log_likelihood: ll,
            gradient,
            at_bound,
        })
    }
}

/// Fits the model to the events of `cascade` inside the horizon, keeping the
/// best optimum over all distinct start points.
pub fn fit(cascade: &Cascade, config: &FitConfig, dist: &InfluenceDistribution) -> Result<FitResult> {
    config.validate()?;
    let horizon = config.horizon.unwrap_or_else(|| cascade.observed_until());
    let observed = cascade.count_until(horizon);
    let needed = config.min_events.max(2);
    if observed < needed {
        return Err(Error::InsufficientEvents { needed, got: observed });
    }
    let (times, log_m) = prepare(cascade, horizon)?;
    let n = times.len() as f64;
    let problem = Problem {
        times,
        log_m,
        horizon,
        dist,
        headroom: 1.0 - config.n_star_slack,
    };

    // Starts differing only in kappa coincide once kappa is profiled out.
    let mut seen: Vec<[u64; 3]> = Vec::new();
    let mut best: Option<(Profile, bool)> = None;
    let mut diagnostics = Vec::new();
    let mut tried = 0;
    for (k, start) in config.starts.iter().enumerate() {
        let key = [start.beta.to_bits(), start.c.to_bits(), start.theta.to_bits()];
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        tried += 1;
        let inside = start.beta > 0.0
            && start.beta < problem.beta_span()
            && start.c > 0.0
            && start.c < C_MAX
            && start.theta > 0.0
            && start.theta < THETA_MAX;
        if !inside {
            diagnostics.push(format!("start {k}: outside the search range"));
            continue;
        }
        let z0 = problem.to_unconstrained(start);
        let outcome = bfgs(
            |z| {
                problem
                    .evaluate(z)
                    .map(|p| (-p.log_likelihood / n, p.gradient.map(|g| -g / n)))
            },
            z0,
            config.max_iterations,
            config.gradient_tolerance,
        );
        let Some(min) = outcome else {
            diagnostics.push(format!("start {k}: objective undefined at the start point"));
            continue;
        };
        let Some(profile) = problem.evaluate(&min.x) else {
            diagnostics.push(format!("start {k}: optimum left the domain"));
            continue;
        };
        let better = best
            .as_ref()
            .is_none_or(|(b, _)| profile.log_likelihood > b.log_likelihood);
        if better {
            best = Some((profile, min.converged));
        }
    }

    let Some((profile, converged)) = best else {
        return Err(Error::FitFailure { diagnostics });
    };
    let mut params = profile.params;
    let mut n_star = branching_factor(&params, dist)?;
    // Rounding in kappa_max can overshoot the bound by an ulp or two.
    while n_star > problem.headroom {
        params.kappa *= 1.0 - 4.0 * f64::EPSILON;
        n_star = branching_factor(&params, dist)?;
    }
    let log_likelihood =
        statistics(params.beta, params.c, params.theta, &problem.times, &problem.log_m, horizon, false)
            .log_likelihood(params.kappa);
    let mut active_constraints = Vec::new();
    if profile.at_bound {
        active_constraints.push(Constraint::BranchingFactor);
    }
    if params.c >= (1.0 - BOX_TOLERANCE) * C_MAX {
        active_constraints.push(Constraint::CUpper);
    }
    if params.theta >= (1.0 - BOX_TOLERANCE) * THETA_MAX {
        active_constraints.push(Constraint::ThetaUpper);
    }
    Ok(FitResult {
        params,
        log_likelihood,
        n_star,
        converged: converged || !active_constraints.is_empty(),
        active_constraints,
        starts_tried: tried,
    })
}
